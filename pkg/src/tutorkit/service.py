"""Exchange pipeline and the HTTP/SSE surface around it.

One student message flows through: intent classification, scaffold
traversal, redaction, prompt assembly, provider streaming, persistence.
The stream to the client is framed as server-sent events with a leading
`meta` event so a UI can label the reply before tokens arrive.

No postponed annotations here: the request models live inside create_app,
and the HTTP layer needs to resolve them at definition time.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from . import sessions
from .config import TutorConfig
from .gateway import (
    REFUSAL_TEXT,
    LiveProvider,
    ScriptedProvider,
    generate_stream,
    make_provider,
    split_tokens,
)
from .kb import KnowledgeBase, SegmentTag, hint_ladder, load_knowledge_base, tokenize
from .pedagogy import (
    IntentClass,
    RedactionPolicy,
    Strategy,
    assemble_prompt,
    classify_intent,
    next_step,
)
from .retrieval import SegmentIndex, build_index, relevance_score
from .sessions import Session, SessionStore, Turn

log = logging.getLogger("tutorkit.service")


class UnknownModuleError(Exception):
    pass


@dataclass(frozen=True)
class ClientEvent:
    """One named SSE frame sent to the chat client."""

    name: str  # "meta" | "token" | "done" | "error"
    data: dict

    def to_sse(self) -> str:
        return f"event: {self.name}\ndata: {json.dumps(self.data, ensure_ascii=False)}\n\n"


class TutorService:
    """Owns the knowledge base, index, provider, and session store."""

    def __init__(
        self,
        config: TutorConfig,
        kb: KnowledgeBase | None = None,
        provider: ScriptedProvider | LiveProvider | None = None,
        store: SessionStore | None = None,
    ):
        self.config = config
        self.kb = kb if kb is not None else load_knowledge_base(config.kb_dir)
        self.index: SegmentIndex = build_index(self.kb)
        self.provider = provider if provider is not None else make_provider(config.provider)
        self.store = store if store is not None else SessionStore(config.data_dir)
        self.draining = False

    def begin_drain(self) -> None:
        self.draining = True

    def create_session(self) -> Session:
        return self.store.create()

    def session_view(self, session_id: str) -> dict:
        session = self.store.get(session_id)
        return {
            "session_id": session.id,
            "created_at": session.created_at,
            "active_module": session.active_module,
            "turns": [turn.to_dict() for turn in session.turns],
            "scaffold_states": {
                module_id: state.to_dict()
                for module_id, state in sorted(session.scaffold_states.items())
            },
        }

    def module_listing(self) -> list[dict]:
        """Public module catalogue; solution text is never included."""
        listing = []
        for module_id in self.kb.module_ids():
            module = self.kb.modules[module_id]
            listing.append(
                {
                    "id": module.id,
                    "title": module.title,
                    "topic": module.topic or "",
                    "tags": [
                        tag.value
                        for tag in SegmentTag
                        if module.segments(tag)
                    ],
                    "hint_ladder_length": len(hint_ladder(module)),
                    "tasks": [seg.text for seg in module.segments(SegmentTag.TASK)],
                }
            )
        return listing

    def _resolve_module(self, session: Session, module_id: str | None) -> str:
        """Explicit module, else the session's active one, else a lone module."""
        if module_id:
            if module_id not in self.kb.modules:
                raise UnknownModuleError(f"unknown module {module_id!r}")
            return module_id
        if session.active_module:
            return session.active_module
        ids = self.kb.module_ids()
        if len(ids) == 1:
            return ids[0]
        raise UnknownModuleError(
            "module_id is required when the knowledge base has several modules"
        )

    def open_exchange(
        self, session_id: str, text: str, module_id: str | None = None
    ) -> Iterator[ClientEvent]:
        """Validate and lock before any event is produced.

        Raises NotFoundError / UnknownModuleError / BusyError synchronously
        so the HTTP layer can answer with a proper status code instead of a
        broken stream. The returned generator owns the lock.
        """
        session = self.store.get(session_id)
        resolved = self._resolve_module(session, module_id)
        lock = self.store.exchange_lock(session_id)
        lock.__enter__()

        def run() -> Iterator[ClientEvent]:
            try:
                yield None  # type: ignore[misc]  # handshake, consumed below
                yield from self._exchange_events(session, resolved, text)
            finally:
                lock.__exit__(None, None, None)

        stream = run()
        # prime to just inside the try block so closing the generator always
        # releases the lock, even when no event was ever consumed
        next(stream)
        return stream

    def handle_message(
        self, session_id: str, text: str, module_id: str | None = None
    ) -> Iterator[ClientEvent]:
        """Stream-only variant: validation failures become one Error event."""
        try:
            stream = self.open_exchange(session_id, text, module_id)
        except sessions.NotFoundError as exc:
            return iter([ClientEvent("error", {"code": "unknown_session", "message": str(exc)})])
        except UnknownModuleError as exc:
            return iter([ClientEvent("error", {"code": "unknown_module", "message": str(exc)})])
        except sessions.BusyError as exc:
            return iter([ClientEvent("error", {"code": "busy", "message": str(exc)})])
        return stream

    def _exchange_events(
        self, session: Session, module_id: str, message: str
    ) -> Iterator[ClientEvent]:
        config = self.config
        module = self.kb.modules[module_id]
        state = session.state_for(module_id)

        relevance = relevance_score(self.index, message)
        misconception_vocab = frozenset(
            token
            for seg in module.segments(SegmentTag.MISCONCEPTION)
            for token in tokenize(seg.text)
        )
        intent = classify_intent(
            message,
            relevance,
            state,
            off_topic_threshold=config.off_topic_threshold,
            misconception_vocab=misconception_vocab,
        )
        policy = RedactionPolicy(
            allow_solutions=config.allow_solutions,
            learner_exhausted_ladder=state.hint_level >= len(hint_ladder(module)),
            explicit_final_request=intent is IntentClass.SOLUTION_REQUEST,
        )
        decision = next_step(
            intent, state, module, policy, message=message, index=self.index
        )
        history = tuple(session.turns[-config.history_budget :])
        bundle = assemble_prompt(
            decision,
            history,
            message,
            config,
            policy=policy,
            solution_texts=self.kb.solution_texts(),
        )

        tags_used = sorted(tag.value for tag in bundle.meta.tags_used)
        meta: dict = {
            "session_id": session.id,
            "module_id": module_id,
            "intent": intent.value,
            "strategy": decision.strategy.value,
            "tags_used": tags_used,
            "hint_level": decision.next_state.hint_level,
        }
        if decision.refusal_reason:
            meta["refusal_reason"] = decision.refusal_reason

        parts: list[str] = []
        persisted = False

        def persist(error_code: str) -> None:
            nonlocal persisted
            if persisted:
                return
            persisted = True
            student = Turn(role="student", text=message, intent=intent.value)
            tutor = Turn(
                role="tutor",
                text="".join(parts),
                strategy=decision.strategy.value,
                tags_used=tuple(tags_used),
                error_code=error_code,
            )
            self.store.record_exchange(session, student, tutor, decision.next_state)

        try:
            yield ClientEvent("meta", meta)
            if decision.strategy is Strategy.REFUSE:
                # refusals are answered locally; the provider is never called
                for token in split_tokens(REFUSAL_TEXT):
                    parts.append(token)
                    yield ClientEvent("token", {"text": token})
                persist("")
                yield ClientEvent("done", {"finish_reason": "stop"})
                return
            terminal: ClientEvent | None = None
            error_code = ""
            for event in generate_stream(bundle, self.provider):
                if self.draining:
                    error_code = "shutdown"
                    terminal = ClientEvent(
                        "error",
                        {"code": "shutdown", "message": "service is shutting down"},
                    )
                    break
                if event.kind == "token":
                    parts.append(event.text)
                    yield ClientEvent("token", {"text": event.text})
                elif event.kind == "done":
                    terminal = ClientEvent(
                        "done", {"finish_reason": event.finish_reason}
                    )
                    break
                else:
                    error_code = "provider_error"
                    terminal = ClientEvent(
                        "error",
                        {"code": "provider_error", "message": event.message},
                    )
                    break
            persist(error_code)
            if terminal is not None:
                yield terminal
        except GeneratorExit:
            # client went away mid-stream; keep what was delivered
            persist("client_disconnected")
            raise


def _error_body(code: str, message: str) -> dict:
    return {"code": code, "message": message}


def create_app(
    config: TutorConfig | None = None, service: TutorService | None = None
):
    """Build the FastAPI app; startup fails when the knowledge base does."""
    from contextlib import asynccontextmanager

    from fastapi import FastAPI
    from fastapi.responses import JSONResponse, StreamingResponse
    from pydantic import BaseModel

    if service is None:
        if config is None:
            raise ValueError("create_app needs a config or a service")
        service = TutorService(config)
    config = service.config

    @asynccontextmanager
    async def lifespan(_app):
        yield
        service.begin_drain()

    app = FastAPI(title="tutorkit", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.service = service

    if config.cors:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    class MessageIn(BaseModel):
        text: str
        module_id: str | None = None

    sse_headers = {
        "Cache-Control": "no-cache",
        "Connection": "keep-alive",
        "X-Accel-Buffering": "no",
    }

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "kb_modules": len(service.kb.modules)}

    @app.get("/api/kb/modules")
    def kb_modules():
        return service.module_listing()

    @app.post("/api/sessions", status_code=201)
    def create_session():
        session = service.create_session()
        return {"session_id": session.id, "created_at": session.created_at}

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            return service.session_view(session_id)
        except sessions.NotFoundError:
            return JSONResponse(
                status_code=404,
                content=_error_body("unknown_session", "no such session"),
            )

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageIn):
        if service.draining:
            return JSONResponse(
                status_code=503,
                content=_error_body("shutdown", "service is shutting down"),
            )
        try:
            stream = service.open_exchange(session_id, body.text, body.module_id)
        except sessions.NotFoundError:
            return JSONResponse(
                status_code=404,
                content=_error_body("unknown_session", "no such session"),
            )
        except UnknownModuleError as exc:
            return JSONResponse(
                status_code=404,
                content=_error_body("unknown_module", str(exc)),
            )
        except sessions.BusyError:
            return JSONResponse(
                status_code=409,
                content=_error_body("busy", "an exchange is already in flight"),
            )
        return StreamingResponse(
            (event.to_sse() for event in stream),
            media_type="text/event-stream",
            headers=sse_headers,
        )

    return app


def load_service(config_path: str | Path | None = None, **overrides) -> TutorService:
    from .config import load_config

    return TutorService(load_config(config_path, **overrides))
