"""Anonymous per-session persistence as append-only JSONL event logs.

Each session is one file under {data_dir}/sessions/. An exchange (student
turn, tutor turn, resulting scaffold state) is written as a single line so
a crash mid-write can only produce a torn trailing line, which the loader
drops instead of corrupting the whole session.
"""

from __future__ import annotations

import json
import re
import secrets
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator

from .pedagogy import ScaffoldState


class SessionError(Exception):
    pass


class NotFoundError(SessionError):
    pass


class BusyError(SessionError):
    """Raised when a second exchange is attempted on a locked session."""


# defensive: never let something shaped like a bearer secret reach disk
_SECRET_RE = re.compile(r"\b(?:sk|key|token)-[A-Za-z0-9]{12,}\b")


def _redact(text: str) -> str:
    return _SECRET_RE.sub("***", text)


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Turn:
    """One utterance; intent is set on student turns, strategy on tutor turns."""

    role: str  # "student" | "tutor"
    text: str
    intent: str = ""
    strategy: str = ""
    tags_used: tuple[str, ...] = ()
    error_code: str = ""  # non-empty when the tutor turn ended abnormally
    at: str = ""

    def to_dict(self) -> dict:
        out: dict = {"role": self.role, "text": _redact(self.text), "at": self.at}
        if self.intent:
            out["intent"] = self.intent
        if self.strategy:
            out["strategy"] = self.strategy
        if self.tags_used:
            out["tags_used"] = list(self.tags_used)
        if self.error_code:
            out["error_code"] = self.error_code
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Turn":
        return cls(
            role=data.get("role", ""),
            text=data.get("text", ""),
            intent=data.get("intent", ""),
            strategy=data.get("strategy", ""),
            tags_used=tuple(data.get("tags_used", ())),
            error_code=data.get("error_code", ""),
            at=data.get("at", ""),
        )


@dataclass
class Session:
    """In-memory view of one session's event log."""

    id: str
    created_at: str
    turns: list[Turn] = field(default_factory=list)
    scaffold_states: dict[str, ScaffoldState] = field(default_factory=dict)
    active_module: str = ""

    @classmethod
    def new(cls) -> "Session":
        return cls(id=secrets.token_hex(16), created_at=_now_iso())

    def state_for(self, module_id: str) -> ScaffoldState:
        state = self.scaffold_states.get(module_id)
        if state is None:
            state = ScaffoldState(session_id=self.id, module_id=module_id)
        return state


class SessionStore:
    """JSONL-backed store keyed by 32-hex session ids."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir) / "sessions"
        self.root.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, Session] = {}
        self._locked: set[str] = set()
        self._mutex = threading.Lock()

    def path_for(self, session_id: str) -> Path:
        return self.root / f"{session_id}.jsonl"

    def _append(self, session_id: str, line: str) -> None:
        # single write() call per event keeps lines atomic on POSIX
        with open(self.path_for(session_id), "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def create(self) -> Session:
        session = Session.new()
        record = {"event": "created", "at": session.created_at, "session_id": session.id}
        self._append(session.id, json.dumps(record, ensure_ascii=False))
        with self._mutex:
            self._cache[session.id] = session
        return session

    def exists(self, session_id: str) -> bool:
        with self._mutex:
            if session_id in self._cache:
                return True
        return self.path_for(session_id).is_file()

    def get(self, session_id: str) -> Session:
        with self._mutex:
            cached = self._cache.get(session_id)
        if cached is not None:
            return cached
        session = self._load(session_id)
        with self._mutex:
            self._cache[session_id] = session
        return session

    def _load(self, session_id: str) -> Session:
        path = self.path_for(session_id)
        if not path.is_file():
            raise NotFoundError(f"unknown session {session_id!r}")
        session = Session(id=session_id, created_at="")
        for record in _iter_records(path):
            event = record.get("event")
            if event == "created":
                session.created_at = record.get("at", "")
            elif event == "exchange":
                student = Turn.from_dict(record.get("student", {}))
                tutor = Turn.from_dict(record.get("tutor", {}))
                session.turns.extend((student, tutor))
                state_data = record.get("state")
                if state_data:
                    state = ScaffoldState.from_dict(state_data)
                    session.scaffold_states[state.module_id] = state
                    session.active_module = state.module_id
        return session

    @contextmanager
    def exchange_lock(self, session_id: str) -> Iterator[None]:
        """Exclusive per-session lock; concurrent exchanges raise BusyError."""
        with self._mutex:
            if session_id in self._locked:
                raise BusyError(f"session {session_id!r} has an exchange in flight")
            self._locked.add(session_id)
        try:
            yield
        finally:
            with self._mutex:
                self._locked.discard(session_id)

    def record_exchange(
        self,
        session: Session,
        student: Turn,
        tutor: Turn,
        state: ScaffoldState,
    ) -> None:
        at = _now_iso()
        if not student.at:
            student = replace(student, at=at)
        if not tutor.at:
            tutor = replace(tutor, at=at)
        record = {
            "event": "exchange",
            "at": at,
            "module_id": state.module_id,
            "student": student.to_dict(),
            "tutor": tutor.to_dict(),
            "state": state.to_dict(),
        }
        self._append(session.id, json.dumps(record, ensure_ascii=False))
        session.turns.extend((student, tutor))
        session.scaffold_states[state.module_id] = state
        session.active_module = state.module_id

    def get_history(self, session_id: str, budget: int = 0) -> list[Turn]:
        turns = self.get(session_id).turns
        if budget and budget > 0:
            return list(turns[-budget:])
        return list(turns)

    def gc(self, older_than_days: float) -> int:
        """Delete session files idle longer than the cutoff; returns the count."""
        cutoff = datetime.now(timezone.utc).timestamp() - older_than_days * 86400
        removed = 0
        for path in sorted(self.root.glob("*.jsonl")):
            session_id = path.stem
            with self._mutex:
                if session_id in self._locked:
                    continue
            if path.stat().st_mtime < cutoff:
                path.unlink()
                with self._mutex:
                    self._cache.pop(session_id, None)
                removed += 1
        return removed


def _iter_records(path: Path) -> Iterator[dict]:
    """Yield parsed JSONL records, tolerating a torn trailing line."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                continue
            if isinstance(record, dict):
                yield record
