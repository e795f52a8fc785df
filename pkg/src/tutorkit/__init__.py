"""Curriculum-grounded tutoring engine.

Parses tagged-Markdown course modules, retrieves matching segments with
BM25, decides a scaffolding step per student message, and streams replies
from an OpenAI-compatible provider (or an offline scripted stand-in) over
an HTTP/SSE service, persisting anonymous sessions as JSONL.
"""

from .config import ProviderConfig, TutorConfig, load_config
from .gateway import (
    REFUSAL_TEXT,
    ChatWireRequest,
    LiveProvider,
    ScriptedProvider,
    TokenEvent,
    decode_stream_chunk,
    encode_request,
    generate_stream,
)
from .kb import (
    KnowledgeBase,
    LintFinding,
    LintReport,
    ModuleDoc,
    ParseError,
    Segment,
    SegmentTag,
    Severity,
    hint_ladder,
    lint_directory,
    lint_module,
    load_knowledge_base,
    parse_knowledge_base,
    parse_module,
    serialize_module,
    tokenize,
)
from .pedagogy import (
    GUIDING_QUESTION,
    BundleMeta,
    IntentClass,
    PromptBundle,
    RedactionPolicy,
    ScaffoldState,
    Strategy,
    TraversalDecision,
    assemble_prompt,
    classify_intent,
    grounding_check,
    next_step,
    redact,
    render_system_instructions,
)
from .retrieval import (
    ScoredSegment,
    SegmentIndex,
    SolutionAccessError,
    build_index,
    relevance_score,
    search,
)
from .service import ClientEvent, TutorService, create_app
from .sessions import BusyError, NotFoundError, Session, SessionStore, Turn

__version__ = "0.1.0"

__all__ = [
    "BundleMeta",
    "BusyError",
    "ChatWireRequest",
    "ClientEvent",
    "GUIDING_QUESTION",
    "IntentClass",
    "KnowledgeBase",
    "LintFinding",
    "LintReport",
    "LiveProvider",
    "ModuleDoc",
    "NotFoundError",
    "ParseError",
    "PromptBundle",
    "ProviderConfig",
    "REFUSAL_TEXT",
    "RedactionPolicy",
    "ScaffoldState",
    "ScoredSegment",
    "ScriptedProvider",
    "Segment",
    "SegmentIndex",
    "SegmentTag",
    "Session",
    "SessionStore",
    "Severity",
    "SolutionAccessError",
    "Strategy",
    "TokenEvent",
    "TraversalDecision",
    "TutorConfig",
    "TutorService",
    "Turn",
    "assemble_prompt",
    "build_index",
    "classify_intent",
    "create_app",
    "decode_stream_chunk",
    "encode_request",
    "generate_stream",
    "grounding_check",
    "hint_ladder",
    "lint_directory",
    "lint_module",
    "load_config",
    "load_knowledge_base",
    "next_step",
    "parse_knowledge_base",
    "parse_module",
    "redact",
    "relevance_score",
    "render_system_instructions",
    "search",
    "serialize_module",
    "tokenize",
]
