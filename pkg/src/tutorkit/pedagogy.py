"""Instructional logic: intent rules, scaffold traversal, redaction, prompts.

Every operation here is a pure function so the guardrails can be verified
offline: the same message, state, and policy always produce the same
decision and the same prompt bundle.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

from .config import DEFAULT_OFF_TOPIC_THRESHOLD, TutorConfig
from .kb import ModuleDoc, Segment, SegmentTag, hint_ladder, tokenize
from .retrieval import SegmentIndex, search

if TYPE_CHECKING:  # pragma: no cover
    from .sessions import Turn


class PedagogyError(Exception):
    """Raised on state/module mismatches and unknown modules."""


class IntentClass(Enum):
    CONCEPT_QUERY = "ConceptQuery"
    TASK_HELP = "TaskHelp"
    SOLUTION_REQUEST = "SolutionRequest"
    MISCONCEPTION_CHECK = "MisconceptionCheck"
    PROGRESS_REPORT = "ProgressReport"
    CLARIFICATION = "Clarification"
    OFF_TOPIC = "OffTopic"


class Strategy(Enum):
    HINT_FIRST = "HintFirst"
    EXPLAIN_THEN_ANALOGY = "ExplainThenAnalogy"
    MISCONCEPTION_CORRECT = "MisconceptionCorrect"
    MOTIVATE = "Motivate"
    REFUSE = "Refuse"
    GUIDED_QUESTIONS_ONLY = "GuidedQuestionsOnly"
    SOLUTION_RELEASE = "SolutionRelease"


SegmentRef = tuple[str, int]  # (tag value, ordinal) within a module


@dataclass(frozen=True)
class ScaffoldState:
    """Escalation position of one session inside one module.

    The ladder never restarts on its own: once solved, a fresh ladder
    requires an explicit reset by the caller (e.g. a new state object).
    """

    session_id: str
    module_id: str
    hint_level: int = 0
    explanation_count: int = 0
    analogy_served: bool = False
    solved: bool = False
    motivation_count: int = 0
    last_served: tuple[SegmentRef, ...] = ()

    @property
    def explanation_served(self) -> bool:
        return self.explanation_count > 0

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "module_id": self.module_id,
            "hint_level": self.hint_level,
            "explanation_count": self.explanation_count,
            "analogy_served": self.analogy_served,
            "solved": self.solved,
            "motivation_count": self.motivation_count,
            "last_served": [list(ref) for ref in self.last_served],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScaffoldState":
        return cls(
            session_id=data["session_id"],
            module_id=data["module_id"],
            hint_level=data.get("hint_level", 0),
            explanation_count=data.get("explanation_count", 0),
            analogy_served=data.get("analogy_served", False),
            solved=data.get("solved", False),
            motivation_count=data.get("motivation_count", 0),
            last_served=tuple(
                (tag, ordinal) for tag, ordinal in data.get("last_served", [])
            ),
        )


@dataclass(frozen=True)
class RedactionPolicy:
    """Solution release requires all three gates at once."""

    allow_solutions: bool = False
    learner_exhausted_ladder: bool = False
    explicit_final_request: bool = False

    @property
    def permits_solutions(self) -> bool:
        return (
            self.allow_solutions
            and self.learner_exhausted_ladder
            and self.explicit_final_request
        )


@dataclass(frozen=True)
class TraversalDecision:
    segments_to_include: tuple[Segment, ...]
    strategy: Strategy
    next_state: ScaffoldState
    intent: IntentClass
    refusal_reason: str | None = None


@dataclass(frozen=True)
class BundleMeta:
    intent: IntentClass
    strategy: Strategy
    tags_used: frozenset[SegmentTag]


@dataclass(frozen=True)
class PromptBundle:
    """The exact redacted context and instructions handed to a provider."""

    system_instructions: str
    context_segments: tuple[Segment, ...]
    history: tuple["Turn", ...]
    student_message: str
    meta: BundleMeta


GUIDING_QUESTION = "What do you think the next step could be?"

DEFAULT_SYSTEM_TEMPLATE = (
    'You are a patient tutoring assistant for the course "{course_name}".\n'
    "Give clear, concise answers, offer extra explanations when they help, "
    "and stay {tone}.\n"
    "ALWAYS and only use the information in the knowledge base excerpts "
    "provided with this conversation; never draw on outside knowledge. "
    "Only answer questions relevant to the course.\n"
    "Write every reply in {language}, pitched for learners aged {age_range}.\n"
    "Support the learner with tips, encouragement, and guiding questions "
    f'such as "{GUIDING_QUESTION}"'
)

# Substring anchors for the two mandatory instruction clauses.
GROUNDING_CLAUSE = (
    "ALWAYS and only use the information in the knowledge base excerpts"
)
NO_SOLUTION_CLAUSE = "NEVER give out the solution directly"

WITHHOLD_CLAUSE = (
    "When the learner asks for a withheld solution, "
    + NO_SOLUTION_CLAUSE
    + "; guide them toward it with tips, guiding questions, and encouragement "
    "instead."
)
RELEASE_CLAUSE = (
    "A solution may be shared only when it appears verbatim in the knowledge "
    "base excerpts of this conversation; otherwise keep guiding the learner."
)

_STRATEGY_NOTES = {
    Strategy.GUIDED_QUESTIONS_ONLY: (
        "The learner has already received the available hints and "
        "explanations for this step. Do not introduce new material; ask "
        "guiding questions and encourage them to reason it out."
    ),
    Strategy.MOTIVATE: (
        "The learner reports progress. Respond with the motivational note "
        "from the excerpts and invite them to continue."
    ),
    Strategy.MISCONCEPTION_CORRECT: (
        "The learner's claim matches a known misconception. Gently correct "
        "it using the excerpt."
    ),
    Strategy.REFUSE: (
        "The question is outside the course scope. Decline briefly and "
        "steer the learner back to the course topics."
    ),
}


def _patterns(*phrases: str) -> list[re.Pattern]:
    return [re.compile(p, re.IGNORECASE) for p in phrases]


_SOLUTION_DEMAND = _patterns(
    r"\bsolutions?\b",
    r"\blösung(?:en)?\b",
    r"\bjust tell me\b",
    r"\btell me the answer\b",
    r"\bgive me the answer\b",
    r"\bthe answer\b",
    r"\bwhat(?:'s| is) the answer\b",
    r"\bsag mir einfach\b",
    r"\bdie antwort\b",
    r"\bverrat(?:e|en)?\b",
)
_PROGRESS_REPORT = _patterns(
    r"\bi got\b",
    r"\bmy answer is\b",
    r"\bdone\b",
    r"\bfinished\b",
    r"\bi solved\b",
    r"\bsolved it\b",
    r"\bfigured it out\b",
    r"\bfertig\b",
    r"\bgeschafft\b",
    r"\bgelöst\b",
    r"\bmeine antwort ist\b",
)
_MISCONCEPTION_PROBE = _patterns(
    r"\bis that\b",
    r"\bis this\b",
    r"\bdoes that mean\b",
    r"\bisn'?t\b",
    r"\bdoesn'?t\b",
    r"\bnot true\b",
    r"\bbut i thought\b",
    r"\bis it true\b",
    r"\bstimmt das\b",
    r"\bheißt das\b",
    r"\bbedeutet das\b",
)
_TASK_HELP = _patterns(
    r"\bhow can i\b",
    r"\bhow do i\b",
    r"\bhow should i\b",
    r"\bhelp\b",
    r"\bstuck\b",
    r"\bhints?\b",
    r"\bwhere do i start\b",
    r"\bhilfe\b",
    r"\bhinweis\b",
    r"\btipp\b",
    r"\bwie kann ich\b",
    r"\bwie mache ich\b",
)
_CONCEPT_QUERY = _patterns(
    r"\bwhat is\b",
    r"\bwhat are\b",
    r"\bwhat does\b",
    r"\bwhy\b",
    r"\bexplain\b",
    r"\bdefine\b",
    r"\bmeaning of\b",
    r"\bwas ist\b",
    r"\bwas sind\b",
    r"\bwarum\b",
    r"\berklär",
)


def _matches(patterns: list[re.Pattern], message: str) -> bool:
    return any(p.search(message) for p in patterns)


def classify_intent(
    message: str,
    kb_relevance: float,
    state: ScaffoldState,
    off_topic_threshold: float = DEFAULT_OFF_TOPIC_THRESHOLD,
    misconception_vocab: frozenset[str] = frozenset(),
) -> IntentClass:
    """Deterministic rule cascade from message text to instructional need.

    Off-topic is decided solely by the relevance score; all later rules
    assume the message is on topic. `state` is part of the contract for
    future state-aware rules but the current cascade does not consult it.
    """
    del state
    text = message.strip()
    if not text:
        return IntentClass.CLARIFICATION
    if kb_relevance < off_topic_threshold:
        return IntentClass.OFF_TOPIC
    if _matches(_SOLUTION_DEMAND, text):
        return IntentClass.SOLUTION_REQUEST
    if _matches(_PROGRESS_REPORT, text):
        return IntentClass.PROGRESS_REPORT
    if _matches(_MISCONCEPTION_PROBE, text) and misconception_vocab.intersection(
        tokenize(text)
    ):
        return IntentClass.MISCONCEPTION_CHECK
    if _matches(_TASK_HELP, text):
        return IntentClass.TASK_HELP
    if _matches(_CONCEPT_QUERY, text):
        return IntentClass.CONCEPT_QUERY
    return IntentClass.CLARIFICATION


def _ref(segment: Segment) -> SegmentRef:
    return (segment.tag.value, segment.ordinal)


def _resolve_refs(module: ModuleDoc, refs: Iterable[SegmentRef]) -> list[Segment]:
    by_ref = {
        (seg.tag.value, seg.ordinal): seg for seg in module.all_segments()
    }
    return [by_ref[ref] for ref in refs if ref in by_ref]


def next_step(
    intent: IntentClass,
    state: ScaffoldState,
    module: ModuleDoc,
    policy: RedactionPolicy,
    message: str = "",
    index: SegmentIndex | None = None,
) -> TraversalDecision:
    """Advance the scaffold one step: pick segments and the successor state.

    Escalation is strictly one level per request; rephrasing cannot skip
    hints. Defined for every intent and reachable state.
    """
    if state.module_id != module.id:
        raise PedagogyError(
            f"scaffold state for module '{state.module_id}' does not match "
            f"module '{module.id}'"
        )

    hints = hint_ladder(module)
    explanations = module.segments(SegmentTag.EXPLANATION)
    analogies = module.segments(SegmentTag.ANALOGY)

    def decision(
        segments: Sequence[Segment],
        strategy: Strategy,
        next_state: ScaffoldState,
        refusal_reason: str | None = None,
    ) -> TraversalDecision:
        return TraversalDecision(
            segments_to_include=tuple(segments),
            strategy=strategy,
            next_state=next_state,
            intent=intent,
            refusal_reason=refusal_reason,
        )

    if intent is IntentClass.OFF_TOPIC:
        return decision((), Strategy.REFUSE, state, refusal_reason="out_of_scope")

    if intent is IntentClass.CLARIFICATION:
        # last_served may point at released solutions; re-gate on every turn
        reserved = redact(
            _resolve_refs(module, state.last_served),
            policy,
            frozenset(s.text for s in module.segments(SegmentTag.SOLUTION)),
        )
        return decision(reserved, Strategy.GUIDED_QUESTIONS_ONLY, state)

    if intent is IntentClass.TASK_HELP:
        if state.hint_level < len(hints):
            seg = hints[state.hint_level]
            return decision(
                (seg,),
                Strategy.HINT_FIRST,
                replace(
                    state,
                    hint_level=state.hint_level + 1,
                    last_served=(_ref(seg),),
                ),
            )
        if explanations and not state.explanation_served:
            seg = explanations[0]
            return decision(
                (seg,),
                Strategy.HINT_FIRST,
                replace(state, explanation_count=1, last_served=(_ref(seg),)),
            )
        return decision((), Strategy.GUIDED_QUESTIONS_ONLY, state)

    if intent is IntentClass.CONCEPT_QUERY:
        if explanations and not state.explanation_served:
            seg = explanations[0]
            return decision(
                (seg,),
                Strategy.EXPLAIN_THEN_ANALOGY,
                replace(state, explanation_count=1, last_served=(_ref(seg),)),
            )
        if analogies and not state.analogy_served:
            seg = analogies[0]
            return decision(
                (seg,),
                Strategy.EXPLAIN_THEN_ANALOGY,
                replace(state, analogy_served=True, last_served=(_ref(seg),)),
            )
        if explanations and state.explanation_count < len(explanations):
            seg = explanations[state.explanation_count]
            return decision(
                (seg,),
                Strategy.EXPLAIN_THEN_ANALOGY,
                replace(
                    state,
                    explanation_count=state.explanation_count + 1,
                    last_served=(_ref(seg),),
                ),
            )
        return decision((), Strategy.GUIDED_QUESTIONS_ONLY, state)

    if intent is IntentClass.MISCONCEPTION_CHECK:
        misconceptions = module.segments(SegmentTag.MISCONCEPTION)
        if not misconceptions:
            return decision((), Strategy.GUIDED_QUESTIONS_ONLY, state)
        seg = misconceptions[0]
        if index is not None and message:
            hits = search(
                index, message, {SegmentTag.MISCONCEPTION}, k=len(misconceptions)
            )
            for hit in hits:
                if hit.segment.module_id == module.id:
                    seg = hit.segment
                    break
        return decision(
            (seg,),
            Strategy.MISCONCEPTION_CORRECT,
            replace(state, last_served=(_ref(seg),)),
        )

    if intent is IntentClass.SOLUTION_REQUEST:
        solutions = module.segments(SegmentTag.SOLUTION)
        if policy.permits_solutions and solutions:
            return decision(
                solutions,
                Strategy.SOLUTION_RELEASE,
                replace(
                    state,
                    solved=True,
                    last_served=tuple(_ref(s) for s in solutions),
                ),
            )
        return decision((), Strategy.GUIDED_QUESTIONS_ONLY, state)

    if intent is IntentClass.PROGRESS_REPORT:
        motivations = module.segments(SegmentTag.MOTIVATION)
        segments: tuple[Segment, ...] = ()
        refs: tuple[SegmentRef, ...] = state.last_served
        if motivations:
            seg = motivations[state.motivation_count % len(motivations)]
            segments = (seg,)
            refs = (_ref(seg),)
        return decision(
            segments,
            Strategy.MOTIVATE,
            replace(
                state,
                solved=True,
                motivation_count=state.motivation_count + 1,
                last_served=refs,
            ),
        )

    raise PedagogyError(f"unhandled intent {intent!r}")  # pragma: no cover


def redact(
    segments: Sequence[Segment],
    policy: RedactionPolicy,
    solution_texts: frozenset[str] = frozenset(),
) -> list[Segment]:
    """Drop solution content unless the policy's three gates all hold.

    Also strips any segment whose text is byte-identical to a known
    solution text, so a mis-tagged duplicate cannot slip through.
    """
    if policy.permits_solutions:
        return list(segments)
    return [
        seg
        for seg in segments
        if seg.tag is not SegmentTag.SOLUTION and seg.text not in solution_texts
    ]


def render_system_instructions(
    config: TutorConfig, strategy: Strategy | None = None
) -> str:
    """Fill the system template and append the solution-policy clause."""
    template = DEFAULT_SYSTEM_TEMPLATE
    if config.system_template_path:
        template = Path(config.system_template_path).read_text(encoding="utf-8")
    instructions = template.format(
        course_name=config.course_name,
        language=config.language,
        age_range=config.age_range,
        tone=config.tone,
    )
    clause = RELEASE_CLAUSE if config.allow_solutions else WITHHOLD_CLAUSE
    instructions = f"{instructions}\n\n{clause}"
    note = _STRATEGY_NOTES.get(strategy) if strategy is not None else None
    if note:
        instructions = f"{instructions}\n\n{note}"
    return instructions


def assemble_prompt(
    decision: TraversalDecision,
    history: Sequence["Turn"],
    message: str,
    config: TutorConfig,
    policy: RedactionPolicy | None = None,
    solution_texts: frozenset[str] = frozenset(),
) -> PromptBundle:
    """Build the grounding boundary: instructions, redacted context, history.

    History is truncated oldest-first to the configured turn budget; the
    context block is capped and re-redacted here as defense in depth.
    """
    if policy is None:
        policy = RedactionPolicy(allow_solutions=config.allow_solutions)
    context = redact(decision.segments_to_include, policy, solution_texts)
    context = context[: config.context_cap]
    kept_history = tuple(history[-config.history_budget :]) if config.history_budget else ()
    return PromptBundle(
        system_instructions=render_system_instructions(config, decision.strategy),
        context_segments=tuple(context),
        history=kept_history,
        student_message=message,
        meta=BundleMeta(
            intent=decision.intent,
            strategy=decision.strategy,
            tags_used=frozenset(seg.tag for seg in context),
        ),
    )


def _word_trigrams(text: str) -> list[tuple[str, str, str]]:
    tokens = tokenize(text)
    return [tuple(tokens[i : i + 3]) for i in range(len(tokens) - 2)]


def grounding_check(response_text: str, bundle: PromptBundle) -> float:
    """Fraction of response word-trigrams found in the bundle's sources.

    Advisory metric only; it never blocks delivery.
    """
    grams = _word_trigrams(response_text)
    if not grams:
        return 0.0
    reference: set[tuple[str, str, str]] = set()
    sources = [seg.text for seg in bundle.context_segments]
    sources.append(bundle.system_instructions)
    sources.extend(turn.text for turn in bundle.history)
    for source in sources:
        reference.update(_word_trigrams(source))
    return sum(1 for g in grams if g in reference) / len(grams)
