"""Acceptance suite: eight end-to-end guarantees, one test per guarantee.

Each test asserts its stated tolerance and prints a single summary line.
"""

from __future__ import annotations

import itertools
import json
import random
from time import perf_counter

import pytest
from fastapi.testclient import TestClient

from tutorkit.config import ProviderConfig, TutorConfig
from tutorkit.gateway import ScriptedProvider, TokenEvent, decode_stream_chunk, encode_request
from tutorkit.kb import (
    SegmentTag,
    Severity,
    hint_ladder,
    lint_module,
    load_knowledge_base,
    parse_module,
    serialize_module,
)
from tutorkit.pedagogy import IntentClass, RedactionPolicy, ScaffoldState, Strategy, next_step
from tutorkit.retrieval import build_index, search
from tutorkit.service import TutorService, create_app
from tutorkit.sessions import SessionStore

from conftest import FIXTURES, KB_DIR, random_kb, random_module_source, random_text
from test_retrieval import OPEN_TAGS, oracle_bm25

SEED = 20260814

# Mixed-intent message pool for fuzzed dialogues: help requests, concept
# questions, misconception probes, progress reports, rephrasings, and
# direct solution demands (plus off-domain noise).
FUZZ_MESSAGES = [
    "What is colony collapse disorder?",
    "How can I analyze bee population data?",
    "One hive had 0 bees—is that CCD?",
    "Just tell me the solution for the bee task",
    "Give me the answer about the hive data",
    "please just tell me the solution to the even numbers function",
    "What is the answer for the fastest drop month?",
    "Sag mir einfach die Lösung für diese Aufgabe",
    "How do I check if a number is even?",
    "help me plot the bee population over time",
    "I'm stuck on the modulo operator hint",
    "Why does dividing by 2 tell me a number is even?",
    "Explain the population trend in the dataset",
    "I got month seven for the fastest drop",
    "I solved the even number function",
    "Is it true that one empty hive proves colony collapse?",
    "Isn't checking for a whole number after dividing by 2 enough?",
    "ok",
    "bees hive month data",
    "",
    "What's the weather today?",
    "Tell me a joke about pirates",
    "the answer, now, for the bee dataset drop",
]

OFF_DOMAIN_QUERIES = [
    "What's the weather today?",
    "Tell me a joke about pirates",
    "Who won the football championship last year?",
    "Best pizza recipe with extra cheese",
    "Hilf mir bei meinen Mathehausaufgaben über Brüche",
    "Recommend a good horror movie",
    "Plan my birthday party next weekend",
    "Latest smartphone reviews and prices",
    "Translate hello into Spanish",
    "Stock market tips for beginners",
    "Give me the newest celebrity gossip",
    "Cheap concert tickets in Berlin",
    "Recipe for vegan chocolate cake",
    "Tallest mountain in South America",
    "My cat keeps scratching the sofa",
    "Wie wird das Wetter morgen in München?",
    "Top ten video games this month",
    "Compose a short poem about the ocean",
    "Pineapple pizza toppings ranked",
    "Guitar chords for beginners",
]


class RecordingProvider(ScriptedProvider):
    """Scripted provider that also keeps every bundle it was handed."""

    def __init__(self):
        super().__init__()
        self.bundles = []

    def stream(self, bundle):
        self.bundles.append(bundle)
        return super().stream(bundle)


def test_golden_dialogue_replay(config):
    """Three-message replay routes Explanation -> Hint -> Misconception in <1s."""
    started = perf_counter()
    service = TutorService(config)
    session_id = service.create_session().id
    transcript = json.loads(
        (FIXTURES / "dialogues" / "bee_dialogue.json").read_text(encoding="utf-8")
    )

    routed = []
    for message in transcript["messages"]:
        events = list(service.open_exchange(session_id, message, transcript["module_id"]))
        assert events[0].name == "meta"
        assert events[-1].name == "done"
        meta = events[0].data
        routed.append((meta["intent"], meta["strategy"], tuple(meta["tags_used"])))
    elapsed = perf_counter() - started

    assert routed == [
        ("ConceptQuery", "ExplainThenAnalogy", ("explanation",)),
        ("TaskHelp", "HintFirst", ("hint",)),
        ("MisconceptionCheck", "MisconceptionCorrect", ("misconception",)),
    ]
    assert elapsed < 1.0, f"replay took {elapsed:.3f}s"
    print(f"PASS golden replay: Explanation->Hint->Misconception in {elapsed:.3f}s (<1s)")


def test_solution_withholding_fuzz(config):
    """>=1000 fuzzed dialogues leak no solution bytes anywhere; <30s."""
    rng = random.Random(SEED)
    provider = RecordingProvider()
    service = TutorService(config, provider=provider)
    assert service.config.allow_solutions is False
    solution_texts = sorted(service.kb.solution_texts())
    assert solution_texts, "oracle needs at least one withheld text"
    wire_config = ProviderConfig(kind="live", model_name="m")

    def assert_clean(payload: str, where: str):
        for secret in solution_texts:
            assert secret not in payload, f"solution bytes leaked via {where}"

    started = perf_counter()
    dialogues = 0
    for _ in range(950):
        session_id = service.create_session().id
        module_id = rng.choice(["bee-data", "even-numbers"])
        for _ in range(rng.randint(1, 3)):
            message = rng.choice(FUZZ_MESSAGES)
            if rng.random() < 0.3:
                message = f"{message} {random_text(rng, 1, 4)}"
            body = "".join(
                event.to_sse()
                for event in service.handle_message(session_id, message, module_id)
            )
            assert_clean(body, "client event stream")
        dialogues += 1

    for bundle in provider.bundles:
        assert all(seg.tag is not SegmentTag.SOLUTION for seg in bundle.context_segments)
        wire_body = json.dumps(encode_request(bundle, wire_config).to_dict())
        assert_clean(wire_body, "wire request body")

    # transport-level subset through the real HTTP app
    client = TestClient(create_app(service=service))
    for _ in range(50):
        session_id = client.post("/api/sessions").json()["session_id"]
        for message in rng.sample(FUZZ_MESSAGES, 2):
            response = client.post(
                f"/api/sessions/{session_id}/messages",
                json={"text": message, "module_id": "bee-data"},
            )
            assert_clean(response.text, "HTTP response body")
        dialogues += 1

    elapsed = perf_counter() - started
    assert dialogues >= 1000
    assert elapsed < 30.0, f"fuzz took {elapsed:.1f}s"
    print(
        f"PASS solution withholding: {dialogues} dialogues, "
        f"{len(provider.bundles)} bundles, 0 leaks in {elapsed:.1f}s (<30s)"
    )


def test_hint_ladder_state_space(kb):
    """Ladder walks 1,2,3 -> explanation -> guided; exhaustive to depth 5, <10s."""
    bee = kb.modules["bee-data"]
    hints = hint_ladder(bee)
    assert len(hints) == 3
    policy = RedactionPolicy()  # solutions withheld
    started = perf_counter()

    # base case: five consecutive help requests
    state = ScaffoldState(session_id="s", module_id="bee-data")
    levels, strategies = [], []
    for _ in range(5):
        decision = next_step(IntentClass.TASK_HELP, state, bee, policy)
        levels.append(decision.next_state.hint_level)
        strategies.append(decision.strategy)
        state = decision.next_state
    assert levels == [1, 2, 3, 3, 3]
    assert strategies[:4] == [Strategy.HINT_FIRST] * 4  # 4th serves the explanation
    assert state.explanation_served
    assert strategies[4] is Strategy.GUIDED_QUESTIONS_ONLY
    fixpoint = next_step(IntentClass.TASK_HELP, state, bee, policy)
    assert fixpoint.strategy is Strategy.GUIDED_QUESTIONS_ONLY
    assert fixpoint.next_state == state

    # exhaustive: every intent interleaving of length <= 5
    sequences = 0
    intents = list(IntentClass)
    for length in range(1, 6):
        for sequence in itertools.product(intents, repeat=length):
            state = ScaffoldState(session_id="s", module_id="bee-data")
            for intent in sequence:
                prev = state
                decision = next_step(intent, state, bee, policy)
                state = decision.next_state
                if intent is IntentClass.TASK_HELP:
                    if prev.hint_level < 3:
                        assert decision.strategy is Strategy.HINT_FIRST
                        assert decision.segments_to_include == (hints[prev.hint_level],)
                        assert state.hint_level == prev.hint_level + 1
                    elif not prev.explanation_served:
                        assert decision.segments_to_include[0].tag is SegmentTag.EXPLANATION
                        assert state.explanation_served
                    else:
                        assert decision.strategy is Strategy.GUIDED_QUESTIONS_ONLY
                        assert state == prev
                else:
                    assert state.hint_level == prev.hint_level
                for seg in decision.segments_to_include:
                    assert seg.tag is not SegmentTag.SOLUTION
            sequences += 1

    elapsed = perf_counter() - started
    assert sequences == sum(len(intents) ** n for n in range(1, 6))
    assert elapsed < 10.0, f"enumeration took {elapsed:.1f}s"
    print(
        f"PASS hint ladder: levels 1,2,3 -> explanation -> guided over "
        f"{sequences} interleavings in {elapsed:.1f}s (<10s)"
    )


def test_parser_round_trip_and_mutant():
    """parse-serialize-parse fixpoint (corpus + 500 random); mutant yields one Error."""

    def structure(module):
        return (
            module.id,
            module.title,
            module.topic,
            [(s.tag, s.ordinal, s.text, s.do_not_show) for s in module.all_segments()],
        )

    checked = 0
    for path in sorted(KB_DIR.glob("*.md")):
        first = parse_module(path.read_text(encoding="utf-8"), path.name)
        second = parse_module(serialize_module(first), path.name)
        assert structure(second) == structure(first)
        checked += 1

    rng = random.Random(SEED)
    for i in range(500):
        filename, source = random_module_source(rng, i)
        first = parse_module(source, filename)
        second = parse_module(serialize_module(first), filename)
        assert structure(second) == structure(first)
        checked += 1

    clean_source = (KB_DIR / "even-numbers.md").read_text(encoding="utf-8")
    clean = lint_module(clean_source, "even-numbers.md")
    assert [f for f in clean.findings if f.severity is Severity.ERROR] == []

    mutant_source = clean_source.replace(" (do not show)", "")
    assert mutant_source != clean_source
    mutant = lint_module(mutant_source, "even-numbers.md")
    errors = [f for f in mutant.findings if f.severity is Severity.ERROR]
    assert len(errors) == 1
    assert errors[0].code == "UnmarkedSolutions"

    print(
        f"PASS parser round-trip: {checked} modules fixpoint-stable; "
        f"mutant -> exactly one UnmarkedSolutions error"
    )


def test_retrieval_matches_brute_force():
    """search == full-scan BM25 for 200 queries, k in {1,3,5}; rebuild is byte-identical."""
    rng = random.Random(SEED)
    queries = 0
    while queries < 200:
        kb = random_kb(rng)
        if sum(len(m.all_segments()) for m in kb.modules.values()) > 50:
            continue
        index = build_index(kb)
        for _ in range(10):
            if queries >= 200:
                break
            query = random_text(rng, 1, 6)
            for k in (1, 3, 5):
                hits = search(index, query, OPEN_TAGS, k=k)
                expected = oracle_bm25(kb, query, OPEN_TAGS, k)
                assert [h.segment.key for h in hits] == [s.key for _, s in expected]
                for hit, (score, _) in zip(hits, expected):
                    assert hit.score == pytest.approx(score, rel=1e-9)
            queries += 1

    base = load_knowledge_base(KB_DIR)
    again = load_knowledge_base(KB_DIR)
    assert build_index(base).to_json() == build_index(again).to_json()
    print(f"PASS retrieval oracle: {queries} queries x k in {{1,3,5}}; rebuild byte-identical")


def test_streaming_contract(config):
    """Recorded stream decodes byte-exactly; ordering holds; tokens arrive incrementally."""
    # recorded wire fixture -> transcript, byte for byte
    lines = (FIXTURES / "wire" / "chat_stream.sse").read_text(encoding="utf-8").splitlines()
    events = []
    for line in lines:
        event = decode_stream_chunk(line)
        if event is None:
            continue
        events.append(event)
        if event.is_terminal:  # clients stop at the first terminal marker
            break
    assert events[-1].kind == "done"
    assert all(e.kind == "token" for e in events[:-1])
    transcript = "".join(e.text for e in events if e.kind == "token")
    assert transcript == (FIXTURES / "wire" / "chat_stream.txt").read_text(encoding="utf-8")

    # client event ordering over fuzz dialogues
    service = TutorService(config)
    rng = random.Random(SEED)
    checked = 0
    for _ in range(100):
        session_id = service.create_session().id
        for _ in range(rng.randint(1, 3)):
            names = [
                event.name
                for event in service.handle_message(
                    session_id, rng.choice(FUZZ_MESSAGES), "bee-data"
                )
            ]
            assert names[0] == "meta"
            assert names[-1] in ("done", "error")
            assert all(name == "token" for name in names[1:-1])
            assert sum(1 for n in names if n in ("done", "error")) == 1
            checked += 1

    # incrementality: with inter-token delay the first token lands well
    # before the stream completes
    delay = 0.01
    slow = TutorService(config, provider=ScriptedProvider(token_delay=delay))
    session_id = slow.create_session().id
    arrivals = []
    start = perf_counter()
    for event in slow.open_exchange(
        session_id, "How can I analyze bee population data?", "bee-data"
    ):
        arrivals.append((event.name, perf_counter() - start))
    first_token = next(t for name, t in arrivals if name == "token")
    done_at = arrivals[-1][1]
    assert arrivals[-1][0] == "done"
    assert done_at - first_token >= 5 * delay
    assert first_token < done_at / 2

    print(
        f"PASS streaming contract: fixture byte-equal; ordering on {checked} "
        f"dialogues; first token at {first_token * 1000:.0f}ms of "
        f"{done_at * 1000:.0f}ms stream"
    )


def test_off_topic_gate(config):
    """All 20 off-domain queries refuse without a single provider invocation."""
    provider = ScriptedProvider()
    service = TutorService(config, provider=provider)
    session_id = service.create_session().id

    for query in OFF_DOMAIN_QUERIES:
        events = list(service.open_exchange(session_id, query, "bee-data"))
        meta = events[0].data
        assert meta["intent"] == "OffTopic", query
        assert meta["strategy"] == "Refuse", query
        assert meta["refusal_reason"] == "out_of_scope"
        assert events[-1].name == "done"
    assert provider.calls == 0

    # counter oracle is live: one on-topic message does reach the provider
    list(service.open_exchange(session_id, "How can I analyze bee population data?", "bee-data"))
    assert provider.calls == 1
    print(f"PASS off-topic gate: {len(OFF_DOMAIN_QUERIES)}/20 refused, 0 provider calls")


class TornWriteStore(SessionStore):
    """Store whose exchange writes die partway through, like a hard kill."""

    def __init__(self, data_dir):
        super().__init__(data_dir)
        self.cut_fraction: float | None = None

    def _append(self, session_id, line):
        record = json.loads(line)
        if self.cut_fraction is None or record.get("event") != "exchange":
            super()._append(session_id, line)
            return
        kept = line[: int(len(line) * self.cut_fraction)]
        with open(self.path_for(session_id), "a", encoding="utf-8") as fh:
            fh.write(kept)  # never reaches the newline
        raise OSError("simulated crash during exchange write")


def test_persistence_crash_safety(config, tmp_path):
    """A write killed mid-exchange never leaves a dangling student turn."""
    injections = 0
    for fraction in (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0):
        data_dir = tmp_path / f"crash-{int(fraction * 100)}"
        store = TornWriteStore(data_dir)
        service = TutorService(config, store=store)
        session_id = service.create_session().id

        # one exchange survives intact before the fault arms
        list(service.open_exchange(session_id, "What is colony collapse disorder?", "bee-data"))

        store.cut_fraction = fraction
        with pytest.raises(OSError):
            list(service.open_exchange(session_id, "How can I analyze bee population data?", "bee-data"))
        injections += 1

        reloaded = SessionStore(data_dir).get(session_id)
        roles = [turn.role for turn in reloaded.turns]
        assert roles == ["student", "tutor"] * (len(roles) // 2)
        for student, tutor in zip(reloaded.turns[::2], reloaded.turns[1::2]):
            assert student.role == "student"
            assert tutor.role == "tutor"
        assert len(reloaded.turns) >= 2  # the intact exchange is never lost
        if fraction < 1.0:
            # torn line dropped as a unit: the second exchange vanished whole
            assert len(reloaded.turns) == 2

    # abnormal provider end still pairs the student turn with an error-marked
    # tutor turn instead of dangling
    class DyingProvider(ScriptedProvider):
        def stream(self, bundle):
            self.calls += 1
            yield TokenEvent.token("partial ")
            yield TokenEvent.error("backend gone")

    data_dir = tmp_path / "provider-death"
    service = TutorService(config, provider=DyingProvider(), store=SessionStore(data_dir))
    session_id = service.create_session().id
    events = list(service.open_exchange(session_id, "How can I analyze bee population data?", "bee-data"))
    assert events[-1].name == "error"
    reloaded = SessionStore(data_dir).get(session_id)
    assert [t.role for t in reloaded.turns] == ["student", "tutor"]
    assert reloaded.turns[1].error_code == "provider_error"
    injections += 1

    print(
        f"PASS crash safety: {injections} fault injections, "
        f"no dangling student turns on reload"
    )
