"""Shared fixtures: fixture-corpus paths, service factories, random KB data."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from tutorkit.config import ProviderConfig, TutorConfig
from tutorkit.kb import KnowledgeBase, load_knowledge_base
from tutorkit.retrieval import SegmentIndex, build_index
from tutorkit.service import TutorService

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
KB_DIR = FIXTURES / "kb"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def kb_dir() -> Path:
    return KB_DIR


@pytest.fixture(scope="session")
def kb() -> KnowledgeBase:
    return load_knowledge_base(KB_DIR)


@pytest.fixture(scope="session")
def index(kb) -> SegmentIndex:
    return build_index(kb)


@pytest.fixture
def config(tmp_path) -> TutorConfig:
    return TutorConfig(
        kb_dir=str(KB_DIR),
        data_dir=str(tmp_path / "data"),
        language="en",
        course_name="Bee Data Science",
        provider=ProviderConfig(kind="scripted"),
    )


@pytest.fixture
def service(config) -> TutorService:
    return TutorService(config)


# Word pool for generated modules. Deliberately avoids the off-domain probe
# words ("weather", "today", ...) so generated KBs never skew the gate tests.
WORDS = (
    "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda sigma "
    "vector matrix tensor scalar graph node edge path cycle tree loop "
    "sample mean median mode range variance spread outlier cluster trend "
    "python string integer float list tuple mapping branch merge commit "
    "hive bee colony pollen nectar queen worker drone comb frame"
).split()


def random_text(rng: random.Random, lo: int = 3, hi: int = 12) -> str:
    words = [rng.choice(WORDS) for _ in range(rng.randint(lo, hi))]
    return " ".join(words).capitalize() + "."


def random_module_source(rng: random.Random, module_idx: int) -> tuple[str, str]:
    """One random module in the KB grammar; returns (filename, source)."""
    headers = [
        ("Tasks", False),
        ("Hints", False),
        ("Explanations", False),
        ("Analogies", False),
        ("Solutions", True),
        ("Motivation", False),
        ("Misconceptions", False),
    ]
    rng.shuffle(headers)
    count = rng.randint(1, len(headers))
    chosen = headers[:count]

    lines: list[str] = []
    if rng.random() < 0.7:
        lines += ["---", f"id: gen-{module_idx}"]
        if rng.random() < 0.5:
            lines.append(f"topic: topic-{rng.randint(0, 9)}")
        lines += ["---", ""]
    lines += [f"# Module {module_idx}", ""]
    for name, is_solution in chosen:
        header = f"## {name} (do not show)" if is_solution else f"## {name}"
        lines += [header, ""]
        segments = [random_text(rng) for _ in range(rng.randint(1, 4))]
        if rng.random() < 0.5:
            for text in segments:
                lines.append(f"- {text}")
            lines.append("")
        else:
            for text in segments:
                lines += [text, ""]
    source = "\n".join(lines).rstrip("\n") + "\n"
    return f"gen-{module_idx}.md", source


def random_kb(rng: random.Random, max_modules: int = 4) -> KnowledgeBase:
    from tutorkit.kb import parse_knowledge_base

    listing = [
        random_module_source(rng, i) for i in range(rng.randint(1, max_modules))
    ]
    return parse_knowledge_base(listing)
