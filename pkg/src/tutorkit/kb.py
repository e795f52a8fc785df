"""Tagged Markdown knowledge base: parsing, linting, and serialization.

Course content lives in small Markdown files. Second-level headers mark the
pedagogical role of each section (tasks, hints, explanations, ...) and every
list item or paragraph inside a section becomes one retrievable segment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping


class SegmentTag(Enum):
    """Pedagogical role of a knowledge-base segment."""

    TASK = "task"
    HINT = "hint"
    EXPLANATION = "explanation"
    ANALOGY = "analogy"
    SOLUTION = "solution"
    MOTIVATION = "motivation"
    MISCONCEPTION = "misconception"


# Canonical section order for serialization and stable iteration.
TAG_ORDER: tuple[SegmentTag, ...] = (
    SegmentTag.TASK,
    SegmentTag.HINT,
    SegmentTag.EXPLANATION,
    SegmentTag.ANALOGY,
    SegmentTag.SOLUTION,
    SegmentTag.MOTIVATION,
    SegmentTag.MISCONCEPTION,
)

CANONICAL_HEADERS: dict[SegmentTag, str] = {
    SegmentTag.TASK: "Tasks",
    SegmentTag.HINT: "Hints",
    SegmentTag.EXPLANATION: "Explanations",
    SegmentTag.ANALOGY: "Analogies",
    SegmentTag.SOLUTION: "Solutions",
    SegmentTag.MOTIVATION: "Motivation",
    SegmentTag.MISCONCEPTION: "Misconceptions",
}

# Header names accepted case-insensitively. German aliases are configurable
# authoring conveniences, not a fixed schema.
DEFAULT_HEADER_ALIASES: dict[str, SegmentTag] = {
    "task": SegmentTag.TASK,
    "tasks": SegmentTag.TASK,
    "aufgaben": SegmentTag.TASK,
    "fragen": SegmentTag.TASK,
    "hint": SegmentTag.HINT,
    "hints": SegmentTag.HINT,
    "hinweise": SegmentTag.HINT,
    "tipps": SegmentTag.HINT,
    "explanation": SegmentTag.EXPLANATION,
    "explanations": SegmentTag.EXPLANATION,
    "erklärungen": SegmentTag.EXPLANATION,
    "erklaerungen": SegmentTag.EXPLANATION,
    "analogy": SegmentTag.ANALOGY,
    "analogies": SegmentTag.ANALOGY,
    "analogien": SegmentTag.ANALOGY,
    "solution": SegmentTag.SOLUTION,
    "solutions": SegmentTag.SOLUTION,
    "antworten": SegmentTag.SOLUTION,
    "lösungen": SegmentTag.SOLUTION,
    "loesungen": SegmentTag.SOLUTION,
    "motivation": SegmentTag.MOTIVATION,
    "misconception": SegmentTag.MISCONCEPTION,
    "misconceptions": SegmentTag.MISCONCEPTION,
    "missverständnisse": SegmentTag.MISCONCEPTION,
    "missverstaendnisse": SegmentTag.MISCONCEPTION,
}

# Withholding marker appended to a Solutions header, both attested spellings.
_MARKER_RE = re.compile(
    r"\s*\(\s*(?:do not show|nicht herausgeben!?)\s*\)\s*$", re.IGNORECASE
)
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop tokens shorter than 2 chars."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


class Severity(Enum):
    ERROR = "Error"
    WARNING = "Warning"


@dataclass(frozen=True)
class LintFinding:
    severity: Severity
    code: str
    message: str
    line: int


@dataclass(frozen=True)
class LintReport:
    """Schema findings for one module source. Zero Errors <=> loadable."""

    module_id: str
    findings: tuple[LintFinding, ...]

    @property
    def errors(self) -> tuple[LintFinding, ...]:
        return tuple(f for f in self.findings if f.severity is Severity.ERROR)

    @property
    def warnings(self) -> tuple[LintFinding, ...]:
        return tuple(f for f in self.findings if f.severity is Severity.WARNING)

    @property
    def ok(self) -> bool:
        return not self.errors


class ParseError(Exception):
    """Raised when module source violates the knowledge-base schema."""

    def __init__(
        self,
        code: str,
        message: str,
        filename: str = "",
        line: int = 0,
        errors: list["ParseError"] | None = None,
    ):
        super().__init__(message)
        self.code = code
        self.message = message
        self.filename = filename
        self.line = line
        self.errors = errors or []

    def __str__(self) -> str:
        where = f"{self.filename}:{self.line}: " if self.filename else ""
        return f"{where}{self.code}: {self.message}"


@dataclass(frozen=True)
class Segment:
    """One instructional unit: a single list item or paragraph of a section."""

    module_id: str
    tag: SegmentTag
    ordinal: int
    text: str
    do_not_show: bool = False

    @property
    def key(self) -> tuple[str, str, int]:
        """(module_id, tag value, ordinal) — unique across a knowledge base."""
        return (self.module_id, self.tag.value, self.ordinal)


@dataclass(frozen=True)
class ModuleDoc:
    """A parsed course module: title plus tag-keyed segment sections."""

    id: str
    title: str
    topic: str | None
    sections: dict[SegmentTag, tuple[Segment, ...]]

    def segments(self, tag: SegmentTag) -> tuple[Segment, ...]:
        return self.sections.get(tag, ())

    def all_segments(self) -> list[Segment]:
        out: list[Segment] = []
        for tag in TAG_ORDER:
            out.extend(self.sections.get(tag, ()))
        return out


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable module collection plus vocabulary over non-solution text."""

    modules: dict[str, ModuleDoc]
    vocabulary: frozenset[str]

    def module_ids(self) -> list[str]:
        return sorted(self.modules)

    def all_segments(self) -> list[Segment]:
        out: list[Segment] = []
        for module_id in sorted(self.modules):
            out.extend(self.modules[module_id].all_segments())
        return out

    def solution_texts(self) -> frozenset[str]:
        return frozenset(
            seg.text
            for seg in self.all_segments()
            if seg.tag is SegmentTag.SOLUTION
        )


def slug_from_filename(filename: str) -> str:
    stem = Path(filename).stem
    slug = re.sub(r"[^a-z0-9]+", "-", stem.lower()).strip("-")
    return slug or "module"


@dataclass
class _Section:
    tag: SegmentTag | None
    header: str
    line: int
    body: list[tuple[int, str]] = field(default_factory=list)


@dataclass
class _Scan:
    front_matter: dict[str, str]
    title: str | None
    sections: list[_Section]
    findings: list[LintFinding]


def _scan(source_text: str, aliases: Mapping[str, SegmentTag]) -> _Scan:
    """Single-pass line scanner shared by the parser and the linter."""
    findings: list[LintFinding] = []
    front_matter: dict[str, str] = {}
    title: str | None = None
    sections: list[_Section] = []

    text = source_text.replace("\r\n", "\n").replace("\r", "\n")
    if not text.strip():
        findings.append(
            LintFinding(Severity.ERROR, "EmptyFile", "module file is empty", 1)
        )
        return _Scan(front_matter, title, sections, findings)

    lines = text.split("\n")
    i = 0
    if lines and lines[0].strip() == "---":
        i = 1
        while i < len(lines) and lines[i].strip() != "---":
            raw = lines[i].strip()
            if raw and ":" in raw:
                key, _, value = raw.partition(":")
                front_matter[key.strip().lower()] = value.strip()
            i += 1
        if i >= len(lines):
            findings.append(
                LintFinding(
                    Severity.ERROR,
                    "UnterminatedFrontMatter",
                    "front-matter block has no closing ---",
                    1,
                )
            )
            return _Scan(front_matter, title, sections, findings)
        i += 1

    current: _Section | None = None
    for lineno0 in range(i, len(lines)):
        line = lines[lineno0]
        lineno = lineno0 + 1
        stripped = line.strip()
        if not stripped:
            if current is not None:
                current.body.append((lineno, ""))
            continue
        if stripped.startswith("## "):
            header = stripped[3:].strip()
            marker = bool(_MARKER_RE.search(header))
            name = _MARKER_RE.sub("", header).strip()
            tag = aliases.get(name.lower())
            if tag is None:
                findings.append(
                    LintFinding(
                        Severity.ERROR,
                        "UnknownHeader",
                        f"unknown section header '{name}'",
                        lineno,
                    )
                )
            elif tag is SegmentTag.SOLUTION and not marker:
                findings.append(
                    LintFinding(
                        Severity.ERROR,
                        "UnmarkedSolutions",
                        "Solutions section lacks the do-not-show marker",
                        lineno,
                    )
                )
            elif tag is not SegmentTag.SOLUTION and marker:
                findings.append(
                    LintFinding(
                        Severity.WARNING,
                        "MarkerOnNonSolution",
                        f"do-not-show marker on '{name}' has no effect",
                        lineno,
                    )
                )
            if tag is not None and any(s.tag is tag for s in sections):
                findings.append(
                    LintFinding(
                        Severity.WARNING,
                        "DuplicateSection",
                        f"section '{name}' appears more than once",
                        lineno,
                    )
                )
            current = _Section(tag=tag, header=name, line=lineno)
            sections.append(current)
            continue
        if stripped.startswith("# "):
            if title is None:
                title = stripped[2:].strip()
                if current is None and sections:
                    # Title after sections started: structure is off.
                    findings.append(
                        LintFinding(
                            Severity.WARNING,
                            "LateTitle",
                            "first-level title appears after a section",
                            lineno,
                        )
                    )
                continue
            findings.append(
                LintFinding(
                    Severity.WARNING,
                    "ExtraTitle",
                    "additional first-level header ignored",
                    lineno,
                )
            )
            continue
        if current is None:
            if title is None:
                findings.append(
                    LintFinding(
                        Severity.ERROR,
                        "MissingTitle",
                        "module must start with a '# Title' line",
                        lineno,
                    )
                )
                return _Scan(front_matter, title, sections, findings)
            findings.append(
                LintFinding(
                    Severity.WARNING,
                    "ContentOutsideSection",
                    "content before the first section is ignored",
                    lineno,
                )
            )
            continue
        current.body.append((lineno, line.rstrip()))

    if title is None:
        findings.append(
            LintFinding(
                Severity.ERROR,
                "MissingTitle",
                "module must start with a '# Title' line",
                1,
            )
        )

    for section in sections:
        if section.tag is None:
            continue
        if not _split_section_body(section.body):
            findings.append(
                LintFinding(
                    Severity.ERROR,
                    "EmptySection",
                    f"section '{section.header}' has no content",
                    section.line,
                )
            )

    return _Scan(front_matter, title, sections, findings)


def _split_section_body(body: list[tuple[int, str]]) -> list[str]:
    """Split a section body into segment texts.

    If the section contains top-level `- ` list items, each item is one
    segment (indented continuation lines join it). Otherwise blank-line
    separated paragraphs are used. Line breaks inside a segment collapse
    to single spaces.
    """
    has_items = any(line.lstrip().startswith("- ") for _, line in body)
    texts: list[str] = []
    buf: list[str] = []

    def flush() -> None:
        if buf:
            texts.append(" ".join(part.strip() for part in buf).strip())
            buf.clear()

    if has_items:
        for _, line in body:
            stripped = line.strip()
            if not stripped:
                continue
            if line.lstrip().startswith("- "):
                flush()
                buf.append(stripped[2:])
            elif buf:
                buf.append(stripped)
            # Text before the first item in a list section is dropped.
        flush()
    else:
        for _, line in body:
            if not line.strip():
                flush()
            else:
                buf.append(line)
        flush()
    return [t for t in texts if t]


def parse_module(
    source_text: str,
    filename: str,
    aliases: Mapping[str, SegmentTag] | None = None,
) -> ModuleDoc:
    """Parse one Markdown module or raise ParseError on schema violations."""
    aliases = aliases if aliases is not None else DEFAULT_HEADER_ALIASES
    scan = _scan(source_text, aliases)
    errors = [f for f in scan.findings if f.severity is Severity.ERROR]
    if errors:
        first = errors[0]
        raise ParseError(first.code, first.message, filename, first.line)

    module_id = scan.front_matter.get("id") or slug_from_filename(filename)
    topic = scan.front_matter.get("topic")
    counters: dict[SegmentTag, int] = {}
    sections: dict[SegmentTag, list[Segment]] = {}
    for section in scan.sections:
        tag = section.tag
        assert tag is not None  # unknown headers already raised
        for text in _split_section_body(section.body):
            ordinal = counters.get(tag, 0)
            counters[tag] = ordinal + 1
            sections.setdefault(tag, []).append(
                Segment(
                    module_id=module_id,
                    tag=tag,
                    ordinal=ordinal,
                    text=text,
                    do_not_show=tag is SegmentTag.SOLUTION,
                )
            )
    return ModuleDoc(
        id=module_id,
        title=scan.title or "",
        topic=topic,
        sections={tag: tuple(segs) for tag, segs in sections.items()},
    )


def lint_module(
    doc_source: str,
    filename: str,
    aliases: Mapping[str, SegmentTag] | None = None,
) -> LintReport:
    """Report schema findings without raising; malformed input yields Errors."""
    aliases = aliases if aliases is not None else DEFAULT_HEADER_ALIASES
    scan = _scan(doc_source, aliases)
    findings = list(scan.findings)
    module_id = scan.front_matter.get("id") or slug_from_filename(filename)

    present = {s.tag for s in scan.sections if s.tag is not None}
    if not [f for f in findings if f.code == "EmptyFile"]:
        if SegmentTag.HINT not in present:
            findings.append(
                LintFinding(
                    Severity.WARNING, "NoHints", "module has no Hints section", 1
                )
            )
        if SegmentTag.MOTIVATION not in present:
            findings.append(
                LintFinding(
                    Severity.WARNING,
                    "NoMotivation",
                    "module has no Motivation section",
                    1,
                )
            )

    # Ordinal contiguity of the hint ladder; defensive, the parser assigns
    # sequential ordinals so a gap indicates internal inconsistency.
    if not any(f.severity is Severity.ERROR for f in findings):
        try:
            doc = parse_module(doc_source, filename, aliases)
        except ParseError:  # pragma: no cover - scan already caught errors
            doc = None
        if doc is not None:
            ladder = [seg.ordinal for seg in doc.segments(SegmentTag.HINT)]
            if ladder != list(range(len(ladder))):
                findings.append(
                    LintFinding(
                        Severity.WARNING,
                        "HintLadderGap",
                        "hint ordinals are not contiguous from 0",
                        1,
                    )
                )
    return LintReport(module_id=module_id, findings=tuple(findings))


def serialize_module(module: ModuleDoc) -> str:
    """Emit canonical Markdown: front-matter, title, sections in fixed order."""
    lines: list[str] = ["---", f"id: {module.id}"]
    if module.topic is not None:
        lines.append(f"topic: {module.topic}")
    lines.extend(["---", "", f"# {module.title}"])
    for tag in TAG_ORDER:
        segs = module.sections.get(tag)
        if not segs:
            continue
        header = CANONICAL_HEADERS[tag]
        if tag is SegmentTag.SOLUTION:
            header += " (do not show)"
        lines.extend(["", f"## {header}", ""])
        lines.extend(f"- {seg.text}" for seg in segs)
    return "\n".join(lines) + "\n"


def hint_ladder(module: ModuleDoc) -> list[Segment]:
    """Hint segments sorted by ordinal; empty when the module has no hints."""
    return sorted(module.segments(SegmentTag.HINT), key=lambda s: s.ordinal)


def parse_knowledge_base(
    directory_listing: Iterable[tuple[str, str]],
    aliases: Mapping[str, SegmentTag] | None = None,
) -> KnowledgeBase:
    """Parse a (filename, source) listing into an immutable knowledge base.

    Files load in lexicographic filename order so repeated loads are
    deterministic. Per-file failures are aggregated; duplicate module ids
    are an error.
    """
    entries = sorted(
        ((name, text) for name, text in directory_listing if name.endswith(".md")),
        key=lambda pair: pair[0],
    )
    if not entries:
        raise ParseError("NoModules", "no .md files in knowledge base listing")

    modules: dict[str, ModuleDoc] = {}
    first_file: dict[str, str] = {}
    errors: list[ParseError] = []
    for filename, text in entries:
        try:
            doc = parse_module(text, filename, aliases)
        except ParseError as exc:
            errors.append(exc)
            continue
        if doc.id in modules:
            raise ParseError(
                "DuplicateId",
                f"module id '{doc.id}' defined in both "
                f"{first_file[doc.id]} and {filename}",
                filename,
            )
        modules[doc.id] = doc
        first_file[doc.id] = filename

    if errors:
        if len(errors) == 1:
            raise errors[0]
        summary = "; ".join(str(e) for e in errors)
        raise ParseError("ParseFailures", summary, errors=errors)

    vocabulary: set[str] = set()
    for doc in modules.values():
        for seg in doc.all_segments():
            if seg.tag is not SegmentTag.SOLUTION:
                vocabulary.update(tokenize(seg.text))
    return KnowledgeBase(modules=modules, vocabulary=frozenset(vocabulary))


def load_knowledge_base(
    kb_dir: str | Path,
    aliases: Mapping[str, SegmentTag] | None = None,
) -> KnowledgeBase:
    """Load every .md file under a directory into a knowledge base."""
    root = Path(kb_dir)
    listing = [
        (path.name, path.read_text(encoding="utf-8"))
        for path in sorted(root.glob("*.md"))
    ]
    return parse_knowledge_base(listing, aliases)


def lint_directory(
    kb_dir: str | Path,
    aliases: Mapping[str, SegmentTag] | None = None,
) -> list[tuple[str, LintReport]]:
    """Lint every .md file under a directory; returns (filename, report) pairs."""
    root = Path(kb_dir)
    return [
        (path.name, lint_module(path.read_text(encoding="utf-8"), path.name, aliases))
        for path in sorted(root.glob("*.md"))
    ]
