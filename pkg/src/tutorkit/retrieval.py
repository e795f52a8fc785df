"""Deterministic tag-filtered lexical retrieval over knowledge-base segments.

A small in-memory inverted index scored with BM25. Solution-tagged segments
live in a gated partition that no query touches unless the caller explicitly
opts in, so withheld content can never surface through search.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

from .kb import TAG_ORDER, KnowledgeBase, Segment, SegmentTag, tokenize

__all__ = [
    "DEFAULT_B",
    "DEFAULT_K1",
    "ScoredSegment",
    "SegmentIndex",
    "SolutionAccessError",
    "build_index",
    "relevance_score",
    "search",
    "tokenize",
]

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

SegmentKey = tuple[str, str, int]  # (module_id, tag value, ordinal)

_TAG_RANK = {tag: rank for rank, tag in enumerate(TAG_ORDER)}


class SolutionAccessError(Exception):
    """Raised when a query asks for the solution partition without capability."""


@dataclass
class _Partition:
    postings: dict[str, list[tuple[SegmentKey, int]]] = field(default_factory=dict)
    doc_lengths: dict[SegmentKey, int] = field(default_factory=dict)
    avg_doc_length: float = 0.0

    def add(self, key: SegmentKey, tokens: list[str]) -> None:
        self.doc_lengths[key] = len(tokens)
        for token, freq in sorted(Counter(tokens).items()):
            self.postings.setdefault(token, []).append((key, freq))

    def finalize(self) -> None:
        if self.doc_lengths:
            self.avg_doc_length = sum(self.doc_lengths.values()) / len(
                self.doc_lengths
            )

    def score(self, key: SegmentKey, query_tokens: Counter, k1: float, b: float) -> float:
        """Okapi BM25 over this partition's statistics."""
        n_docs = len(self.doc_lengths)
        doc_len = self.doc_lengths[key]
        score = 0.0
        for token, qtf in query_tokens.items():
            rows = self.postings.get(token, [])
            tf = next((f for k, f in rows if k == key), 0)
            if tf == 0:
                continue
            df = len(rows)
            idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
            denom = tf + k1 * (1.0 - b + b * doc_len / self.avg_doc_length)
            score += qtf * idf * tf * (k1 + 1.0) / denom
        return score


@dataclass
class SegmentIndex:
    """Immutable inverted index over a knowledge base.

    Non-solution segments form the open partition; Solution segments are
    indexed separately with their own statistics, so solution term
    frequencies never influence open-partition rankings.
    """

    postings: dict[str, list[tuple[SegmentKey, int]]]
    doc_lengths: dict[SegmentKey, int]
    avg_doc_length: float
    segment_count: int
    tag_of: dict[SegmentKey, SegmentTag]
    segments: dict[SegmentKey, Segment]
    vocabulary: frozenset[str]
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    _open: _Partition = field(default_factory=_Partition, repr=False)
    _gated: _Partition = field(default_factory=_Partition, repr=False)

    def score_one(self, key: SegmentKey, query_tokens: Counter) -> float:
        part = (
            self._gated if self.tag_of[key] is SegmentTag.SOLUTION else self._open
        )
        return part.score(key, query_tokens, self.k1, self.b)

    def to_json_dict(self) -> dict:
        """Open-partition dump for the `kb index` CLI; solution tokens stay out."""
        return {
            "postings": {
                token: [["/".join(map(str, key)), tf] for key, tf in rows]
                for token, rows in sorted(self.postings.items())
            },
            "doc_lengths": {
                "/".join(map(str, key)): length
                for key, length in sorted(self.doc_lengths.items())
            },
            "params": {
                "k1": self.k1,
                "b": self.b,
                "avg_doc_length": self.avg_doc_length,
                "segment_count": self.segment_count,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class ScoredSegment:
    segment: Segment
    score: float


def build_index(
    kb: KnowledgeBase, k1: float = DEFAULT_K1, b: float = DEFAULT_B
) -> SegmentIndex:
    """Index every segment; rebuilding from the same KB is byte-identical."""
    open_part = _Partition()
    gated_part = _Partition()
    tag_of: dict[SegmentKey, SegmentTag] = {}
    segments: dict[SegmentKey, Segment] = {}
    for module_id in sorted(kb.modules):
        for seg in kb.modules[module_id].all_segments():
            tokens = tokenize(seg.text)
            tag_of[seg.key] = seg.tag
            segments[seg.key] = seg
            if seg.tag is SegmentTag.SOLUTION:
                gated_part.add(seg.key, tokens)
            else:
                open_part.add(seg.key, tokens)
    open_part.finalize()
    gated_part.finalize()
    return SegmentIndex(
        postings=open_part.postings,
        doc_lengths=open_part.doc_lengths,
        avg_doc_length=open_part.avg_doc_length,
        segment_count=len(open_part.doc_lengths),
        tag_of=tag_of,
        segments=segments,
        vocabulary=kb.vocabulary,
        k1=k1,
        b=b,
        _open=open_part,
        _gated=gated_part,
    )


def search(
    index: SegmentIndex,
    query: str,
    tag_filter: set[SegmentTag],
    k: int,
    include_solutions: bool = False,
) -> list[ScoredSegment]:
    """Top-k BM25 matches restricted to the given tags.

    Ties break by (module_id, ordinal, tag order); zero-score candidates are
    omitted. Asking for Solution-tagged results without `include_solutions`
    raises SolutionAccessError.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if SegmentTag.SOLUTION in tag_filter and not include_solutions:
        raise SolutionAccessError(
            "solution-tagged search requires the include-solutions capability"
        )
    query_tokens = Counter(tokenize(query))
    if not query_tokens:
        return []
    hits: list[ScoredSegment] = []
    for key, tag in index.tag_of.items():
        if tag not in tag_filter:
            continue
        if tag is SegmentTag.SOLUTION and not include_solutions:
            continue  # unreachable given the filter check; defense in depth
        score = index.score_one(key, query_tokens)
        if score > 0.0:
            hits.append(ScoredSegment(segment=index.segments[key], score=score))
    hits.sort(
        key=lambda h: (
            -h.score,
            h.segment.module_id,
            h.segment.ordinal,
            _TAG_RANK[h.segment.tag],
        )
    )
    return hits[:k]


def relevance_score(index: SegmentIndex, query: str) -> float:
    """Fraction of query tokens found in the knowledge-base vocabulary."""
    tokens = tokenize(query)
    if not tokens:
        return 0.0
    return sum(1 for t in tokens if t in index.vocabulary) / len(tokens)
