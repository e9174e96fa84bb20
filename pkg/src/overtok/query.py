"""Probe-passage queries: per-position match lengths and longest overlaps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .cdawg import CdawgIndex, factor_count
from .errors import ConfigurationError
from .ingest import TokenSequence


@dataclass
class OverlapResult:
    """Audit result of one passage against one index (or merged indexes).

    ``lengths[i]`` is the length of the longest suffix of the passage
    prefix ending at position ``i`` that occurs in the corpus. All
    distinct token subsequences achieving the global maximum are listed
    in ``overlap_tokens`` in order of first achievement; ``frequencies``
    aligns with them and ``max_frequency`` is the highest (None when the
    index carries no counts).
    """

    passage_id: int | str
    passage_len: int
    lengths: list[int]
    max_len: int
    max_end_positions: list[int]
    overlap_tokens: list[tuple[int, ...]]
    frequencies: list[int] | None
    max_frequency: int | None


def _passage_tokens(passage) -> tuple[int | str, list[int]]:
    if isinstance(passage, TokenSequence):
        return passage.doc_id, [int(t) for t in passage.tokens]
    return 0, [int(t) for t in passage]


def matching_lengths(index: CdawgIndex, passage) -> list[int]:
    """Longest-occurring-suffix length at every token position of the passage."""
    _, toks = _passage_tokens(passage)
    out = []
    state, edge, offset, length = 0, -1, 0, 0
    advance = index._advance
    for t in toks:
        state, edge, offset, length = advance(state, edge, offset, length, t)
        out.append(length)
    return out


def longest_overlap(index: CdawgIndex, passage) -> OverlapResult:
    """Globally longest overlapping token sequence(s), with frequencies.

    When several distinct sequences attain the maximal length, all are
    reported and the single surfaced ``max_frequency`` is the highest
    among them. Frequencies require annotated counts and are None
    otherwise.
    """
    passage_id, toks = _passage_tokens(passage)
    lengths = matching_lengths(index, toks)
    max_len = max(lengths, default=0)
    if max_len == 0:
        return OverlapResult(
            passage_id=passage_id,
            passage_len=len(toks),
            lengths=lengths,
            max_len=0,
            max_end_positions=[],
            overlap_tokens=[],
            frequencies=[] if index.has_counts else None,
            max_frequency=None,
        )
    ends = [i for i, l in enumerate(lengths) if l == max_len]
    seen: dict[tuple[int, ...], None] = {}
    for i in ends:
        seen.setdefault(tuple(toks[i - max_len + 1 : i + 1]))
    overlaps = list(seen)
    if index.has_counts:
        freqs = [factor_count(index, list(seq)) for seq in overlaps]
        max_freq = max(freqs)
    else:
        freqs = None
        max_freq = None
    return OverlapResult(
        passage_id=passage_id,
        passage_len=len(toks),
        lengths=lengths,
        max_len=max_len,
        max_end_positions=ends,
        overlap_tokens=overlaps,
        frequencies=freqs,
        max_frequency=max_freq,
    )


def merge_overlaps(results: Sequence[OverlapResult]) -> OverlapResult:
    """Combine per-chunk results for one passage into a whole-corpus view.

    Per-position lengths are element-wise maxima; frequencies of identical
    maximal sequences are summed across chunks before tie-breaking, which
    is exact when chunks partition the corpus at document boundaries.
    """
    if not results:
        raise ValueError("merge_overlaps needs at least one result")
    first = results[0]
    for r in results[1:]:
        if r.passage_id != first.passage_id or r.passage_len != first.passage_len:
            raise ConfigurationError(
                "cannot merge results for different passages: %r/%d vs %r/%d"
                % (first.passage_id, first.passage_len, r.passage_id, r.passage_len)
            )
    lengths = [max(vals) for vals in zip(*(r.lengths for r in results))]
    max_len = max(lengths, default=0)
    ends = [i for i, l in enumerate(lengths) if l == max_len] if max_len else []
    have_counts = all(r.frequencies is not None for r in results)
    merged: dict[tuple[int, ...], int] = {}
    for r in results:
        if r.max_len != max_len or max_len == 0:
            continue
        for j, seq in enumerate(r.overlap_tokens):
            add = r.frequencies[j] if have_counts else 0
            merged[seq] = merged.get(seq, 0) + add
    overlaps = list(merged)
    if max_len == 0:
        freqs: list[int] | None = [] if have_counts else None
        max_freq = None
    elif have_counts:
        freqs = [merged[s] for s in overlaps]
        max_freq = max(freqs) if freqs else None
    else:
        freqs = None
        max_freq = None
    return OverlapResult(
        passage_id=first.passage_id,
        passage_len=first.passage_len,
        lengths=lengths,
        max_len=max_len,
        max_end_positions=ends,
        overlap_tokens=overlaps,
        frequencies=freqs,
        max_frequency=max_freq,
    )
