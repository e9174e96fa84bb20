"""Selection of training-data chunks that overlap minimally with probes.

Chunks are scanned independently: a throwaway index is built per chunk,
queried with every probe passage, and dropped, so peak memory is bounded
by the largest chunk. A chunk is eligible when its maximal overlap with
any passage is at most the threshold (inclusive).
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import cdawg
from .errors import ConfigurationError, FormatError
from .ingest import TokenSequence, iter_pretokenized
from .query import matching_lengths

_MANIFEST_FIELDS = ("chunk_id", "paths", "num_tokens", "max_overlap", "eligible")


@dataclass
class ChunkManifest:
    """Scan state of one training-data chunk."""

    chunk_id: str
    paths: list[str]
    num_tokens: int = 0
    max_overlap: int | None = None
    eligible: bool | None = None


def chunk_max_overlap(chunk: Sequence, passages: Sequence) -> int:
    """Longest overlap between any passage and a chunk's documents.

    Builds a per-chunk index without counts (only lengths are needed) and
    discards it afterward.
    """
    if not passages:
        raise ConfigurationError(
            "refusing to scan a chunk against zero passages; pass the probe set"
        )
    index = cdawg.build(chunk, with_counts=False)
    best = 0
    for passage in passages:
        lengths = matching_lengths(index, passage)
        if lengths:
            best = max(best, max(lengths))
    return best


def filter_chunks(
    manifests: Sequence[ChunkManifest], threshold: int
) -> list[ChunkManifest]:
    """Set eligibility flags: eligible iff max_overlap <= threshold.

    Input order is preserved; every manifest must have been scanned.
    """
    out = []
    for m in manifests:
        if m.max_overlap is None:
            raise ConfigurationError(
                "chunk %r has not been scanned; run the overlap scan first" % m.chunk_id
            )
        out.append(
            ChunkManifest(
                chunk_id=m.chunk_id,
                paths=list(m.paths),
                num_tokens=m.num_tokens,
                max_overlap=m.max_overlap,
                eligible=m.max_overlap <= threshold,
            )
        )
    return out


def sample_chunks(
    eligible: Sequence[ChunkManifest], k: int, seed: int
) -> list[str]:
    """Uniform sample of k eligible chunk ids, without replacement.

    Draws a partial Fisher-Yates shuffle from a PCG64 stream seeded with
    ``seed``, so the same seed yields the same sample on any platform.
    Output is sorted by chunk id.
    """
    pool = [m for m in eligible if m.eligible]
    n = len(pool)
    if k > n:
        raise ConfigurationError(
            "cannot sample %d chunks from %d eligible" % (k, n)
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = list(range(n))
    for i in range(k):
        j = int(rng.integers(i, n))
        idx[i], idx[j] = idx[j], idx[i]
    return sorted(pool[t].chunk_id for t in idx[:k])


def _scan_one(args) -> tuple[str, int, int]:
    manifest_paths, passages = args
    chunk: list[TokenSequence] = []
    for path in manifest_paths:
        chunk.extend(iter_pretokenized(path, first_doc_id=len(chunk)))
    num_tokens = sum(len(seq) for seq in chunk)
    overlap = chunk_max_overlap(chunk, passages)
    return "", num_tokens, overlap


def scan_manifests(
    manifests: Sequence[ChunkManifest],
    passages: Sequence,
    workers: int = 1,
) -> list[ChunkManifest]:
    """Fill in num_tokens and max_overlap for every manifest.

    Each worker owns its chunk index exclusively; passages are shared
    read-only. Results keep the input order.
    """
    if not passages:
        raise ConfigurationError(
            "refusing to scan chunks against zero passages; pass the probe set"
        )
    plain_passages = [
        list(p.tokens) if isinstance(p, TokenSequence) else list(p) for p in passages
    ]
    jobs = [(list(m.paths), plain_passages) for m in manifests]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_one, jobs))
    else:
        results = [_scan_one(job) for job in jobs]
    out = []
    for m, (_, num_tokens, overlap) in zip(manifests, results):
        out.append(
            ChunkManifest(
                chunk_id=m.chunk_id,
                paths=list(m.paths),
                num_tokens=num_tokens,
                max_overlap=overlap,
                eligible=m.eligible,
            )
        )
    return out


def write_manifest(manifests: Iterable[ChunkManifest], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for m in manifests:
            record = {k: getattr(m, k) for k in _MANIFEST_FIELDS}
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_manifest(path: str) -> list[ChunkManifest]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError("%s:%d: invalid JSON: %s" % (path, lineno, exc)) from exc
            if "chunk_id" not in obj or "paths" not in obj:
                raise FormatError(
                    "%s:%d: manifest record needs chunk_id and paths" % (path, lineno)
                )
            out.append(
                ChunkManifest(
                    chunk_id=str(obj["chunk_id"]),
                    paths=list(obj["paths"]),
                    num_tokens=int(obj.get("num_tokens", 0) or 0),
                    max_overlap=obj.get("max_overlap"),
                    eligible=obj.get("eligible"),
                )
            )
    return out
