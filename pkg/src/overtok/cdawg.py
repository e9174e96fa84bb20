"""Compacted DAWG factor index over multi-document token corpora.

The index accepts exactly the set of factors (contiguous token
subsequences) of the indexed documents, never crossing document
boundaries. It is built online as a generalized suffix automaton, one
state per right-extension class, then compacted: every state that is
non-branching and never occurs at a document end is folded into its
incoming edges, whose labels become spans into the retained token store.

Occurrence counts are aggregated after construction in reverse
topological order: a state's count is the number of positions at which
its factors end, which equals the sum of its edge targets' counts plus
the number of documents it terminates. Compaction preserves per-factor
counts because a folded state, having no document-end occurrence and a
single right extension, necessarily shares its count with its unique
successor; a factor that lands mid-edge therefore has the count of the
edge's target.
"""

from __future__ import annotations

import hashlib
import os
import struct
from array import array
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CountsUnavailableError, FormatError, IndexLoadError
from .ingest import TokenSequence

INDEX_MAGIC = b"CDWG"
INDEX_VERSION = 1
_FLAG_COUNTS = 1
_FLAG_MMAP = 2
_HEADER = struct.Struct("<4sIIII4Q")  # magic, version, flags, width, vocab, docs, tokens, states, edges

_MAX_SOURCE_LEN = (1 << 31) - 1  # int32 construction arrays


@dataclass(frozen=True)
class MatchCursor:
    """Incremental traversal state for streaming suffix-match queries.

    ``length`` is always the length of the longest suffix of the consumed
    query prefix that is a factor of the corpus. ``edge`` is -1 when the
    cursor sits exactly on a state, else ``offset`` tokens have been
    consumed within that edge's label.
    """

    state: int = 0
    edge: int = -1
    offset: int = 0
    length: int = 0


class CdawgIndex:
    """Immutable compacted factor index; query via module-level functions."""

    def __init__(
        self,
        tokens,
        doc_offsets,
        state_len,
        state_link,
        end_count,
        edge_offsets,
        edge_first,
        edge_target,
        edge_start,
        edge_len,
        vocab_size: int,
        counts=None,
        mmap_layout: bool = False,
    ):
        self._tok = tokens
        self._doc_off = doc_offsets
        self._slen = state_len
        self._slink = state_link
        self._endc = end_count
        self._eo = edge_offsets
        self._ef = edge_first
        self._et = edge_target
        self._es = edge_start
        self._el = edge_len
        self.vocab_size = int(vocab_size)
        self._counts = counts
        self.mmap_layout = bool(mmap_layout)

    @property
    def num_docs(self) -> int:
        return len(self._doc_off) - 1

    @property
    def source_len(self) -> int:
        return len(self._tok)

    @property
    def num_states(self) -> int:
        return len(self._slen)

    @property
    def num_edges(self) -> int:
        return len(self._ef)

    @property
    def has_counts(self) -> bool:
        return self._counts is not None

    def find_edge(self, state: int, token: int) -> int:
        """Index of the edge from ``state`` whose label starts with ``token``, or -1."""
        lo = int(self._eo[state])
        hi = int(self._eo[state + 1])
        i = bisect_left(self._ef, token, lo, hi)
        if i < hi and self._ef[i] == token:
            return i
        return -1

    def edge_span(self, edge: int) -> tuple[int, int, int]:
        """Resolve an edge label to (doc_id, start, end) within that document."""
        start = int(self._es[edge])
        end = start + int(self._el[edge])
        doc = int(np.searchsorted(np.asarray(self._doc_off), start, side="right")) - 1
        base = int(self._doc_off[doc])
        return doc, start - base, end - base

    def edge_tokens(self, edge: int) -> list[int]:
        start = int(self._es[edge])
        return [int(t) for t in self._tok[start : start + int(self._el[edge])]]

    def _descend(self, state: int, g_start: int, g_len: int) -> tuple[int, int, int]:
        # Skip/count re-descent of a known factor: only first tokens are
        # inspected because the walked string is a suffix of a match.
        tok = self._tok
        el = self._el
        et = self._et
        while g_len:
            e = self.find_edge(state, int(tok[g_start]))
            span = int(el[e])
            if span <= g_len:
                state = int(et[e])
                g_start += span
                g_len -= span
            else:
                return state, e, g_len
        return state, -1, 0

    def _advance(
        self, state: int, edge: int, offset: int, length: int, t: int
    ) -> tuple[int, int, int, int]:
        """Extend the match by one token, shortening via suffix links on failure."""
        tok = self._tok
        el = self._el
        et = self._et
        es = self._es
        slen = self._slen
        slink = self._slink
        while True:
            if offset:
                e = edge
                if int(tok[int(es[e]) + offset]) == t:
                    offset += 1
                    length += 1
                    if offset == int(el[e]):
                        return int(et[e]), -1, 0, length
                    return state, e, offset, length
            else:
                e = self.find_edge(state, t)
                if e >= 0:
                    length += 1
                    if int(el[e]) == 1:
                        return int(et[e]), -1, 0, length
                    return state, e, 1, length
            if length == 0:
                return 0, -1, 0, 0
            if offset:
                g_start = int(es[edge])
                g_len = offset
                if state == 0:
                    # Matched string lies entirely on a root edge: trim its
                    # first token and re-descend the remainder.
                    g_start += 1
                    g_len -= 1
                    length -= 1
                else:
                    state = int(slink[state])
                    length = int(slen[state]) + offset
                state, edge, offset = self._descend(state, g_start, g_len)
            else:
                state = int(slink[state])
                length = int(slen[state])
                edge = -1


def start_cursor(index: CdawgIndex) -> MatchCursor:
    return MatchCursor()


def step(index: CdawgIndex, cursor: MatchCursor, token: int) -> MatchCursor:
    """Consume one query token, returning the updated cursor.

    The new match length is the longest suffix of (consumed prefix +
    token) that is a factor; an unmatchable token resets to the root with
    length 0.
    """
    state, edge, offset, length = index._advance(
        cursor.state, cursor.edge, cursor.offset, cursor.length, int(token)
    )
    return MatchCursor(state, edge, offset, length)


def _coerce_docs(sequences: Iterable) -> list:
    docs = []
    for seq in sequences:
        toks = seq.tokens if isinstance(seq, TokenSequence) else seq
        docs.append(toks)
    return docs


def build(
    sequences: Iterable,
    with_counts: bool = False,
    vocab_size: int | None = None,
) -> CdawgIndex:
    """Build the index over token sequences (TokenSequence or plain lists).

    Construction is online and linear in the total token count; documents
    are inserted one at a time so factors never span documents. When
    ``with_counts`` is set, per-state occurrence counts are annotated.
    """
    docs = _coerce_docs(sequences)
    if not docs:
        raise ValueError("cannot build an index over an empty document list")
    total = 0
    max_tok = 0
    for i, doc in enumerate(docs):
        n = len(doc)
        if n == 0:
            raise ValueError("document %d is empty; drop empty sequences first" % i)
        total += n
        m = int(max(doc)) if not isinstance(doc, np.ndarray) else int(doc.max())
        lo = int(min(doc)) if not isinstance(doc, np.ndarray) else int(doc.min())
        if lo < 0:
            raise FormatError("document %d contains a negative token id" % i)
        max_tok = max(max_tok, m)
    if max_tok >= 1 << 32:
        raise FormatError("token id %d exceeds the 32-bit id range" % max_tok)
    if total > _MAX_SOURCE_LEN:
        raise FormatError(
            "corpus of %d tokens exceeds the %d-token build limit" % (total, _MAX_SOURCE_LEN)
        )
    if vocab_size is None:
        vocab_size = max_tok + 1
    elif max_tok >= vocab_size:
        raise FormatError(
            "token id %d >= declared vocab size %d" % (max_tok, vocab_size)
        )

    tok_store = np.empty(total, dtype=np.uint32)
    doc_offsets = np.empty(len(docs) + 1, dtype=np.int64)
    doc_offsets[0] = 0

    # Online construction: one right-extension class per state.
    trans: list[dict[int, int]] = [{}]
    link = array("i", [-1])
    length = array("i", [0])
    sample_end = array("i", [0])  # end-exclusive global position of one occurrence
    marks = array("i", [0])  # documents whose full string is this state's longest

    pos = 0
    for di, doc in enumerate(docs):
        toks = doc.tolist() if isinstance(doc, np.ndarray) else doc
        tok_store[pos : pos + len(toks)] = toks
        last = 0
        for c in toks:
            pos += 1
            tl = trans[last]
            if c in tl:
                p = last
                q = tl[c]
                if length[p] + 1 == length[q]:
                    last = q
                    continue
                # Split q so the current prefix gets a class of its exact length.
                nq = len(trans)
                trans.append(trans[q].copy())
                link.append(link[q])
                length.append(length[p] + 1)
                sample_end.append(sample_end[q])
                marks.append(0)
                link[q] = nq
                while p >= 0 and trans[p].get(c, -1) == q:
                    trans[p][c] = nq
                    p = link[p]
                last = nq
                continue
            cur = len(trans)
            trans.append({})
            link.append(-1)
            length.append(length[last] + 1)
            sample_end.append(pos)
            marks.append(0)
            p = last
            while p >= 0 and c not in trans[p]:
                trans[p][c] = cur
                p = link[p]
            if p == -1:
                link[cur] = 0
            else:
                q = trans[p][c]
                if length[p] + 1 == length[q]:
                    link[cur] = q
                else:
                    nq = len(trans)
                    trans.append(trans[q].copy())
                    link.append(link[q])
                    length.append(length[p] + 1)
                    sample_end.append(sample_end[q])
                    marks.append(0)
                    link[q] = nq
                    link[cur] = nq
                    while p >= 0 and trans[p].get(c, -1) == q:
                        trans[p][c] = nq
                        p = link[p]
            last = cur
        doc_offsets[di + 1] = pos
        # The document's full string is the longest member of ``last``; later
        # splits keep that membership, so one mark per document suffices.
        marks[last] += 1

    index = _compact(
        trans, link, length, sample_end, marks, tok_store, doc_offsets, vocab_size
    )
    if with_counts:
        annotate_counts(index)
    return index


def _compact(trans, link, length, sample_end, marks, tok_store, doc_offsets, vocab_size):
    n_states = len(trans)
    length_np = np.frombuffer(length, dtype=np.int32).astype(np.int64)
    link_np = np.frombuffer(link, dtype=np.int32).astype(np.int64)
    outdeg = np.fromiter((len(d) for d in trans), dtype=np.int64, count=n_states)
    order = np.argsort(length_np, kind="stable")[::-1]

    # A state ends a document iff any state in its suffix-link subtree holds
    # a full document; subtree-sum the marks in decreasing length order.
    end_np = np.frombuffer(marks, dtype=np.int32).astype(np.int64)
    link_list = link_np.tolist()
    for v in order.tolist():
        c = end_np[v]
        if c:
            p = link_list[v]
            if p >= 0:
                end_np[p] += c

    # Keep the root, branching states, and anything reaching a document end;
    # everything else has one forced continuation and folds into edge labels.
    kept = (outdeg != 1) | (end_np > 0)
    kept[0] = True
    new_id = np.cumsum(kept, dtype=np.int64) - 1

    tail_target = np.full(n_states, -1, dtype=np.int64)
    tail_len = np.zeros(n_states, dtype=np.int64)
    for v in order:
        v = int(v)
        if kept[v]:
            continue
        ((c, s),) = trans[v].items()
        if kept[s]:
            tail_target[v] = s
            tail_len[v] = 1
        else:
            tail_target[v] = tail_target[s]
            tail_len[v] = tail_len[s] + 1

    n_kept = int(kept.sum())
    state_len = array("q", bytes(8 * n_kept))
    state_link = array("q", bytes(8 * n_kept))
    kept_end = array("q", bytes(8 * n_kept))
    edge_offsets = array("q", bytes(8 * (n_kept + 1)))
    edge_first = array("I")
    edge_target = array("q")
    edge_start = array("q")
    edge_len = array("q")

    n_edges = 0
    for u in range(n_states):
        if not kept[u]:
            continue
        nu = int(new_id[u])
        state_len[nu] = int(length_np[u])
        lk = int(link_np[u])
        state_link[nu] = -1 if lk < 0 else int(new_id[lk])
        kept_end[nu] = int(end_np[u])
        edge_offsets[nu] = n_edges
        for c in sorted(trans[u]):
            v = trans[u][c]
            if kept[v]:
                tgt, span = v, 1
            else:
                tgt, span = int(tail_target[v]), int(tail_len[v]) + 1
            edge_first.append(c)
            edge_target.append(int(new_id[tgt]))
            edge_start.append(int(sample_end[tgt]) - span)
            edge_len.append(span)
            n_edges += 1
    edge_offsets[n_kept] = n_edges

    return CdawgIndex(
        tokens=tok_store,
        doc_offsets=doc_offsets,
        state_len=state_len,
        state_link=state_link,
        end_count=kept_end,
        edge_offsets=edge_offsets,
        edge_first=edge_first,
        edge_target=edge_target,
        edge_start=edge_start,
        edge_len=edge_len,
        vocab_size=vocab_size,
    )


def annotate_counts(index: CdawgIndex) -> CdawgIndex:
    """Attach per-state occurrence counts (idempotent; returns the index).

    Processes states in decreasing order of factor length, so every edge
    target is finished before its source: count = document terminations
    plus the counts of all right extensions. Overlapping occurrences and
    duplicated documents are all counted.
    """
    if index.has_counts:
        return index
    n = index.num_states
    counts = array("q", bytes(8 * n))
    slen = np.frombuffer(index._slen, dtype=np.int64) if isinstance(index._slen, array) else np.asarray(index._slen)
    order = np.argsort(slen, kind="stable")[::-1]
    eo = index._eo
    et = index._et
    endc = index._endc
    for v in order:
        v = int(v)
        total = int(endc[v])
        for e in range(int(eo[v]), int(eo[v + 1])):
            total += counts[int(et[e])]
        counts[v] = total
    index._counts = counts
    return index


def factor_count(index: CdawgIndex, tokens: Sequence[int]) -> int:
    """Occurrences of a token sequence, overlap allowed, summed over documents."""
    if not index.has_counts:
        raise CountsUnavailableError(
            "occurrence counts were not annotated on this index"
        )
    toks = list(tokens.tokens) if isinstance(tokens, TokenSequence) else list(tokens)
    if not toks:
        return index.source_len
    counts = index._counts
    tok = index._tok
    el = index._el
    es = index._es
    et = index._et
    state = 0
    i = 0
    n = len(toks)
    while i < n:
        e = index.find_edge(state, int(toks[i]))
        if e < 0:
            return 0
        span = int(el[e])
        k = min(span, n - i)
        s = int(es[e])
        for j in range(1, k):
            if int(tok[s + j]) != int(toks[i + j]):
                return 0
        i += k
        if k == span:
            state = int(et[e])
        else:
            return int(counts[int(et[e])])
    return int(counts[state])


def accepts(index: CdawgIndex, tokens: Sequence[int]) -> bool:
    """Whether a token sequence is a factor of the indexed corpus."""
    toks = list(tokens.tokens) if isinstance(tokens, TokenSequence) else list(tokens)
    state, edge, offset, length = 0, -1, 0, 0
    for t in toks:
        state, edge, offset, length = index._advance(state, edge, offset, length, int(t))
        if length <= 0:
            return False
    return length == len(toks)


def _as_le_bytes(arr, dtype) -> bytes:
    return np.ascontiguousarray(np.asarray(arr), dtype=dtype).tobytes()


def serialize(index: CdawgIndex, path: str) -> None:
    """Write the index in the versioned, checksummed binary format."""
    width = 2 if index.vocab_size <= (1 << 16) else 4
    flags = (_FLAG_COUNTS if index.has_counts else 0) | (
        _FLAG_MMAP if index.mmap_layout else 0
    )
    digest = hashlib.sha256()
    with open(path, "wb") as f:

        def put(data: bytes) -> None:
            digest.update(data)
            f.write(data)

        put(
            _HEADER.pack(
                INDEX_MAGIC,
                INDEX_VERSION,
                flags,
                width,
                index.vocab_size,
                index.num_docs,
                index.source_len,
                index.num_states,
                index.num_edges,
            )
        )
        put(_as_le_bytes(index._doc_off, "<i8"))
        put(_as_le_bytes(index._tok, "<u2" if width == 2 else "<u4"))
        put(_as_le_bytes(index._slen, "<i8"))
        put(_as_le_bytes(index._slink, "<i8"))
        put(_as_le_bytes(index._endc, "<i8"))
        if index.has_counts:
            put(_as_le_bytes(index._counts, "<i8"))
        put(_as_le_bytes(index._eo, "<i8"))
        put(_as_le_bytes(index._ef, "<u4"))
        put(_as_le_bytes(index._et, "<i8"))
        put(_as_le_bytes(index._es, "<i8"))
        put(_as_le_bytes(index._el, "<i8"))
        f.write(digest.digest()[:8])


def _expected_size(flags, width, num_docs, source_len, num_states, num_edges) -> int:
    size = _HEADER.size
    size += 8 * (num_docs + 1)
    size += width * source_len
    size += 8 * num_states * (4 if flags & _FLAG_COUNTS else 3)
    size += 8 * (num_states + 1)
    size += 4 * num_edges
    size += 8 * num_edges * 3
    size += 8  # checksum
    return size


def deserialize(path: str, mmap: bool | None = None) -> CdawgIndex:
    """Load an index; answers every query identically to the serialized one.

    ``mmap=True`` maps the arrays from disk instead of reading them into
    memory (the default follows the flag recorded at build time). The
    trailing checksum is verified in both modes.
    """
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise IndexLoadError("%s: truncated header" % path)
    magic, version, flags, width, vocab_size, num_docs, source_len, num_states, num_edges = _HEADER.unpack(head)
    if magic != INDEX_MAGIC:
        raise IndexLoadError("%s: bad magic %r, expected %r" % (path, magic, INDEX_MAGIC))
    if version != INDEX_VERSION:
        raise IndexLoadError(
            "%s: unsupported index version %d (reader supports %d)"
            % (path, version, INDEX_VERSION)
        )
    if width not in (2, 4):
        raise IndexLoadError("%s: invalid token width %d" % (path, width))
    actual = os.path.getsize(path)
    expected = _expected_size(flags, width, num_docs, source_len, num_states, num_edges)
    if actual != expected:
        raise IndexLoadError(
            "%s: file is %d bytes, expected %d (truncated or corrupt)"
            % (path, actual, expected)
        )
    if mmap is None:
        mmap = bool(flags & _FLAG_MMAP)

    digest = hashlib.sha256()
    if mmap:
        data = np.memmap(path, dtype=np.uint8, mode="r")
        body = data[: actual - 8]
        step_sz = 1 << 24
        for i in range(0, len(body), step_sz):
            digest.update(body[i : i + step_sz].tobytes())
        stored = bytes(data[actual - 8 :])
    else:
        with open(path, "rb") as f:
            blob = f.read()
        body = blob[:-8]
        digest.update(body)
        stored = blob[-8:]
    if digest.digest()[:8] != stored:
        raise IndexLoadError("%s: checksum mismatch" % path)

    off = _HEADER.size

    def take_np(count, dtype):
        nonlocal off
        dt = np.dtype(dtype)
        nbytes = count * dt.itemsize
        if mmap:
            arr = np.frombuffer(data, dtype=dt, count=count, offset=off)
        else:
            arr = np.frombuffer(body, dtype=dt, count=count, offset=off)
        off += nbytes
        return arr

    def take_arr(count, dtype, typecode):
        chunk = take_np(count, dtype)
        if mmap:
            return chunk
        out = array(typecode)
        out.frombytes(chunk.tobytes())
        return out

    doc_off = take_np(num_docs + 1, "<i8")
    tokens = take_arr(source_len, "<u2" if width == 2 else "<u4", "H" if width == 2 else "I")
    state_len = take_arr(num_states, "<i8", "q")
    state_link = take_arr(num_states, "<i8", "q")
    end_count = take_arr(num_states, "<i8", "q")
    counts = take_arr(num_states, "<i8", "q") if flags & _FLAG_COUNTS else None
    edge_offsets = take_arr(num_states + 1, "<i8", "q")
    edge_first = take_arr(num_edges, "<u4", "I")
    edge_target = take_arr(num_edges, "<i8", "q")
    edge_start = take_arr(num_edges, "<i8", "q")
    edge_len = take_arr(num_edges, "<i8", "q")

    return CdawgIndex(
        tokens=tokens,
        doc_offsets=doc_off,
        state_len=state_len,
        state_link=state_link,
        end_count=end_count,
        edge_offsets=edge_offsets,
        edge_first=edge_first,
        edge_target=edge_target,
        edge_start=edge_start,
        edge_len=edge_len,
        vocab_size=vocab_size,
        counts=counts,
        mmap_layout=bool(flags & _FLAG_MMAP),
    )
