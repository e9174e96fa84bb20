"""Text normalization, document segmentation and token-file ingestion.

The indexing core operates on opaque integer token ids; this module turns
raw text or pre-tokenized binary files into per-document token sequences
and computes the corpus statistics the chance model needs.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import FormatError

#: Binary token-file header: magic, version, token width, vocab size, boundary id.
OVTK_MAGIC = b"OVTK"
OVTK_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

_LINE_BREAKS = re.compile("\r\n|[\r  ]")
_HSPACE_RUNS = re.compile("[ \t ]+")


@dataclass
class TokenSequence:
    """One document as an ordered sequence of integer token ids."""

    doc_id: int
    tokens: "list[int] | np.ndarray"

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class CorpusStats:
    num_documents: int = 0
    num_tokens: int = 0
    # 0 is permitted when ingesting pre-tokenized input without source text.
    num_whitespace_words: int = 0


@dataclass
class TokenFileHeader:
    version: int
    token_width: int
    vocab_size: int
    boundary_id: int


def normalize_text(raw: str) -> str:
    """Unify line breaks to LF and collapse horizontal whitespace runs.

    CR, CRLF, LS and PS all become a single LF; every maximal run of
    space / tab / non-breaking space becomes one space. Idempotent.
    """
    if not isinstance(raw, str):
        raise TypeError("normalize_text expects str, got %s" % type(raw).__name__)
    return _HSPACE_RUNS.sub(" ", _LINE_BREAKS.sub("\n", raw))


def decode_utf8(data: bytes) -> str:
    """Decode UTF-8 bytes, reporting the byte offset of any bad sequence."""
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(
            "invalid UTF-8 at byte offset %d: %s" % (exc.start, exc.reason)
        ) from exc


def count_whitespace_words(text: str) -> int:
    return len(text.split())


def split_documents(stream: Iterable[int], boundary: int) -> list[TokenSequence]:
    """Split a token stream into maximal boundary-free runs, dropping empties."""
    docs: list[TokenSequence] = []
    run: list[int] = []
    for tok in stream:
        if tok == boundary:
            if run:
                docs.append(TokenSequence(len(docs), run))
                run = []
        else:
            run.append(int(tok))
    if run:
        docs.append(TokenSequence(len(docs), run))
    return docs


def tokenize_whitespace(
    text: str,
    vocab: dict[str, int],
    mode: str = "closed",
    doc_id: int = 0,
) -> TokenSequence:
    """Map whitespace-delimited words of normalized text to token ids.

    In ``closed`` mode an out-of-vocabulary word is an error. In ``open``
    mode fresh ids are assigned in first-occurrence order starting after
    the largest id already in ``vocab``; the mapping is grown in place so
    repeated calls share one id space.
    """
    if mode not in ("closed", "open"):
        raise ValueError("mode must be 'closed' or 'open', got %r" % mode)
    next_id = max(vocab.values()) + 1 if vocab else 0
    ids: list[int] = []
    for i, word in enumerate(text.split()):
        tok = vocab.get(word)
        if tok is None:
            if mode == "closed":
                raise FormatError(
                    "out-of-vocabulary word %r at word index %d" % (word, i)
                )
            tok = next_id
            vocab[word] = tok
            next_id += 1
        ids.append(tok)
    return TokenSequence(doc_id, ids)


def corpus_stats(
    sequences: Iterable[TokenSequence], num_whitespace_words: int = 0
) -> CorpusStats:
    stats = CorpusStats(num_whitespace_words=num_whitespace_words)
    for seq in sequences:
        stats.num_documents += 1
        stats.num_tokens += len(seq)
    return stats


def _dtype_for_width(width: int) -> np.dtype:
    if width == 2:
        return np.dtype("<u2")
    if width == 4:
        return np.dtype("<u4")
    raise FormatError("token width must be 2 or 4 bytes, got %d" % width)


def read_token_header(path: str) -> TokenFileHeader:
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise FormatError("%s: truncated header (%d bytes)" % (path, len(raw)))
    magic, version, width, vocab_size, boundary = _HEADER.unpack(raw)
    if magic != OVTK_MAGIC:
        raise FormatError("%s: bad magic %r, expected %r" % (path, magic, OVTK_MAGIC))
    if version != OVTK_VERSION:
        raise FormatError(
            "%s: unsupported token-file version %d (reader supports %d)"
            % (path, version, OVTK_VERSION)
        )
    _dtype_for_width(width)
    if boundary >= vocab_size:
        raise FormatError(
            "%s: boundary id %d not below vocab size %d" % (path, boundary, vocab_size)
        )
    return TokenFileHeader(version, width, vocab_size, boundary)


def iter_pretokenized(
    path: str, chunk_tokens: int = 1 << 20, first_doc_id: int = 0
) -> Iterator[TokenSequence]:
    """Stream documents out of a binary token file.

    Reads the payload in fixed-size chunks and splits at the boundary id,
    so memory use is independent of file size (bounded by the largest
    single document).
    """
    header = read_token_header(path)
    dtype = _dtype_for_width(header.token_width)
    width = header.token_width
    boundary = header.boundary_id
    vocab_size = header.vocab_size
    doc_id = first_doc_id
    carry: list[np.ndarray] = []
    offset = _HEADER.size
    with open(path, "rb") as f:
        f.seek(offset)
        while True:
            buf = f.read(chunk_tokens * width)
            if not buf:
                break
            if len(buf) % width:
                raise FormatError(
                    "%s: truncated record at byte offset %d (%d trailing bytes)"
                    % (path, offset + len(buf) - len(buf) % width, len(buf) % width)
                )
            chunk = np.frombuffer(buf, dtype=dtype)
            if chunk.size and int(chunk.max()) >= vocab_size:
                bad = int(np.argmax(chunk >= vocab_size))
                raise FormatError(
                    "%s: token id %d >= vocab size %d at byte offset %d"
                    % (path, int(chunk[bad]), vocab_size, offset + bad * width)
                )
            cuts = np.flatnonzero(chunk == boundary)
            start = 0
            for cut in cuts:
                piece = chunk[start : int(cut)]
                if len(piece) or carry:
                    doc = np.concatenate(carry + [piece]) if carry else piece
                    carry = []
                    if len(doc):
                        yield TokenSequence(doc_id, doc.astype(np.int64))
                        doc_id += 1
                start = int(cut) + 1
            tail = chunk[start:]
            if len(tail):
                carry.append(tail.copy())
            offset += len(buf)
    if carry:
        doc = np.concatenate(carry)
        if len(doc):
            yield TokenSequence(doc_id, doc.astype(np.int64))


def load_pretokenized(path: str) -> list[TokenSequence]:
    return list(iter_pretokenized(path))


def write_pretokenized(
    path: str,
    sequences: Iterable[TokenSequence],
    vocab_size: int,
    boundary_id: int,
    token_width: int | None = None,
) -> None:
    """Write documents to the binary token format, boundary-separated."""
    if boundary_id >= vocab_size:
        raise FormatError(
            "boundary id %d not below vocab size %d" % (boundary_id, vocab_size)
        )
    if token_width is None:
        token_width = 2 if vocab_size <= 1 << 16 else 4
    dtype = _dtype_for_width(token_width)
    if vocab_size > (1 << (8 * token_width)):
        raise FormatError(
            "vocab size %d does not fit token width %d" % (vocab_size, token_width)
        )
    with open(path, "wb") as f:
        f.write(_HEADER.pack(OVTK_MAGIC, OVTK_VERSION, token_width, vocab_size, boundary_id))
        sep = np.array([boundary_id], dtype=dtype)
        first = True
        for seq in sequences:
            arr = np.asarray(seq.tokens)
            if arr.size and (int(arr.min()) < 0 or int(arr.max()) >= vocab_size):
                raise FormatError(
                    "document %d contains token ids outside [0, %d)"
                    % (seq.doc_id, vocab_size)
                )
            if (arr == boundary_id).any():
                raise FormatError(
                    "document %d contains the boundary id %d" % (seq.doc_id, boundary_id)
                )
            if not first:
                f.write(sep.tobytes())
            f.write(arr.astype(dtype).tobytes())
            first = False


def iter_jsonl_texts(path: str) -> Iterator[str]:
    """Yield the ``text`` field of each JSON object in a line-delimited file."""
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(decode_utf8(line))
            except json.JSONDecodeError as exc:
                raise FormatError("%s:%d: invalid JSON: %s" % (path, lineno, exc)) from exc
            if not isinstance(obj, dict) or "text" not in obj:
                raise FormatError("%s:%d: record lacks a 'text' field" % (path, lineno))
            yield obj["text"]
