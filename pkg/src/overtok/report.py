"""Full audits: index x passages x chance model, with JSONL and figure data.

Records are emitted deterministically: fixed field order, floats at six
significant digits, rows sorted by (corpus_id, passage_id), so two runs
over the same inputs are byte-identical.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Callable, Sequence

from .cdawg import CdawgIndex
from .errors import ConfigurationError, FormatError
from .ingest import TokenSequence
from .ngram import NgramModel, assess, sequence_logprob
from .query import OverlapResult, longest_overlap, merge_overlaps

_RECORD_FIELDS = (
    "corpus_id",
    "passage_id",
    "passage_len",
    "overlap_len",
    "overlap_frequency",
    "overlap_token_ids",
    "overlap_text",
    "ngram_log_prob",
    "appear_prob",
    "improbable",
    "partial_word_boundary",
)


@dataclass
class OverlapRecord:
    """One passage's audit result; chance fields present only when scored."""

    corpus_id: str
    passage_id: int | str
    passage_len: int
    overlap_len: int
    overlap_frequency: int | None
    overlap_token_ids: list[int]
    overlap_text: str | None = None
    ngram_log_prob: float | None = None
    appear_prob: float | None = None
    improbable: bool | None = None
    partial_word_boundary: bool | None = None


@dataclass
class ChanceConfig:
    """How to score an overlap's chance probability.

    The index works on subword ids while the model works on whitespace
    words; the bridge is either a concatenative ``detokenizer`` (ids to
    text) or ``word_forms`` mapping each passage id to the word string of
    every token position (valid when tokens are words). With a
    detokenizer, an overlap cutting a word in half is widened to the
    covering whole-word span and flagged.
    """

    model: NgramModel
    n_words: int
    alpha: float = 0.05
    detokenizer: Callable[[Sequence[int]], str] | None = None
    word_forms: dict | None = None


def _overlap_words_detok(
    config: ChanceConfig, tokens: list[int], start: int, end: int
) -> tuple[list[str], bool]:
    detok = config.detokenizer
    full = detok(tokens)
    prefix = detok(tokens[:start])
    span = detok(tokens[start:end])
    char_start = len(prefix)
    char_end = char_start + len(span)
    partial_start = (
        0 < char_start < len(full)
        and not full[char_start - 1].isspace()
        and not full[char_start].isspace()
    )
    partial_end = (
        0 < char_end < len(full)
        and not full[char_end - 1].isspace()
        and not full[char_end].isspace()
    )
    while char_start > 0 and not full[char_start - 1].isspace():
        char_start -= 1
    while char_end < len(full) and not full[char_end].isspace():
        char_end += 1
    return full[char_start:char_end].split(), partial_start or partial_end


def _score_overlap(
    config: ChanceConfig, passage_id, tokens: list[int], result: OverlapResult
) -> tuple[str | None, float, float, bool, bool]:
    if result.max_len == 0:
        return None, 0.0, 1.0, False, False
    end = result.max_end_positions[0]
    start = end - result.max_len + 1
    if config.detokenizer is not None:
        words, partial = _overlap_words_detok(config, tokens, start, end + 1)
        text = config.detokenizer(tokens[start : end + 1])
    elif config.word_forms is not None:
        forms = config.word_forms.get(passage_id)
        if forms is None or len(forms) != len(tokens):
            raise ConfigurationError(
                "word forms for passage %r are missing or misaligned" % (passage_id,)
            )
        words = [forms[i] for i in range(start, end + 1)]
        partial = False
        text = " ".join(words)
    else:
        raise ConfigurationError(
            "chance scoring needs a detokenizer or per-passage word forms"
        )
    log_prob = sequence_logprob(config.model, words)
    judged = assess(log_prob, config.n_words, config.alpha)
    return text, log_prob, judged.appear_prob, judged.improbable, partial


def analyze(
    index,
    passages: Sequence,
    chance: ChanceConfig | None = None,
    corpus_id: str = "corpus",
    passage_vocab_size: int | None = None,
) -> list[OverlapRecord]:
    """Audit every passage, producing one record each.

    ``index`` may be a single index or a sequence of chunk indexes, in
    which case per-chunk results are max-combined before reporting.
    """
    indexes = list(index) if not isinstance(index, CdawgIndex) else [index]
    if not indexes:
        raise ConfigurationError("analyze needs at least one index")
    for ix in indexes:
        if not ix.has_counts:
            raise ConfigurationError(
                "analyze needs occurrence counts; build with counts or annotate first"
            )
        if passage_vocab_size is not None and passage_vocab_size != ix.vocab_size:
            raise ConfigurationError(
                "passage vocab size %d does not match index vocab size %d"
                % (passage_vocab_size, ix.vocab_size)
            )
    records = []
    for passage in passages:
        if isinstance(passage, TokenSequence):
            pid, toks = passage.doc_id, [int(t) for t in passage.tokens]
        else:
            pid, toks = len(records), [int(t) for t in passage]
        results = [longest_overlap(ix, TokenSequence(pid, toks)) for ix in indexes]
        result = results[0] if len(results) == 1 else merge_overlaps(results)
        if result.max_len and result.frequencies:
            best = max(range(len(result.frequencies)), key=lambda j: (result.frequencies[j], -j))
            overlap_ids = list(result.overlap_tokens[best])
            frequency = result.frequencies[best]
        else:
            overlap_ids = []
            frequency = 0
        record = OverlapRecord(
            corpus_id=corpus_id,
            passage_id=pid,
            passage_len=result.passage_len,
            overlap_len=result.max_len,
            overlap_frequency=frequency,
            overlap_token_ids=overlap_ids,
        )
        if chance is not None and result.max_len:
            text, log_prob, appear, improbable, partial = _score_overlap(
                chance, pid, toks, result
            )
            record.overlap_text = text
            record.ngram_log_prob = log_prob
            record.appear_prob = appear
            record.improbable = improbable
            record.partial_word_boundary = partial
        records.append(record)
    return records


def _json_scalar(value) -> str:
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            return "null"
        return format(value, ".6g")
    return json.dumps(value, ensure_ascii=False)


def _record_line(record: OverlapRecord) -> str:
    parts = []
    for name in _RECORD_FIELDS:
        parts.append('"%s":%s' % (name, _json_scalar(getattr(record, name))))
    return "{" + ",".join(parts) + "}"


def emit_jsonl(records: Sequence[OverlapRecord], path: str) -> None:
    """Write records as deterministic line-delimited JSON."""
    if not records:
        raise ValueError("emit_jsonl needs at least one record")
    ordered = sorted(records, key=lambda r: (r.corpus_id, str(r.passage_id)))
    with open(path, "w", encoding="utf-8") as f:
        for record in ordered:
            f.write(_record_line(record) + "\n")


def parse_jsonl(path: str) -> list[OverlapRecord]:
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
            missing = [k for k in _RECORD_FIELDS if k not in obj]
            if missing:
                raise FormatError(
                    "%s:%d: record lacks fields %s" % (path, lineno, ", ".join(missing))
                )
            out.append(OverlapRecord(**{k: obj[k] for k in _RECORD_FIELDS}))
    return out


def emit_figure_data(records: Sequence[OverlapRecord], out_dir: str) -> None:
    """Write the two figure-ready tables.

    ``overlap_lengths.csv`` holds (passage_len, overlap_len, improbable)
    and ``overlap_frequencies.csv`` holds (overlap_len,
    overlap_frequency, improbable), one row per passage.
    """
    if not records:
        raise ValueError("emit_figure_data needs at least one record")
    os.makedirs(out_dir, exist_ok=True)
    ordered = sorted(records, key=lambda r: (r.corpus_id, str(r.passage_id)))

    def flag(r: OverlapRecord) -> str:
        if r.improbable is None:
            return ""
        return "true" if r.improbable else "false"

    with open(os.path.join(out_dir, "overlap_lengths.csv"), "w", encoding="utf-8") as f:
        f.write("passage_len,overlap_len,improbable\n")
        for r in ordered:
            f.write("%d,%d,%s\n" % (r.passage_len, r.overlap_len, flag(r)))
    with open(os.path.join(out_dir, "overlap_frequencies.csv"), "w", encoding="utf-8") as f:
        f.write("overlap_len,overlap_frequency,improbable\n")
        for r in ordered:
            f.write("%d,%d,%s\n" % (r.overlap_len, r.overlap_frequency or 0, flag(r)))
