"""Backoff n-gram model over whitespace words and the chance-overlap algebra.

Joint probabilities of overlapping word sequences are compared against
the probability level at which a sequence would be expected to appear in
an n-word corpus at least once by chance: that appearance probability is
1 - (1 - p)^n, and inverting it at a significance level alpha gives the
improbability threshold for flagging overlaps.

All API probabilities are natural-log; the ARPA interchange format keeps
its base-10 convention on disk and is converted on load/save.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ArpaParseError, ConfigurationError

UNK = "<unk>"
_LN10 = math.log(10.0)


@dataclass
class ChanceAssessment:
    """Chance-level judgement of one scored word sequence."""

    log_prob: float
    n_words: int
    appear_prob: float
    improbable: bool


class NgramModel:
    """Backoff model: stored conditionals for seen n-grams, weights for contexts.

    ``probs`` maps a full n-gram tuple (any order) to its natural-log
    conditional probability; ``backoffs`` maps a context tuple to its
    natural-log backoff weight. Unseen contexts back off with weight 1.
    """

    def __init__(
        self,
        order: int,
        probs: dict[tuple[str, ...], float],
        backoffs: dict[tuple[str, ...], float],
    ):
        if order < 1:
            raise ValueError("model order must be >= 1, got %d" % order)
        self.order = order
        self.probs = probs
        self.backoffs = backoffs
        self.vocab = {key[0] for key in probs if len(key) == 1}

    def _map_word(self, word: str) -> str:
        if word in self.vocab:
            return word
        if UNK not in self.vocab:
            raise ConfigurationError(
                "model has no %s entry; cannot score out-of-vocabulary word %r"
                % (UNK, word)
            )
        return UNK

    def cond_logprob(self, word: str, context: Sequence[str] = ()) -> float:
        """ln P(word | context), context truncated to order-1 words."""
        w = self._map_word(word)
        if self.order > 1:
            ctx = tuple(self._map_word(c) for c in list(context)[-(self.order - 1) :])
        else:
            ctx = ()
        # Standard backoff evaluation: longest stored n-gram wins, shorter
        # contexts accumulate their backoff weights (1 when unseen).
        acc = 0.0
        while True:
            hit = self.probs.get(ctx + (w,))
            if hit is not None:
                return acc + hit
            acc += self.backoffs.get(ctx, 0.0)
            ctx = ctx[1:]


def sequence_logprob(model: NgramModel, words: Sequence[str]) -> float:
    """Natural-log joint probability of a word sequence, without padding.

    Each position is conditioned on up to order-1 preceding words of the
    sequence itself; a fragment's first word is scored by its unigram.
    """
    total = 0.0
    for i, w in enumerate(words):
        ctx = words[max(0, i - (model.order - 1)) : i]
        total += model.cond_logprob(w, ctx)
    return total


def estimate(
    sequences: Iterable[Sequence[str]], order: int = 5, discount: float = 0.75
) -> NgramModel:
    """Estimate a backoff model with interpolated absolute discounting.

    Each n-gram count is discounted by a fixed 0.75 and the freed mass is
    spread over the lower order, recursively down to a unigram that
    reserves mass for the unknown word, so every conditional distribution
    sums to one exactly. Counts never cross sequence boundaries and no
    start/end padding is applied.
    """
    if order < 1:
        raise ValueError("order must be >= 1, got %d" % order)
    if not 0.0 < discount < 1.0:
        raise ValueError("discount must be in (0, 1), got %r" % discount)
    counts: list[dict[tuple[str, ...], int]] = [dict() for _ in range(order + 1)]
    total_words = 0
    for seq in sequences:
        words = list(seq)
        total_words += len(words)
        for i in range(len(words)):
            for k in range(1, order + 1):
                if i - k + 1 < 0:
                    break
                gram = tuple(words[i - k + 1 : i + 1])
                counts[k][gram] = counts[k].get(gram, 0) + 1
    if total_words == 0:
        raise ValueError("estimate needs non-empty training text")

    probs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}

    # Unigram: discounted counts plus a uniform share (over types + <unk>)
    # of the freed mass, which gives <unk> its probability.
    types = sorted(counts[1])
    t1 = len(types)
    v = t1 + 1
    unk_p = discount * t1 / total_words / v
    probs[(UNK,)] = math.log(unk_p)
    uni: dict[str, float] = {UNK: unk_p}
    for (w,) in types:
        p = (counts[1][(w,)] - discount) / total_words + unk_p
        uni[w] = p
        probs[(w,)] = math.log(p)

    def lower_prob(word: str, ctx: tuple[str, ...]) -> float:
        if not ctx:
            return uni[word]
        gram = ctx + (word,)
        if gram in cond[len(gram)]:
            return cond[len(gram)][gram]
        lam = lambdas[len(ctx) + 1].get(ctx)
        shorter = lower_prob(word, ctx[1:])
        return shorter if lam is None else lam * shorter

    cond: list[dict[tuple[str, ...], float]] = [dict() for _ in range(order + 1)]
    lambdas: list[dict[tuple[str, ...], float]] = [dict() for _ in range(order + 1)]
    for k in range(2, order + 1):
        by_ctx: dict[tuple[str, ...], list[tuple[str, int]]] = {}
        for gram, c in counts[k].items():
            by_ctx.setdefault(gram[:-1], []).append((gram[-1], c))
        for ctx, conts in by_ctx.items():
            denom = sum(c for _, c in conts)
            lam = discount * len(conts) / denom
            lambdas[k][ctx] = lam
            for w, c in conts:
                cond[k][ctx + (w,)] = (c - discount) / denom + lam * lower_prob(w, ctx[1:])
        for ctx, lam in lambdas[k].items():
            backoffs[ctx] = math.log(lam)
        for gram, p in cond[k].items():
            probs[gram] = math.log(p)

    return NgramModel(order, probs, backoffs)


def write_arpa(model: NgramModel, path: str) -> None:
    """Write the model in the standard ARPA format (base-10 logs)."""
    by_order: list[list[tuple[tuple[str, ...], float]]] = [
        [] for _ in range(model.order + 1)
    ]
    for gram, lp in model.probs.items():
        by_order[len(gram)].append((gram, lp))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\\data\\\n")
        for k in range(1, model.order + 1):
            f.write("ngram %d=%d\n" % (k, len(by_order[k])))
        for k in range(1, model.order + 1):
            f.write("\n\\%d-grams:\n" % k)
            for gram, lp in sorted(by_order[k]):
                line = "%.7f\t%s" % (lp / _LN10, " ".join(gram))
                bow = model.backoffs.get(gram)
                if bow is not None and k < model.order:
                    line += "\t%.7f" % (bow / _LN10)
                f.write(line + "\n")
        f.write("\n\\end\\\n")


def load_arpa(path: str) -> NgramModel:
    """Load an ARPA model, converting base-10 logs to natural logs."""
    probs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}
    declared: dict[int, int] = {}
    seen: dict[int, int] = {}
    section = 0  # 0 = preamble, -1 = \data\, k>0 = k-grams, -2 = done
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line == "\\data\\":
                section = -1
                continue
            if line == "\\end\\":
                section = -2
                continue
            if line.startswith("\\") and line.endswith("-grams:"):
                try:
                    k = int(line[1:-7])
                except ValueError:
                    raise ArpaParseError("%s:%d: malformed section header %r" % (path, lineno, line))
                if k not in declared:
                    raise ArpaParseError(
                        "%s:%d: section %r not declared in \\data\\" % (path, lineno, line)
                    )
                section = k
                continue
            if section == -1:
                if not line.startswith("ngram "):
                    raise ArpaParseError("%s:%d: expected 'ngram N=count', got %r" % (path, lineno, line))
                try:
                    k_str, count_str = line[6:].split("=")
                    declared[int(k_str)] = int(count_str)
                except ValueError:
                    raise ArpaParseError("%s:%d: malformed count line %r" % (path, lineno, line))
                continue
            if section > 0:
                # Entry is logprob, k words, optional backoff weight; the
                # field count disambiguates words that look like numbers.
                fields = line.split()
                if len(fields) == section + 1:
                    words = tuple(fields[1:])
                    bow = None
                elif len(fields) == section + 2:
                    words = tuple(fields[1:-1])
                    if not _is_float(fields[-1]):
                        raise ArpaParseError(
                            "%s:%d: bad backoff weight %r" % (path, lineno, fields[-1])
                        )
                    bow = float(fields[-1])
                else:
                    raise ArpaParseError(
                        "%s:%d: %d-gram entry has %d fields" % (path, lineno, section, len(fields))
                    )
                if not _is_float(fields[0]):
                    raise ArpaParseError("%s:%d: bad log probability %r" % (path, lineno, fields[0]))
                probs[words] = float(fields[0]) * _LN10
                if bow is not None:
                    backoffs[words] = bow * _LN10
                seen[section] = seen.get(section, 0) + 1
                continue
            raise ArpaParseError("%s:%d: unexpected line %r before \\data\\" % (path, lineno, line))
    if not declared:
        raise ArpaParseError("%s: no \\data\\ section found" % path)
    for k, want in declared.items():
        got = seen.get(k, 0)
        if got != want:
            raise ArpaParseError(
                "%s: \\data\\ declares %d %d-grams but %d were read" % (path, want, k, got)
            )
    return NgramModel(max(declared), probs, backoffs)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def chance_threshold(n_words: int, alpha: float) -> float:
    """ln p such that a probability-p sequence appears at least once in
    n words with probability exactly alpha.

    Computed as ln(1 - (1-alpha)^(1/n)) via expm1/log1p so it stays exact
    for corpus sizes up to 10^12 words and beyond.
    """
    if n_words < 1:
        raise ValueError("n_words must be >= 1, got %r" % n_words)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1), got %r" % alpha)
    return math.log(-math.expm1(math.log1p(-alpha) / n_words))


def appearance_probability(log_prob: float, n_words: int) -> float:
    """Probability that a sequence with the given ln-probability appears
    at least once in n words: 1 - (1 - p)^n, clamped to [0, 1]."""
    if n_words < 1:
        raise ValueError("n_words must be >= 1, got %r" % n_words)
    if log_prob > 0.0:
        raise ValueError("log_prob must be <= 0, got %r" % log_prob)
    p = math.exp(log_prob)
    if p >= 1.0:
        return 1.0
    out = -math.expm1(n_words * math.log1p(-p))
    return min(max(out, 0.0), 1.0)


def assess(log_prob: float, n_words: int, alpha: float = 0.05) -> ChanceAssessment:
    """Judge whether a scored sequence is improbable at level alpha."""
    appear = appearance_probability(log_prob, n_words)
    return ChanceAssessment(
        log_prob=log_prob,
        n_words=n_words,
        appear_prob=appear,
        improbable=appear < alpha,
    )
