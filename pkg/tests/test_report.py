import json
import math

import numpy as np
import pytest

from conftest import hello_world_tokens, lloyd_tokens
from naive import naive_factor_count, naive_max_overlap
from overtok import cdawg, ngram
from overtok.errors import ConfigurationError
from overtok.ingest import TokenSequence
from overtok.report import (
    ChanceConfig,
    OverlapRecord,
    analyze,
    emit_figure_data,
    emit_jsonl,
    parse_jsonl,
)


@pytest.fixture(scope="module")
def word_model():
    corpus = [["the", "cat", "sat", "on", "the", "mat"], ["the", "dog", "ran"]]
    return ngram.estimate(corpus, order=3)


class TestAnalyze:
    def test_reference_record(self):
        index = cdawg.build([hello_world_tokens()], with_counts=True)
        records = analyze(index, [TokenSequence("probe", lloyd_tokens())])
        (rec,) = records
        assert rec.passage_len == 5
        assert rec.overlap_len == 3
        assert rec.overlap_frequency == 1
        assert rec.overlap_token_ids == [ord(c) for c in "llo"]
        assert rec.improbable is None

    def test_complete_overlap_diagonal(self):
        doc = [2, 7, 1, 8]
        index = cdawg.build([doc], with_counts=True)
        (rec,) = analyze(index, [TokenSequence(0, doc)])
        assert rec.overlap_len == rec.passage_len

    def test_counts_required(self):
        index = cdawg.build([[1, 2]])
        with pytest.raises(ConfigurationError, match="counts"):
            analyze(index, [TokenSequence(0, [1])])

    def test_vocab_mismatch_rejected(self):
        index = cdawg.build([[1, 2]], with_counts=True, vocab_size=100)
        with pytest.raises(ConfigurationError, match="vocab"):
            analyze(index, [TokenSequence(0, [1])], passage_vocab_size=50)

    def test_chunk_set_merging(self):
        chunk_a = cdawg.build([[1, 2, 9]], with_counts=True)
        chunk_b = cdawg.build([[8, 1, 2]], with_counts=True)
        (rec,) = analyze([chunk_a, chunk_b], [TokenSequence(0, [1, 2])])
        assert rec.overlap_len == 2
        assert rec.overlap_frequency == 2

    def test_synthetic_audit_matches_oracle(self):
        rng = np.random.default_rng(8)
        docs = [rng.integers(0, 30, size=200).tolist() for _ in range(4)]
        index = cdawg.build(docs, with_counts=True)
        passages = [
            TokenSequence(i, rng.integers(0, 32, size=int(rng.integers(5, 60))).tolist())
            for i in range(50)
        ]
        records = analyze(index, passages)
        assert len(records) == 50
        for rec, passage in zip(records, passages):
            toks = list(passage.tokens)
            assert rec.overlap_len == naive_max_overlap(docs, toks)
            if rec.overlap_len:
                assert rec.overlap_frequency == naive_factor_count(
                    docs, rec.overlap_token_ids
                )

    def test_chance_scoring_with_word_forms(self, word_model):
        # token ids stand for words one-to-one
        words = ["the", "cat", "sat"]
        index = cdawg.build([[10, 11, 12]], with_counts=True)
        chance = ChanceConfig(
            model=word_model,
            n_words=10**9,
            alpha=0.05,
            word_forms={"p": words},
        )
        (rec,) = analyze(index, [TokenSequence("p", [10, 11, 12])], chance=chance)
        want_lp = ngram.sequence_logprob(word_model, words)
        assert rec.ngram_log_prob == pytest.approx(want_lp)
        assert rec.appear_prob == pytest.approx(
            ngram.appearance_probability(want_lp, 10**9)
        )
        assert rec.improbable == (rec.appear_prob < 0.05)
        assert rec.overlap_text == "the cat sat"
        assert rec.partial_word_boundary is False

    def test_chance_scoring_with_detokenizer_partial_word(self, word_model):
        # ids are characters; overlap cuts "cat" in half
        text = "the cat sat"
        ids = [ord(c) for c in text]
        corpus_ids = [ord(c) for c in "at sa"]
        index = cdawg.build([corpus_ids], with_counts=True)
        detok = lambda toks: "".join(chr(t) for t in toks)
        chance = ChanceConfig(
            model=word_model, n_words=1000, detokenizer=detok
        )
        (rec,) = analyze(index, [TokenSequence("p", ids)], chance=chance)
        assert rec.overlap_len == 5
        assert rec.overlap_text == "at sa"
        assert rec.partial_word_boundary is True
        # scored on the covering whole-word span "cat sat"
        want = ngram.sequence_logprob(word_model, ["cat", "sat"])
        assert rec.ngram_log_prob == pytest.approx(want)

    def test_chance_requires_bridge(self, word_model):
        index = cdawg.build([[1, 2]], with_counts=True)
        chance = ChanceConfig(model=word_model, n_words=100)
        with pytest.raises(ConfigurationError, match="detokenizer or"):
            analyze(index, [TokenSequence(0, [1, 2])], chance=chance)


class TestEmit:
    def _records(self):
        index = cdawg.build([hello_world_tokens()], with_counts=True)
        return analyze(
            index,
            [TokenSequence("a", lloyd_tokens()), TokenSequence("b", hello_world_tokens())],
            corpus_id="ref",
        )

    def test_round_trip_unchanged(self, tmp_path):
        path = str(tmp_path / "r.jsonl")
        records = self._records()
        emit_jsonl(records, path)
        parsed = parse_jsonl(path)
        assert parsed == records

    def test_emit_rejects_empty(self, tmp_path):
        with pytest.raises(ValueError):
            emit_jsonl([], str(tmp_path / "x.jsonl"))

    def test_byte_identical_runs(self, tmp_path):
        p1 = str(tmp_path / "a.jsonl")
        p2 = str(tmp_path / "b.jsonl")
        emit_jsonl(self._records(), p1)
        emit_jsonl(self._records(), p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_fixed_field_order_and_precision(self, tmp_path):
        path = str(tmp_path / "o.jsonl")
        rec = OverlapRecord(
            corpus_id="c",
            passage_id="p",
            passage_len=5,
            overlap_len=3,
            overlap_frequency=1,
            overlap_token_ids=[1, 2, 3],
            ngram_log_prob=-25.329999999,
            appear_prob=0.0499999991234,
            improbable=True,
        )
        emit_jsonl([rec], path)
        line = open(path).read().strip()
        obj = json.loads(line)
        assert list(obj.keys()) == [
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
        ]
        assert '"ngram_log_prob":-25.33,' in line
        assert '"appear_prob":0.05,' in line

    def test_sorted_by_corpus_and_passage(self, tmp_path):
        path = str(tmp_path / "s.jsonl")
        recs = self._records()[::-1]
        emit_jsonl(recs, path)
        ids = [json.loads(l)["passage_id"] for l in open(path)]
        assert ids == sorted(ids)

    def test_figure_tables(self, tmp_path):
        out = str(tmp_path / "fig")
        records = self._records()
        emit_figure_data(records, out)
        lens = open(out + "/overlap_lengths.csv").read().splitlines()
        freqs = open(out + "/overlap_frequencies.csv").read().splitlines()
        assert lens[0] == "passage_len,overlap_len,improbable"
        assert freqs[0] == "overlap_len,overlap_frequency,improbable"
        assert len(lens) == len(freqs) == 3
        # complete-overlap passage lies on the y=x diagonal
        row_b = lens[2].split(",")
        assert row_b[0] == row_b[1] == "10"

    def test_invariants_on_reparse(self, tmp_path):
        path = str(tmp_path / "inv.jsonl")
        emit_jsonl(self._records(), path)
        for rec in parse_jsonl(path):
            assert rec.overlap_len <= rec.passage_len
            if rec.overlap_len >= 1:
                assert rec.overlap_frequency >= 1
            assert len(rec.overlap_token_ids) == rec.overlap_len
