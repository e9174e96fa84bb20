import numpy as np
import pytest

from conftest import hello_world_tokens, lloyd_tokens
from naive import (
    naive_all_factors,
    naive_factor_count,
    naive_matching_lengths,
)
from overtok import cdawg
from overtok.errors import CountsUnavailableError, FormatError, IndexLoadError


def run_lengths(index, query):
    cur = cdawg.MatchCursor()
    out = []
    for t in query:
        cur = cdawg.step(index, cur, t)
        out.append(cur.length)
    return out


class TestBuild:
    def test_reference_accepts_and_rejects(self):
        index = cdawg.build([hello_world_tokens()])
        assert cdawg.accepts(index, [ord(c) for c in "llo"])
        assert not cdawg.accepts(index, [ord(c) for c in "lloy"])

    def test_single_token_doc(self):
        index = cdawg.build([[5]])
        assert cdawg.accepts(index, [5])
        assert not cdawg.accepts(index, [6])
        assert not cdawg.accepts(index, [5, 5])

    def test_factor_set_equals_enumeration(self):
        rng = np.random.default_rng(3)
        doc = rng.integers(0, 5, size=200).tolist()
        index = cdawg.build([doc])
        expected = naive_all_factors([doc])
        # every enumerated factor accepted
        for factor in expected:
            assert cdawg.accepts(index, list(factor))
        # random non-factors rejected
        for _ in range(500):
            cand = tuple(int(t) for t in rng.integers(0, 6, size=int(rng.integers(1, 9))))
            assert cdawg.accepts(index, list(cand)) == (cand in expected)

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            cdawg.build([])
        with pytest.raises(ValueError):
            cdawg.build([[1], []])

    def test_token_width_validated(self):
        with pytest.raises(FormatError):
            cdawg.build([[1 << 33]])
        with pytest.raises(FormatError):
            cdawg.build([[5]], vocab_size=3)
        with pytest.raises(FormatError):
            cdawg.build([[-1]])


class TestCounts:
    def test_overlapping_counts(self):
        index = cdawg.build([[1, 2, 1, 2, 1]], with_counts=True)
        assert cdawg.factor_count(index, [1, 2, 1]) == 2
        assert cdawg.factor_count(index, [1]) == 3
        assert cdawg.factor_count(index, [2, 1, 2]) == 1

    def test_self_overlap(self):
        index = cdawg.build([[7, 7, 7]], with_counts=True)
        assert cdawg.factor_count(index, [7, 7]) == 2

    def test_non_factor_is_zero(self):
        index = cdawg.build([[1, 2]], with_counts=True)
        assert cdawg.factor_count(index, [2, 1]) == 0

    def test_every_indexed_factor_positive(self):
        rng = np.random.default_rng(11)
        doc = rng.integers(0, 4, size=60).tolist()
        index = cdawg.build([doc], with_counts=True)
        for factor in naive_all_factors([doc]):
            assert cdawg.factor_count(index, list(factor)) >= 1

    def test_extension_monotonicity(self):
        index = cdawg.build([[1, 2, 3, 1, 2]], with_counts=True)
        assert cdawg.factor_count(index, [1]) >= cdawg.factor_count(index, [1, 2])
        assert cdawg.factor_count(index, [1, 2]) >= cdawg.factor_count(index, [1, 2, 3])

    def test_duplicate_documents_counted_each_time(self):
        index = cdawg.build([[1, 2, 3], [1, 2, 3]], with_counts=True)
        assert cdawg.factor_count(index, [1, 2, 3]) == 2
        assert cdawg.factor_count(index, [2]) == 2

    def test_requires_annotation(self):
        index = cdawg.build([[1, 2]])
        with pytest.raises(CountsUnavailableError):
            cdawg.factor_count(index, [1])
        cdawg.annotate_counts(index)
        assert cdawg.factor_count(index, [1]) == 1

    def test_counts_match_naive_randomized(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            sigma = int(rng.integers(2, 8))
            docs = [
                rng.integers(0, sigma, size=int(rng.integers(1, 30))).tolist()
                for _ in range(int(rng.integers(1, 4)))
            ]
            index = cdawg.build(docs, with_counts=True)
            for factor in naive_all_factors(docs):
                assert cdawg.factor_count(index, list(factor)) == naive_factor_count(
                    docs, factor
                )


class TestStep:
    def test_reference_lengths(self):
        index = cdawg.build([hello_world_tokens()])
        assert run_lengths(index, lloyd_tokens()) == [1, 2, 3, 0, 1]

    def test_unknown_token_resets(self):
        index = cdawg.build([[1, 2, 3]])
        assert run_lengths(index, [99]) == [0]
        assert run_lengths(index, [1, 2, 99, 3]) == [1, 2, 0, 1]

    def test_full_reference_is_all_prefixes(self):
        doc = hello_world_tokens()
        index = cdawg.build([doc])
        assert run_lengths(index, doc) == list(range(1, len(doc) + 1))

    def test_growth_bound(self):
        rng = np.random.default_rng(9)
        doc = rng.integers(0, 3, size=300).tolist()
        index = cdawg.build([doc])
        query = rng.integers(0, 4, size=400).tolist()
        lengths = run_lengths(index, query)
        assert lengths[0] <= 1
        for a, b in zip(lengths, lengths[1:]):
            assert b <= a + 1

    def test_no_cross_document_match(self):
        index = cdawg.build([[1], [2]])
        assert run_lengths(index, [1, 2]) == [1, 1]

    def test_matches_naive_randomized(self):
        rng = np.random.default_rng(21)
        for _ in range(60):
            sigma = int(rng.integers(2, 257))
            docs = [
                rng.integers(0, sigma, size=int(rng.integers(1, 300))).tolist()
                for _ in range(int(rng.integers(1, 5)))
            ]
            index = cdawg.build(docs)
            # adversarial queries: corpus snippets glued with junk
            query = []
            for _ in range(int(rng.integers(1, 5))):
                d = docs[int(rng.integers(0, len(docs)))]
                a = int(rng.integers(0, len(d)))
                b = min(len(d), a + int(rng.integers(1, 50)))
                query.extend(d[a:b])
                query.append(int(rng.integers(0, sigma)))
            assert run_lengths(index, query) == naive_matching_lengths(docs, query)


class TestStructure:
    def test_size_bounds(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            sigma = int(rng.integers(2, 257))
            docs = [
                rng.integers(0, sigma, size=int(rng.integers(1, 500))).tolist()
                for _ in range(int(rng.integers(1, 4)))
            ]
            n = sum(len(d) for d in docs)
            index = cdawg.build(docs)
            assert index.num_states <= 2 * n + 2
            assert index.num_edges <= 3 * n + 4

    def test_suffix_links_present(self):
        index = cdawg.build([[1, 2, 1, 1, 2]])
        assert int(index._slink[0]) == -1
        for v in range(1, index.num_states):
            assert 0 <= int(index._slink[v]) < index.num_states

    def test_edge_spans_reference_documents(self):
        docs = [[1, 2, 3, 1, 2], [4, 5]]
        index = cdawg.build(docs)
        for e in range(index.num_edges):
            doc, start, end = index.edge_span(e)
            assert 0 <= doc < len(docs)
            assert 0 <= start < end <= len(docs[doc])
            assert docs[doc][start:end] == index.edge_tokens(e)


class TestSerialization:
    def test_round_trip_preserves_reference_lengths(self, tmp_path):
        path = str(tmp_path / "h.cdwg")
        index = cdawg.build([hello_world_tokens()], with_counts=True)
        cdawg.serialize(index, path)
        loaded = cdawg.deserialize(path)
        assert run_lengths(loaded, lloyd_tokens()) == [1, 2, 3, 0, 1]
        assert cdawg.factor_count(loaded, [ord(c) for c in "llo"]) == 1

    def test_round_trip_single_token_doc(self, tmp_path):
        path = str(tmp_path / "one.cdwg")
        index = cdawg.build([[0]], with_counts=True)
        cdawg.serialize(index, path)
        loaded = cdawg.deserialize(path)
        assert cdawg.accepts(loaded, [0])
        assert cdawg.factor_count(loaded, [0]) == 1

    def test_round_trip_queries_agree(self, tmp_path):
        rng = np.random.default_rng(17)
        docs = [rng.integers(0, 50, size=400).tolist() for _ in range(3)]
        index = cdawg.build(docs, with_counts=True)
        path = str(tmp_path / "r.cdwg")
        cdawg.serialize(index, path)
        for mmap in (False, True):
            loaded = cdawg.deserialize(path, mmap=mmap)
            for _ in range(50):
                q = rng.integers(0, 52, size=int(rng.integers(1, 40))).tolist()
                assert run_lengths(loaded, q) == run_lengths(index, q)
                assert cdawg.factor_count(loaded, q) == cdawg.factor_count(index, q)

    def test_version_mismatch_rejected(self, tmp_path):
        path = str(tmp_path / "v.cdwg")
        cdawg.serialize(cdawg.build([[1, 2]]), path)
        data = bytearray(open(path, "rb").read())
        data[4:8] = (99).to_bytes(4, "little")
        with open(path, "wb") as f:
            f.write(bytes(data))
        with pytest.raises(IndexLoadError, match="version 99"):
            cdawg.deserialize(path)

    def test_checksum_failure_rejected(self, tmp_path):
        path = str(tmp_path / "c.cdwg")
        cdawg.serialize(cdawg.build([[1, 2, 3]]), path)
        data = bytearray(open(path, "rb").read())
        data[30] ^= 0xFF
        with open(path, "wb") as f:
            f.write(bytes(data))
        with pytest.raises(IndexLoadError, match="checksum"):
            cdawg.deserialize(path)

    def test_truncation_rejected(self, tmp_path):
        path = str(tmp_path / "t.cdwg")
        cdawg.serialize(cdawg.build([[1, 2, 3]]), path)
        data = open(path, "rb").read()
        with open(path, "wb") as f:
            f.write(data[:-9])
        with pytest.raises(IndexLoadError, match="truncated|bytes"):
            cdawg.deserialize(path)

    def test_wide_vocab_round_trip(self, tmp_path):
        docs = [[70000, 70001, 70000]]
        index = cdawg.build(docs, with_counts=True)
        path = str(tmp_path / "w.cdwg")
        cdawg.serialize(index, path)
        loaded = cdawg.deserialize(path)
        assert cdawg.factor_count(loaded, [70000]) == 2
