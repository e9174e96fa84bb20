"""Command-line interface: build, query, analyze, filter, threshold.

Exit codes: 0 success, 2 configuration error, 3 input-format error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from . import cdawg, curate, ingest, ngram, report
from .errors import ConfigurationError, FormatError, OvertokError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_IO = 4


def _sidecar_path(index_path: str) -> str:
    return index_path + ".vocab.json"


def _load_sidecar(index_path: str) -> dict | None:
    path = _sidecar_path(index_path)
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _read_text(path: str) -> str:
    with open(path, "rb") as f:
        return ingest.decode_utf8(f.read())


def _is_token_file(path: str) -> bool:
    with open(path, "rb") as f:
        return f.read(4) == ingest.OVTK_MAGIC


def _cmd_build(args) -> int:
    sequences: list[ingest.TokenSequence] = []
    vocab: dict[str, int] = {}
    word_count = 0
    vocab_size = None
    if args.format == "tokens":
        header = None
        for path in args.input:
            h = ingest.read_token_header(path)
            if header is None:
                header = h
            elif (h.vocab_size, h.boundary_id) != (header.vocab_size, header.boundary_id):
                raise ConfigurationError(
                    "%s declares vocab/boundary %d/%d, expected %d/%d"
                    % (path, h.vocab_size, h.boundary_id, header.vocab_size, header.boundary_id)
                )
            for seq in ingest.iter_pretokenized(path, first_doc_id=len(sequences)):
                sequences.append(seq)
        vocab_size = header.vocab_size if header else None
        if args.boundary_id is not None and header and args.boundary_id != header.boundary_id:
            resplit: list[ingest.TokenSequence] = []
            for seq in sequences:
                for part in ingest.split_documents(seq.tokens, args.boundary_id):
                    resplit.append(ingest.TokenSequence(len(resplit), part.tokens))
            sequences = resplit
    else:
        texts: list[str] = []
        for path in args.input:
            if args.format == "raw":
                texts.append(_read_text(path))
            else:
                texts.extend(ingest.iter_jsonl_texts(path))
        for text in texts:
            norm = ingest.normalize_text(text)
            word_count += ingest.count_whitespace_words(norm)
            seq = ingest.tokenize_whitespace(norm, vocab, mode="open", doc_id=len(sequences))
            if len(seq):
                sequences.append(seq)
        vocab_size = max(len(vocab), 1)
    if not sequences:
        raise ConfigurationError("no non-empty documents found in the input")

    index = cdawg.build(sequences, with_counts=args.counts, vocab_size=vocab_size)
    index.mmap_layout = args.mmap
    cdawg.serialize(index, args.output)
    if vocab:
        with open(_sidecar_path(args.output), "w", encoding="utf-8") as f:
            json.dump(
                {"vocab": vocab, "num_whitespace_words": word_count},
                f,
                ensure_ascii=False,
            )
    stats = ingest.corpus_stats(sequences, num_whitespace_words=word_count)
    print(
        json.dumps(
            {
                "output": args.output,
                "num_documents": stats.num_documents,
                "num_tokens": stats.num_tokens,
                "num_whitespace_words": stats.num_whitespace_words,
                "num_states": index.num_states,
                "num_edges": index.num_edges,
                "counts": index.has_counts,
            }
        )
    )
    return EXIT_OK


def _load_passages(paths: list[str], index_vocab_size: int, sidecar: dict | None):
    """Passages from token files or raw text; returns (sequences, id->word)."""
    sequences: list[ingest.TokenSequence] = []
    vocab: dict[str, int] = dict(sidecar["vocab"]) if sidecar else {}
    used_text = False
    for path in sorted(paths):
        stem = os.path.splitext(os.path.basename(path))[0]
        if _is_token_file(path):
            header = ingest.read_token_header(path)
            if header.vocab_size != index_vocab_size:
                raise ConfigurationError(
                    "%s declares vocab size %d but the index was built with %d"
                    % (path, header.vocab_size, index_vocab_size)
                )
            docs = list(ingest.iter_pretokenized(path))
            for i, seq in enumerate(docs):
                pid = stem if len(docs) == 1 else "%s/%d" % (stem, i)
                sequences.append(ingest.TokenSequence(pid, seq.tokens))
        else:
            if sidecar is None:
                raise ConfigurationError(
                    "%s is raw text but the index has no vocabulary sidecar; "
                    "query with pre-tokenized passages instead" % path
                )
            used_text = True
            norm = ingest.normalize_text(_read_text(path))
            seq = ingest.tokenize_whitespace(norm, vocab, mode="open", doc_id=stem)
            sequences.append(seq)
    id_to_word = {i: w for w, i in vocab.items()} if (sidecar or used_text) else None
    return sequences, id_to_word


def _cmd_query(args) -> int:
    index = cdawg.deserialize(args.index)
    sidecar = _load_sidecar(args.index)
    sequences, _ = _load_passages([args.passage], index.vocab_size, sidecar)
    from .query import longest_overlap

    for seq in sequences:
        result = longest_overlap(index, seq)
        payload = {
            "passage_id": result.passage_id,
            "passage_len": result.passage_len,
            "max_len": result.max_len,
            "max_end_positions": result.max_end_positions,
            "overlaps": [
                {
                    "token_ids": list(toks),
                    "frequency": result.frequencies[i] if result.frequencies else None,
                }
                for i, toks in enumerate(result.overlap_tokens)
            ],
            "max_frequency": result.max_frequency,
        }
        if args.per_position:
            payload["lengths"] = result.lengths
        print(json.dumps(payload, ensure_ascii=False))
    return EXIT_OK


def _passage_files(directory: str) -> list[str]:
    paths = [
        os.path.join(directory, name)
        for name in sorted(os.listdir(directory))
        if os.path.isfile(os.path.join(directory, name))
    ]
    if not paths:
        raise ConfigurationError("no passage files found in %s" % directory)
    return paths


def _cmd_analyze(args) -> int:
    if bool(args.index) == bool(args.chunk_dir):
        raise ConfigurationError("pass exactly one of --index or --chunk-dir")
    if args.index:
        indexes = [cdawg.deserialize(args.index)]
        sidecar = _load_sidecar(args.index)
        corpus_id = os.path.splitext(os.path.basename(args.index))[0]
    else:
        paths = sorted(glob.glob(os.path.join(args.chunk_dir, "*.cdwg")))
        if not paths:
            raise ConfigurationError("no *.cdwg indexes in %s" % args.chunk_dir)
        indexes = [cdawg.deserialize(p) for p in paths]
        sidecar = _load_sidecar(paths[0])
        corpus_id = os.path.basename(os.path.normpath(args.chunk_dir))
    for ix in indexes:
        if not ix.has_counts:
            cdawg.annotate_counts(ix)

    sequences, id_to_word = _load_passages(
        _passage_files(args.passages), indexes[0].vocab_size, sidecar
    )

    chance = None
    if args.arpa:
        n_words = args.corpus_words
        if n_words is None and sidecar and sidecar.get("num_whitespace_words"):
            n_words = int(sidecar["num_whitespace_words"])
        if n_words is None:
            raise ConfigurationError(
                "--arpa needs --corpus-words (or an index built from raw text)"
            )
        if id_to_word is None:
            raise ConfigurationError(
                "chance scoring needs an index with a vocabulary sidecar "
                "(built from raw text) so overlaps can be read back as words"
            )
        model = ngram.load_arpa(args.arpa)
        detok = lambda ids: " ".join(id_to_word.get(int(t), "<%d>" % int(t)) for t in ids)
        chance = report.ChanceConfig(
            model=model, n_words=n_words, alpha=args.alpha, detokenizer=detok
        )

    records = report.analyze(
        indexes if len(indexes) > 1 else indexes[0],
        sequences,
        chance=chance,
        corpus_id=corpus_id,
    )
    report.emit_jsonl(records, args.output)
    if args.figure_data:
        report.emit_figure_data(records, args.figure_data)
    print(json.dumps({"records": len(records), "output": args.output}))
    return EXIT_OK


def _cmd_filter(args) -> int:
    manifests = curate.read_manifest(args.chunk_manifest)
    if not manifests:
        raise ConfigurationError("chunk manifest %s is empty" % args.chunk_manifest)
    passage_paths = _passage_files(args.passages)
    sequences = []
    for path in passage_paths:
        if not _is_token_file(path):
            raise ConfigurationError(
                "%s: filter expects pre-tokenized passages (same ids as chunks)" % path
            )
        sequences.extend(ingest.iter_pretokenized(path))
    scanned = curate.scan_manifests(manifests, sequences, workers=args.workers)
    filtered = curate.filter_chunks(scanned, args.max_overlap)
    curate.write_manifest(filtered, args.output)
    summary = {
        "chunks": len(filtered),
        "eligible": sum(1 for m in filtered if m.eligible),
        "output": args.output,
    }
    if args.sample is not None:
        summary["sampled"] = curate.sample_chunks(filtered, args.sample, args.seed)
    print(json.dumps(summary))
    return EXIT_OK


def _cmd_threshold(args) -> int:
    value = ngram.chance_threshold(args.words, args.alpha)
    print(format(value, ".6g"))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overtok",
        description="Detect, quantify and avoid overlap between probe passages "
        "and tokenized corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="index a corpus")
    p.add_argument("--input", nargs="+", required=True, help="input files")
    p.add_argument("--format", choices=("raw", "tokens", "jsonl"), default="tokens")
    p.add_argument("--boundary-id", type=int, default=None,
                   help="override the document boundary id for token files")
    p.add_argument("--counts", action="store_true", help="annotate occurrence counts")
    p.add_argument("--mmap", action="store_true",
                   help="mark the index for memory-mapped loading")
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("query", help="query one passage file")
    p.add_argument("--index", required=True)
    p.add_argument("--passage", required=True)
    p.add_argument("--per-position", action="store_true",
                   help="include per-position match lengths")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("analyze", help="audit a passage directory")
    p.add_argument("--index", default=None)
    p.add_argument("--chunk-dir", default=None,
                   help="directory of chunk indexes to max-combine")
    p.add_argument("--passages", required=True, help="directory of passage files")
    p.add_argument("--arpa", default=None, help="backoff model for chance scoring")
    p.add_argument("--corpus-words", type=int, default=None,
                   help="whitespace-word count of the indexed corpus")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--output", required=True, help="report JSONL path")
    p.add_argument("--figure-data", default=None, help="directory for figure tables")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("filter", help="scan and filter training chunks")
    p.add_argument("--chunk-manifest", required=True)
    p.add_argument("--passages", required=True)
    p.add_argument("--max-overlap", type=int, default=11)
    p.add_argument("--sample", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("threshold", help="print the chance threshold ln p")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--words", type=int, required=True)
    p.set_defaults(func=_cmd_threshold)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except FormatError as exc:
        print("input format error: %s" % exc, file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print("i/o error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except (OvertokError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
