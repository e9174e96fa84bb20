"""Corpus-scale factor indexing and overlap auditing over token sequences.

Build a compacted factor index over a tokenized corpus, stream probe
passages through it to find the longest overlapping token sequences and
their frequencies, flag overlaps that are improbable under an n-gram
chance model, and curate training-data chunks whose overlap with every
probe stays below a token threshold.
"""

from .cdawg import (
    CdawgIndex,
    MatchCursor,
    accepts,
    annotate_counts,
    build,
    deserialize,
    factor_count,
    serialize,
    start_cursor,
    step,
)
from .curate import (
    ChunkManifest,
    chunk_max_overlap,
    filter_chunks,
    read_manifest,
    sample_chunks,
    scan_manifests,
    write_manifest,
)
from .errors import (
    ArpaParseError,
    ConfigurationError,
    CountsUnavailableError,
    FormatError,
    IndexLoadError,
    OvertokError,
)
from .ingest import (
    CorpusStats,
    TokenSequence,
    corpus_stats,
    count_whitespace_words,
    iter_pretokenized,
    load_pretokenized,
    normalize_text,
    split_documents,
    tokenize_whitespace,
    write_pretokenized,
)
from .ngram import (
    ChanceAssessment,
    NgramModel,
    appearance_probability,
    assess,
    chance_threshold,
    estimate,
    load_arpa,
    sequence_logprob,
    write_arpa,
)
from .query import OverlapResult, longest_overlap, matching_lengths, merge_overlaps
from .report import (
    ChanceConfig,
    OverlapRecord,
    analyze,
    emit_figure_data,
    emit_jsonl,
    parse_jsonl,
)

__version__ = "0.1.0"
