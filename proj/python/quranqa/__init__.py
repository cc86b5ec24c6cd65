"""Quranic QA pipeline: retrieval, fusion, extraction, and ranking metrics."""

from ._core import (
    __version__,
    apply_no_answer_threshold,
    average_precision_10,
    bm25_rank,
    build_prompt,
    confidence_weighted_fuse,
    format_answers,
    fuse_rrf,
    map_10,
    min_max_normalize,
    mrr_10,
    normalize_for_search,
    normalize_text,
    pap_10,
    parse_model_output,
    partial_average_precision_10,
    reciprocal_rank_10,
    sha256_hex,
    token_f1,
    tokenize,
    validate_corpus,
    validate_spans,
)

__all__ = [
    "__version__",
    "apply_no_answer_threshold",
    "average_precision_10",
    "bm25_rank",
    "build_prompt",
    "confidence_weighted_fuse",
    "format_answers",
    "fuse_rrf",
    "map_10",
    "min_max_normalize",
    "mrr_10",
    "normalize_for_search",
    "normalize_text",
    "pap_10",
    "parse_model_output",
    "partial_average_precision_10",
    "reciprocal_rank_10",
    "sha256_hex",
    "token_f1",
    "tokenize",
    "validate_corpus",
    "validate_spans",
]
