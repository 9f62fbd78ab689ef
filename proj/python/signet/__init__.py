"""Signature extraction, embedding and clustering over scanned documents."""

from ._signet import (
    EMBEDDING_DIM,
    ConfigError,
    CorruptIndexError,
    DegenerateEmbedding,
    FormatError,
    InvalidInput,
    SignetError,
    SourceError,
    StartupError,
    adjusted_rand_index,
    cluster,
    connected_components,
    cosine_distance,
    format_signature_id,
    linkage,
    load_config,
    load_index,
    parse_signature_id,
    rand_index,
    roc_curve,
    run_pipeline,
    save_index,
    search,
)

__all__ = [name for name in dir() if not name.startswith("_")]
