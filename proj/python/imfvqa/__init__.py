"""Python access to the imfvqa core: corpus generation, training on the
synthetic task, inference and answer judging."""

from ._core import (
    ConfigError,
    CorruptFileError,
    Error,
    IoError,
    Model,
    NumericError,
    ParseError,
    ShapeError,
    StateError,
    TransportError,
    ValidationError,
    VersionError,
    build_judge_prompt,
    evaluate_exact,
    generate_corpus,
    kl_loss,
    normalize,
    parse_verdict,
    sample_z,
    selftest,
    train_synthetic,
)

__all__ = [name for name in dir() if not name.startswith("_")]
