"""Python bindings for the fdm multi-task sequence model toolkit."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    NumericalError,
    RangeError,
    SpecError,
    TextTokenizer,
    build_index,
    checkpoint_info,
    decode_continuous,
    encode_continuous,
    encode_discrete,
    evaluate_baseline,
    generate_expert_data,
    lr_at,
    normalized_score,
    run_cli,
    suite_names,
    suite_tokenizer,
    tsp_oracle,
    vocab,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "NumericalError",
    "RangeError",
    "SpecError",
    "TextTokenizer",
    "build_index",
    "checkpoint_info",
    "decode_continuous",
    "encode_continuous",
    "encode_discrete",
    "evaluate_baseline",
    "generate_expert_data",
    "lr_at",
    "normalized_score",
    "run_cli",
    "suite_names",
    "suite_tokenizer",
    "tsp_oracle",
    "vocab",
]
