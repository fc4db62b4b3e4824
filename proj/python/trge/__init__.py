"""Task-routed expert groups for continual learning."""

from ._core import (
    ArtifactError,
    ConfigError,
    GenerationInfeasible,
    InvalidArgument,
    NumericalFailure,
    ablate,
    config_keys,
    default_config,
    fuse,
    load_run,
    metrics,
    relevance,
    run,
    run_to_dir,
    scale_and_select,
    select_unseen,
    softmax,
)

__all__ = [
    "ArtifactError",
    "ConfigError",
    "GenerationInfeasible",
    "InvalidArgument",
    "NumericalFailure",
    "ablate",
    "config_keys",
    "default_config",
    "fuse",
    "load_run",
    "metrics",
    "relevance",
    "run",
    "run_to_dir",
    "scale_and_select",
    "select_unseen",
    "softmax",
]
