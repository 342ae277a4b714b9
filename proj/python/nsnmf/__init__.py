"""Python access to the nsnmf recommender core."""

from ._core import (
    ConfigError,
    DataError,
    DivergenceError,
    Error,
    IndexError,
    IoError,
    Model,
    RatingDataset,
    activation,
    config_digest,
    filter_activity,
    fit,
    kmeans,
    load_model,
    load_ratings,
    methods,
    parse_ratings,
    prepare,
    read_metrics,
    rmse,
    split,
    wcss,
    wcss_svg,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DivergenceError",
    "Error",
    "IndexError",
    "IoError",
    "Model",
    "RatingDataset",
    "activation",
    "config_digest",
    "filter_activity",
    "fit",
    "kmeans",
    "load_model",
    "load_ratings",
    "methods",
    "parse_ratings",
    "prepare",
    "read_metrics",
    "rmse",
    "split",
    "wcss",
    "wcss_svg",
]
