"""Autoencoder and model based backward elimination for feature ranking, with baselines."""
from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from .amber import AmberConfig, EliminationTrace, run
from .baselines import FeatureRanking, cmim_select, fisher_scores, fqi_scores, rfs_scores
from .data import Dataset, FeatureMask, load_breast_cancer, load_csv, load_idx
from .errors import AmberError, ConfigError, DataError, NumericError

__all__ = [
    "AmberConfig",
    "AmberError",
    "ConfigError",
    "DataError",
    "Dataset",
    "EliminationTrace",
    "FeatureMask",
    "FeatureRanking",
    "NumericError",
    "cmim_select",
    "fisher_scores",
    "fqi_scores",
    "load_breast_cancer",
    "load_csv",
    "load_idx",
    "rfs_scores",
    "run",
]
