"""Next-generation reservoir computing (NG-RC) readout of qubit states.

Synthetic dispersive-readout data, a DSP front end, polynomial feature maps,
ridge training (closed form and streaming), filter baselines, metrics and
exact cost accounting.
"""

from .data import IQTrace, Layout, Shot, ShotSet, split_train_test
from .errors import (ConfigError, DataError, LabelOutOfRangeError, LayoutMismatchError,
                     LengthMismatchError, MalformedHeaderError, NGRCError, NumericalError,
                     SingularSystemError)
from .features import FeatureSpec, build_features, count_complexity, feature_matrix
from .io import load_shotset, save_shotset
from .trainer import Discriminator, ridge_fit, sweep

__version__ = "0.1.0"

__all__ = [
    "IQTrace", "Layout", "Shot", "ShotSet", "split_train_test",
    "ConfigError", "DataError", "LabelOutOfRangeError", "LayoutMismatchError",
    "LengthMismatchError", "MalformedHeaderError", "NGRCError", "NumericalError",
    "SingularSystemError",
    "FeatureSpec", "build_features", "count_complexity", "feature_matrix",
    "load_shotset", "save_shotset",
    "Discriminator", "ridge_fit", "sweep",
]
