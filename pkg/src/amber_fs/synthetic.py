"""Small synthetic datasets with a known answer, used by the property suites."""
from __future__ import annotations

import numpy as np

from .data import Dataset, pair_groups
from .errors import ConfigError

GENERATORS = ("duplicate", "single_informative", "paired_group")


def duplicate_feature(n=500, seed=0):
    """Four features: x0 informative (y = [x0 > 0]), x1 and x2 noise, x3 an exact copy of x0."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 4))
    X[:, 3] = X[:, 0]
    y = (X[:, 0] > 0).astype(np.int64)
    return Dataset(X, y, feature_names=["x0", "x1", "x2", "x3_copy"], num_classes=2)


def single_informative(n=500, d=6, informative=0, seed=0):
    """``d`` standard-normal features; only ``informative`` determines the label."""
    if not 0 <= informative < d:
        raise ConfigError(f"informative feature {informative} outside 0..{d - 1}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = (X[:, informative] > 0).astype(np.int64)
    return Dataset(X, y, num_classes=2)


def paired_group(n=500, width=4, seed=0):
    """I/Q style data: features ``i`` and ``i + width`` form a group.

    The label is the sign of ``x0 + x_width``, so only the first pair
    carries information and it does so jointly.
    """
    if width < 2:
        raise ConfigError("paired_group needs width >= 2")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2 * width))
    y = (X[:, 0] + X[:, width] > 0).astype(np.int64)
    names = [f"i{k}" for k in range(width)] + [f"q{k}" for k in range(width)]
    return Dataset(X, y, feature_names=names, groups=pair_groups(width), num_classes=2)


def generate(name, n=500, seed=0, **kw):
    if name == "duplicate":
        return duplicate_feature(n, seed=seed, **kw)
    if name == "single_informative":
        return single_informative(n, seed=seed, **kw)
    if name == "paired_group":
        return paired_group(n, seed=seed, **kw)
    raise ConfigError(f"unknown synthetic generator {name!r}; expected one of {', '.join(GENERATORS)}")
