"""Dataset ingestion, normalization, splitting and feature masking."""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FormatError, IngestionError, ShapeError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list = None
    groups: list = None
    num_classes: int = None
    class_names: list = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise ShapeError(f"X must be 2-D, got shape {self.X.shape}")
        n, d = self.X.shape
        if n < 1 or d < 1:
            raise DataError(f"dataset needs n >= 1 and d >= 1, got {n}x{d}")
        y = np.asarray(self.y)
        if y.shape != (n,):
            raise ShapeError(f"y must have shape ({n},), got {y.shape}")
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise DataError("labels must be non-negative integers")
        self.y = y.astype(np.int64)
        if self.num_classes is None:
            self.num_classes = int(self.y.max()) + 1
        if np.any(self.y >= self.num_classes):
            raise DataError(f"label {int(self.y.max())} outside {self.num_classes} classes")
        if self.feature_names is None:
            self.feature_names = [f"f{i}" for i in range(d)]
        if len(self.feature_names) != d:
            raise ShapeError(f"{len(self.feature_names)} feature names for {d} columns")
        if self.groups is not None:
            self.groups = validate_groups(self.groups, d)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, rows):
        return replace(self, X=self.X[rows], y=self.y[rows])

    def with_X(self, X):
        return replace(self, X=X)


@dataclass
class NormStats:
    means: np.ndarray
    stds: np.ndarray


@dataclass
class FeatureMask:
    active: np.ndarray = field(default=None)

    def __post_init__(self):
        self.active = np.asarray(self.active, dtype=bool).copy()

    @classmethod
    def full(cls, d):
        return cls(np.ones(d, dtype=bool))

    @property
    def d(self):
        return len(self.active)

    def inactive(self):
        return np.flatnonzero(~self.active)

    def active_indices(self):
        return np.flatnonzero(self.active)

    def count(self):
        return int(self.active.sum())

    def without(self, features):
        """A new mask with ``features`` switched off."""
        m = FeatureMask(self.active)
        m.active[list(features)] = False
        return m


def validate_groups(groups, d):
    seen = set()
    out = []
    for g in groups:
        g = tuple(sorted(int(i) for i in g))
        if not g:
            raise ConfigError("empty feature group")
        for i in g:
            if i < 0 or i >= d:
                raise ConfigError(f"group member {i} outside 0..{d - 1}")
            if i in seen:
                raise ConfigError(f"feature {i} appears in more than one group")
            seen.add(i)
        out.append(g)
    return out


def units(d, groups=None):
    """Eliminable units: every group plus a singleton per ungrouped feature.

    Units are ordered by their smallest member, and a unit's id is its
    position in this list.
    """
    groups = validate_groups(groups or [], d)
    grouped = {i for g in groups for i in g}
    out = list(groups) + [(i,) for i in range(d) if i not in grouped]
    return sorted(out, key=lambda g: g[0])


def expand_groups(groups, feature):
    for g in groups or []:
        if feature in g:
            return set(g)
    return {int(feature)}


def pair_groups(width):
    """Groups ``{i, i + width}``; the layout of interleaved I/Q sample pairs."""
    return [(i, i + width) for i in range(width)]


# ingestion -----------------------------------------------------------------


def _parse_float(cell, row, col):
    try:
        return float(cell)
    except ValueError:
        raise IngestionError(f"cannot parse {cell!r} as a number at row {row}, column {col}") from None


def load_csv(path, label_column=-1, has_header=True):
    """Read a CSV file whose columns are features plus one label column.

    Labels that all parse as non-negative integers are used as-is; any
    other labels are mapped to 0, 1, ... in order of first appearance.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if has_header:
        if not rows:
            raise IngestionError(f"{path}: missing header")
        header, rows = rows[0], rows[1:]
    else:
        header = None
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    width = len(header) if header else len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise IngestionError(f"{path}: row {i} has {len(r)} cells, expected {width}")

    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None or label_column not in header:
            raise ConfigError(f"label column {label_column!r} not found in header")
        lab = header.index(label_column)
    else:
        lab = int(label_column)
        if lab < 0:
            lab += width
        if not 0 <= lab < width:
            raise ConfigError(f"label column index {label_column} out of range for {width} columns")

    feat_cols = [c for c in range(width) if c != lab]
    X = np.array([[_parse_float(r[c], i, c) for c in feat_cols] for i, r in enumerate(rows)])
    raw = [r[lab].strip() for r in rows]
    try:
        ints = [int(v) for v in raw]
        if min(ints) < 0:
            raise ValueError
        y = np.array(ints)
        class_names = [str(c) for c in range(max(ints) + 1)]
    except ValueError:
        class_names = list(dict.fromkeys(raw))
        lookup = {c: i for i, c in enumerate(class_names)}
        y = np.array([lookup[v] for v in raw])
    names = [header[c] for c in feat_cols] if header else [f"f{i}" for i in range(len(feat_cols))]
    return Dataset(X, y, feature_names=names, num_classes=len(class_names), class_names=class_names)


def write_csv(ds, path, label_name="label"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.feature_names) + [label_name])
        for row, lab in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def _open_binary(path):
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"no such file: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _read_idx(path, magic, ndims):
    raw = _open_binary(path)
    header = 4 + 4 * ndims
    if len(raw) < header:
        raise FormatError(f"{path}: truncated header")
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise FormatError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndims}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise FormatError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path, labels_path):
    """Load an IDX image/label pair; pixels are scaled to [0, 1]."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    n, rows, cols = images.shape
    X = images.reshape(n, rows * cols).astype(np.float64) / 255.0
    names = [f"px{r}_{c}" for r in range(rows) for c in range(cols)]
    return Dataset(X, labels.astype(np.int64), feature_names=names, num_classes=int(labels.max()) + 1)


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 ``images`` (n x rows x cols) and ``labels`` in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


def load_breast_cancer():
    """Wisconsin Diagnostic Breast Cancer (569 x 30) from scikit-learn's bundled copy."""
    from sklearn import datasets

    raw = datasets.load_breast_cancer()
    return Dataset(
        raw.data, raw.target, feature_names=list(raw.feature_names), num_classes=2, class_names=list(raw.target_names)
    )


def load_mnist_5k():
    """The 5000-image MNIST subset shipped with mlxtend (500 per digit), scaled to [0, 1]."""
    from mlxtend.data import mnist_data

    X, y = mnist_data()
    names = [f"px{r}_{c}" for r in range(28) for c in range(28)]
    return Dataset(X / 255.0, y, feature_names=names, num_classes=10)


# normalization and splitting -----------------------------------------------


def normalize_fit(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DataError("normalize_fit needs at least one row")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # exact test on the range; the float mean of a constant column can be off by an ulp
    constant = np.ptp(X, axis=0) == 0
    means[constant] = X[0, constant]
    stds[constant] = 1.0
    return NormStats(means, stds)


def normalize_apply(X, stats):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(stats.means):
        raise ShapeError(f"stats cover {len(stats.means)} columns, X has shape {X.shape}")
    return (X - stats.means) / stats.stds


def split_indices(y, test_fraction, seed):
    """Stratified, seeded train/test index partition."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    y = np.asarray(y)
    rng = np.random.default_rng(int(seed))
    train, test = [], []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < 2:
            raise DataError(f"class {c} has {len(idx)} example(s); a stratified split needs 2")
        idx = rng.permutation(idx)
        n_test = min(max(int(round(len(idx) * test_fraction)), 1), len(idx) - 1)
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(ds, test_fraction, seed):
    tr, te = split_indices(ds.y, test_fraction, seed)
    return ds.subset(tr), ds.subset(te)


def stratified_subsample(ds, n, seed):
    """``n`` rows drawn with per-class proportions preserved."""
    if n >= ds.n:
        return ds
    _, keep = split_indices(ds.y, n / ds.n, seed)
    return ds.subset(keep)


# masking ---------------------------------------------------------------------


def _check_indices(idx, d):
    idx = np.asarray(sorted(idx), dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= d):
        raise DataError(f"feature index out of range 0..{d - 1}")
    return idx


def mask_zero(X, mask, also_zero=()):
    """Zero the inactive columns (and ``also_zero``); width is preserved."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != mask.d:
        raise ShapeError(f"mask covers {mask.d} columns, X has {X.shape[1]}")
    extra = _check_indices(also_zero, mask.d)
    out = X.copy()
    out[:, ~mask.active] = 0.0
    out[:, extra] = 0.0
    return out


def mask_remove(X, mask):
    """Drop the inactive columns, keeping column order."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != mask.d:
        raise ShapeError(f"mask covers {mask.d} columns, X has {X.shape[1]}")
    if mask.count() == 0:
        raise DataError("mask has no active features")
    return X[:, mask.active]
