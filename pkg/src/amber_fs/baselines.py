"""Comparison selectors: Fisher score, CMIM, RFS and FQI.

Every selector returns a :class:`FeatureRanking` whose ``scores`` are
"higher is more salient" and whose ``order`` lists feature ids by
descending score, ties broken by the lower id.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import units as make_units
from .errors import DataError, NumericError, ShapeError

RANKING_VERSION = 1
ROW_NORM_FLOOR = 1e-8
# criterion values closer than this count as tied (plug-in entropies carry ~1e-16 noise)
CMIM_TIE_TOL = 1e-12


@dataclass
class FeatureRanking:
    method: str
    scores: np.ndarray
    order: np.ndarray = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.order is None:
            self.order = order_by_score(self.scores)
        self.order = np.asarray(self.order, dtype=np.int64)

    def top(self, k):
        return np.sort(self.order[:k])

    def to_dict(self):
        extra = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.extra.items()}
        return {
            "version": RANKING_VERSION,
            "kind": "feature_ranking",
            "method": self.method,
            "scores": self.scores.tolist(),
            "order": self.order.tolist(),
            "extra": extra,
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc):
        if doc.get("version") != RANKING_VERSION:
            raise DataError(f"unsupported ranking version {doc.get('version')!r}")
        return cls(doc["method"], np.array(doc["scores"]), np.array(doc["order"]), doc.get("extra", {}))


def order_by_score(scores):
    scores = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(len(scores)), -scores))


def group_scores_sum(scores, groups):
    """Sum member scores per group; ``groups`` is a list of index tuples."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.array([scores[list(g)].sum() for g in groups])


def grouped(ranking, d, groups):
    """Re-rank by unit (group or singleton) using summed member scores."""
    unit_list = make_units(d, groups)
    return FeatureRanking(ranking.method, group_scores_sum(ranking.scores, unit_list), extra={"units": [list(u) for u in unit_list]})


# Fisher score -----------------------------------------------------------------


def fisher_scores(X, y):
    """sum_c n_c (mu_cf - mu_f)^2 / sum_c n_c var_cf, population variances."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] < 2:
        raise DataError("Fisher score needs at least two examples")
    classes = np.unique(y)
    if len(classes) < 2:
        raise DataError("Fisher score needs at least two classes")
    mu = X.mean(axis=0)
    num = np.zeros(X.shape[1])
    den = np.zeros(X.shape[1])
    for c in classes:
        Xc = X[y == c]
        num += len(Xc) * (Xc.mean(axis=0) - mu) ** 2
        den += len(Xc) * Xc.var(axis=0)
    return FeatureRanking("fisher", num / np.maximum(den, 1e-12))


# information-theoretic -----------------------------------------------------------


@dataclass
class DiscretizedMatrix:
    bins: np.ndarray
    bin_count: int


def discretize(X, B=5):
    """Equal-frequency binning per column; values equal to an edge fall in the lower bin."""
    if B < 2:
        raise ValueError("need at least two bins")
    X = np.asarray(X, dtype=np.float64)
    bins = np.empty(X.shape, dtype=np.int64)
    qs = np.arange(1, B) / B
    for j in range(X.shape[1]):
        edges = np.quantile(X[:, j], qs)
        bins[:, j] = np.searchsorted(edges, X[:, j], side="left")
    return DiscretizedMatrix(bins, B)


def _codes(*cols):
    """Joint integer code of several discrete vectors (not necessarily dense)."""
    key = np.zeros(len(cols[0]), dtype=np.int64)
    for c in cols:
        c = np.asarray(c)
        if c.dtype.kind in "iub" and c.size and c.min() >= 0 and c.max() < 1 << 16:
            inv, size = c.astype(np.int64), int(c.max()) + 1
        else:
            _, inv = np.unique(c, return_inverse=True)
            size = int(inv.max()) + 1 if inv.size else 1
        key = key * size + inv
    return key


def _entropy(code):
    if code.size and code.max() < 16 * len(code) + 1024:
        counts = np.bincount(code)
    else:
        counts = np.unique(code, return_counts=True)[1]
    p = counts[counts > 0] / len(code)
    return float(-np.sum(p * np.log(p)))


def mutual_information(a, b):
    """Plug-in I(a; b) in nats."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError("mutual_information needs equal-length vectors")
    mi = _entropy(_codes(a)) + _entropy(_codes(b)) - _entropy(_codes(a, b))
    return max(mi, 0.0)


def conditional_mutual_information(a, b, c):
    """Plug-in I(a; b | c) = H(a,c) + H(b,c) - H(a,b,c) - H(c), in nats."""
    a, b, c = np.asarray(a), np.asarray(b), np.asarray(c)
    if not a.shape == b.shape == c.shape:
        raise ShapeError("conditional_mutual_information needs equal-length vectors")
    cmi = _entropy(_codes(a, c)) + _entropy(_codes(b, c)) - _entropy(_codes(a, b, c)) - _entropy(_codes(c))
    return max(cmi, 0.0)


def cmim_select(D, y, k_select):
    """Greedy CMIM: maximise min_s I(f; y | s) over already selected s.

    ``scores`` are rank-based (``k_select - position`` for selected
    features, 0 otherwise); the criterion values at selection time are in
    ``extra["criterion"]``.
    """
    bins = D.bins if isinstance(D, DiscretizedMatrix) else np.asarray(D)
    d = bins.shape[1]
    if not 1 <= k_select <= d:
        raise ValueError(f"k_select must be in 1..{d}")
    y = np.asarray(y)
    # partial[f] is min over selected s of I(f; y | s); starts at I(f; y)
    partial = np.array([mutual_information(bins[:, f], y) for f in range(d)])
    selected, criterion = [], []
    free = np.ones(d, dtype=bool)
    for _ in range(k_select):
        cand = np.flatnonzero(free)
        vals = partial[cand]
        best = cand[np.flatnonzero(vals >= vals.max() - CMIM_TIE_TOL)[0]]
        selected.append(int(best))
        criterion.append(float(partial[best]))
        free[best] = False
        for f in np.flatnonzero(free):
            if partial[f] > 0:
                partial[f] = min(partial[f], conditional_mutual_information(bins[:, f], y, bins[:, best]))
    scores = np.zeros(d)
    scores[selected] = k_select - np.arange(k_select)
    rest = [f for f in range(d) if f not in set(selected)]
    return FeatureRanking("cmim", scores, np.array(selected + rest), {"criterion": criterion, "selected": selected})


# RFS -------------------------------------------------------------------------


def rfs_objective(X, Y, W, gamma):
    return float(np.linalg.norm(X @ W - Y, axis=1).sum() + gamma * np.linalg.norm(W, axis=1).sum())


def _rfs_step(X, Y, gamma, dr, dw):
    """argmin_W  tr((XW-Y)' Dr (XW-Y)) + gamma tr(W' Dw W) for diagonal Dr, Dw.

    Solves the d x d normal equations, or the equivalent n x n system
    ``W = Dw^-1 X' (X Dw^-1 X' + gamma Dr^-1)^-1 Y`` when n < d.
    """
    n, d = X.shape
    if d <= n:
        lhs = X.T @ (dr[:, None] * X) + gamma * np.diag(dw)
        return np.linalg.solve(lhs, X.T @ (dr[:, None] * Y))
    XD = X / dw
    lhs = XD @ X.T + gamma * np.diag(1.0 / dr)
    return XD.T @ np.linalg.solve(lhs, Y)


def rfs_scores(X, y, gamma=1.0, iterations=50, tolerance=1e-6, num_classes=None):
    """Row norms of W minimising ||XW - Y||_{2,1} + gamma ||W||_{2,1}.

    Solved by iteratively reweighted least squares; ``extra["objective"]``
    records the objective after every iterate.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    c = int(num_classes or y.max() + 1)
    Y = np.zeros((len(y), c))
    Y[np.arange(len(y)), y] = 1.0

    dr = np.ones(X.shape[0])
    dw = np.ones(X.shape[1])
    history = []
    W = None
    for it in range(int(iterations) + 1):
        try:
            W = _rfs_step(X, Y, gamma, dr, dw)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"RFS linear solve failed at iteration {it}: {exc}") from exc
        if not np.all(np.isfinite(W)):
            raise NumericError(f"RFS produced non-finite weights at iteration {it}")
        history.append(rfs_objective(X, Y, W, gamma))
        if it > 0 and history[-2] - history[-1] < tolerance:
            break
        dr = 1.0 / (2.0 * np.maximum(np.linalg.norm(X @ W - Y, axis=1), ROW_NORM_FLOOR))
        dw = 1.0 / (2.0 * np.maximum(np.linalg.norm(W, axis=1), ROW_NORM_FLOOR))
    return FeatureRanking("rfs", np.linalg.norm(W, axis=1), extra={"gamma": gamma, "objective": history})


def rfs_sweep(X_train, y_train, X_val, y_val, gammas, k_keep, architecture, train_config, seed=0, num_classes=None):
    """Pick gamma by validation accuracy of a model trained on the top ``k_keep`` features.

    Returns ``(best_gamma, ranking)``; ties go to the smaller gamma.
    """
    gammas = sorted({float(g) for g in gammas})
    if not gammas:
        raise ValueError("empty gamma list")
    best = None
    for g in gammas:
        ranking = rfs_scores(X_train, y_train, gamma=g, num_classes=num_classes)
        keep = ranking.top(k_keep)
        net = nn.init_network(architecture.build(len(keep)), seed=seed)
        net, _ = nn.train(net, X_train[:, keep], y_train, train_config.replace(seed=seed))
        acc = nn.evaluate_accuracy(net, X_val[:, keep], y_val)
        if best is None or acc > best[0]:
            best = (acc, g, ranking)
    acc, g, ranking = best
    ranking.extra["validation_accuracy"] = acc
    return g, ranking


# FQI -------------------------------------------------------------------------


def fqi_scores(model, X, groups=None):
    """sum_j ||o_j - o_j^i||^2 where o_j^i is the output with feature i zeroed.

    With ``groups`` (list of index tuples) each group is zeroed jointly
    and scored as one unit.
    """
    X = np.asarray(X, dtype=np.float64)
    units = [(i,) for i in range(X.shape[1])] if groups is None else [tuple(g) for g in groups]
    base = nn.forward(model, X)
    z1 = nn.first_preactivation(model, X)
    W1 = model.weights[0]
    scores = np.empty(len(units))
    for u, g in enumerate(units):
        g = list(g)
        out = nn.forward_from_first(model, z1 - X[:, g] @ W1[:, g].T)
        scores[u] = np.sum((base - out) ** 2)
    return FeatureRanking("fqi", scores)
