"""Autoencoder and model based backward elimination.

A ranker model (RM) is trained once on all features. Each elimination
round then

1. zeroes the already-eliminated features in the RM's input and records
   the RM loss with each remaining candidate additionally zeroed
   (relevance, higher is more important);
2. trains a fresh undercomplete autoencoder on the surviving columns and
   records its reconstruction error with each candidate zeroed
   (redundancy, lower means the candidate is easier to infer from the
   others);
3. divides both score vectors by their ranges, adds them, and removes
   the candidate with the smallest sum.

Candidates are "units": single features, or whole feature groups that
must be removed together.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from ._util import AE, RM, derive_seed, map_ordered
from .data import FeatureMask, mask_remove, mask_zero, units as make_units
from .errors import ConfigError, DataError, LogicError
from .nn import LayerSpec, TrainConfig

TRACE_VERSION = 1
VARIANTS = ("amber", "amber_relevance_only", "amber_retrain")


def default_rm_train():
    return TrainConfig(loss="binary_cross_entropy", learning_rate=0.05, batch_size=16, max_epochs=300, patience=5)


def default_ae_train():
    return TrainConfig(loss="mse", learning_rate=0.01, batch_size=32, max_epochs=100, patience=5)


@dataclass
class AmberConfig:
    k: int
    use_redundancy: bool = True
    retrain_rm: bool = False
    overfit_mode: bool = False
    rm_train: TrainConfig = field(default_factory=default_rm_train)
    ae_train: TrainConfig = field(default_factory=default_ae_train)
    seed: int = 0
    # rows used to train the autoencoder and to compute both scores; None means all
    score_rows: int | None = None
    # units removed per scoring round; 1 is one-at-a-time elimination
    step: int = 1

    def __post_init__(self):
        if int(self.step) < 1:
            raise ConfigError("step must be at least 1")

    @classmethod
    def variant(cls, name, k, **kw):
        """Config for one of the named variants (see ``VARIANTS``)."""
        if name == "amber":
            return cls(k=k, **kw)
        if name == "amber_relevance_only":
            return cls(k=k, use_redundancy=False, **kw)
        if name == "amber_retrain":
            return cls(k=k, retrain_rm=True, **kw)
        raise ConfigError(f"unknown AMBER variant {name!r}")


@dataclass
class SaliencyScores:
    candidates: list
    relevance: np.ndarray
    redundancy: np.ndarray | None
    saliency: np.ndarray


@dataclass
class Iteration:
    iteration: int
    eliminated: int
    features: tuple
    scores: SaliencyScores
    seconds: float
    ae_hidden: int | None = None
    round: int = None

    def __post_init__(self):
        if self.round is None:
            self.round = self.iteration


@dataclass
class EliminationTrace:
    units: list
    iterations: list
    final_mask: FeatureMask
    rm_report: nn.TrainReport | None = None

    def eliminated_units(self):
        return [it.eliminated for it in self.iterations]

    def ranking(self):
        """Unit ids from most to least salient: survivors by id, then eliminations in reverse."""
        gone = self.eliminated_units()
        survivors = [u for u in range(len(self.units)) if u not in set(gone)]
        return survivors + gone[::-1]

    def to_dict(self):
        return {
            "version": TRACE_VERSION,
            "kind": "elimination_trace",
            "units": [list(u) for u in self.units],
            "iterations": [
                {
                    "iteration": it.iteration,
                    "eliminated": it.eliminated,
                    "features": list(it.features),
                    "candidates": list(it.scores.candidates),
                    "relevance": it.scores.relevance.tolist(),
                    "redundancy": None if it.scores.redundancy is None else it.scores.redundancy.tolist(),
                    "saliency": it.scores.saliency.tolist(),
                    "seconds": it.seconds,
                    "ae_hidden": it.ae_hidden,
                    "round": it.round,
                }
                for it in self.iterations
            ],
            "final_mask": self.final_mask.active.astype(int).tolist(),
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc):
        if doc.get("version") != TRACE_VERSION:
            raise DataError(f"unsupported trace version {doc.get('version')!r}")
        its = []
        for r in doc["iterations"]:
            red = r["redundancy"]
            scores = SaliencyScores(
                r["candidates"], np.array(r["relevance"]), None if red is None else np.array(red), np.array(r["saliency"])
            )
            its.append(
                Iteration(
                    r["iteration"], r["eliminated"], tuple(r["features"]), scores, r["seconds"], r.get("ae_hidden"), r.get("round")
                )
            )
        return cls([tuple(u) for u in doc["units"]], its, FeatureMask(np.array(doc["final_mask"], dtype=bool)))


def _rm_train_config(cfg, iteration):
    tc = cfg.rm_train.replace(seed=derive_seed(cfg.seed, RM, iteration, 1))
    if cfg.overfit_mode:
        tc = tc.replace(patience=0, validation_fraction=0.0)
    return tc


def train_ranker(train, rm_spec, cfg, iteration=0, X=None):
    """Train the ranker model on ``train`` (or on ``X`` in place of ``train.X``).

    Returns ``(rm, report)``. With ``overfit_mode`` the model is trained on
    the whole set for exactly ``rm_train.max_epochs`` epochs.
    """
    X = train.X if X is None else X
    rm = nn.init_network(rm_spec, seed=derive_seed(cfg.seed, RM, iteration, 0))
    if rm.input_width != X.shape[1]:
        raise ConfigError(f"ranker expects {rm.input_width} inputs, data has {X.shape[1]} features")
    return nn.train(rm, X, train.y, _rm_train_config(cfg, iteration))


def relevance_scores(rm, X, y, eliminated, candidates, loss):
    """RM mean loss with ``eliminated`` plus each candidate's features zeroed.

    ``candidates`` is a list of feature-index tuples.
    """
    Xz = mask_zero(X, eliminated)
    inactive = set(eliminated.inactive().tolist())
    for g in candidates:
        if inactive.intersection(g):
            raise LogicError(f"candidate {tuple(g)} overlaps already eliminated features")
    T = nn.target_matrix(y, rm.output_width, loss)
    z1 = nn.first_preactivation(rm, Xz)
    W1 = rm.weights[0]

    def score(g):
        g = list(g)
        out = nn.forward_from_first(rm, z1 - Xz[:, g] @ W1[:, g].T)
        return float(np.mean(nn._per_example_loss(out, T, loss)))

    return np.array(map_ordered(score, candidates))


def autoencoder_specs(m):
    if m < 2:
        raise ConfigError(f"an undercomplete autoencoder needs at least 2 inputs, got {m}")
    return [LayerSpec(m, m - 1, "relu"), LayerSpec(m - 1, m, "linear")]


def train_autoencoder(active_data, cfg, iteration=0):
    """Fresh ``m -> m-1 (relu) -> m (linear)`` autoencoder fitted with MSE."""
    A = np.asarray(active_data, dtype=np.float64)
    specs = autoencoder_specs(A.shape[1])
    ae = nn.init_network(specs, seed=derive_seed(cfg.seed, AE, iteration, 0))
    tc = cfg.ae_train.replace(loss="mse", seed=derive_seed(cfg.seed, AE, iteration, 1))
    return nn.train(ae, A, A, tc)


def redundancy_scores(ae, active_data, candidates):
    """Reconstruction MSE (over all entries) with each candidate's columns zeroed.

    The error is measured against the original, un-zeroed data.
    ``candidates`` holds position tuples within the active columns.
    """
    A = np.asarray(active_data, dtype=np.float64)
    m = A.shape[1]
    if ae.input_width != m:
        raise DataError(f"autoencoder expects {ae.input_width} columns, data has {m}")
    for g in candidates:
        if any(p < 0 or p >= m for p in g):
            raise DataError(f"candidate {tuple(g)} outside 0..{m - 1}")
    z1 = nn.first_preactivation(ae, A)
    W1 = ae.weights[0]

    def score(g):
        g = list(g)
        out = nn.forward_from_first(ae, z1 - A[:, g] @ W1[:, g].T)
        return float(np.mean((out - A) ** 2))

    return np.array(map_ordered(score, candidates))


def _range_normalize(v):
    v = np.asarray(v, dtype=np.float64)
    r = v.max() - v.min() if v.size else 0.0
    if r == 0:
        return np.zeros_like(v)
    return v / r


def combine_saliency(relevance, redundancy=None):
    """``relevance / range(relevance) + redundancy / range(redundancy)``.

    A zero-range vector contributes nothing.

    >>> combine_saliency([0, 1, 2], [10, 20, 30]).tolist()
    [0.5, 1.5, 2.5]
    """
    out = _range_normalize(relevance)
    if redundancy is not None:
        if len(redundancy) != len(out):
            raise DataError("relevance and redundancy lengths differ")
        out = out + _range_normalize(redundancy)
    return out


def eliminate_one(scores):
    """Candidate id with the lowest saliency; ties go to the lowest id."""
    return eliminate_lowest(scores, 1)[0]


def eliminate_lowest(scores, count):
    """The ``count`` candidate ids with the lowest saliency, lowest first."""
    if len(scores.candidates) == 0:
        raise DataError("no candidates to eliminate")
    ranked = sorted(range(len(scores.candidates)), key=lambda i: (scores.saliency[i], scores.candidates[i]))
    return [scores.candidates[i] for i in ranked[:count]]


def _score_rows(n, cfg):
    if cfg.score_rows is None or cfg.score_rows >= n:
        return slice(None)
    rng = np.random.default_rng(derive_seed(cfg.seed, AE, 0, 2))
    return np.sort(rng.choice(n, size=int(cfg.score_rows), replace=False))


def run(train, rm_spec, cfg, rm=None):
    """Eliminate ``cfg.k`` units from ``train`` (already normalized).

    ``rm`` may be a pre-trained ranker; otherwise one is trained here.
    """
    d = train.d
    unit_list = make_units(d, train.groups)
    if not 1 <= cfg.k < len(unit_list):
        raise ConfigError(f"k must satisfy 1 <= k < {len(unit_list)} (number of eliminable units), got {cfg.k}")
    loss = cfg.rm_train.loss
    rm_report = None
    if rm is None and not cfg.retrain_rm:
        rm, rm_report = train_ranker(train, rm_spec, cfg)

    rows = _score_rows(train.n, cfg)
    Xs, ys = train.X[rows], train.y[rows]
    mask = FeatureMask.full(d)
    remaining = list(range(len(unit_list)))
    iterations = []
    rnd = 0
    while len(iterations) < cfg.k:
        t0 = time.perf_counter()
        if cfg.retrain_rm:
            rm, rm_report = train_ranker(train, rm_spec, cfg, iteration=rnd, X=mask_zero(train.X, mask))
        groups = [unit_list[u] for u in remaining]
        relevance = relevance_scores(rm, Xs, ys, mask, groups, loss)

        redundancy = None
        hidden = None
        if cfg.use_redundancy:
            active = mask.active_indices()
            pos = {f: p for p, f in enumerate(active)}
            A = mask_remove(Xs, mask)
            ae, _ = train_autoencoder(A, cfg, iteration=rnd)
            hidden = ae.specs[0].output_width
            redundancy = redundancy_scores(ae, A, [tuple(pos[f] for f in g) for g in groups])

        scores = SaliencyScores(list(remaining), relevance, redundancy, combine_saliency(relevance, redundancy))
        victims = eliminate_lowest(scores, min(cfg.step, cfg.k - len(iterations)))
        seconds = (time.perf_counter() - t0) / len(victims)
        for victim in victims:
            mask = mask.without(unit_list[victim])
            remaining.remove(victim)
            iterations.append(Iteration(len(iterations), victim, unit_list[victim], scores, seconds, hidden, rnd))
        rnd += 1
    return EliminationTrace(unit_list, iterations, mask, rm_report)
