"""Benchmark harness: accuracy curves, top-10% comparison tables and ranking timings.

Every method in a run sees the same normalized train/test matrices, and
final models are initialized from the same run-derived seed, so accuracy
differences come from the selected features alone.
"""
from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import amber, baselines, nn
from ._util import FINAL, RANKER, SPLIT, VALIDATION, derive_seed
from .data import normalize_apply, normalize_fit, split, split_indices, units as make_units
from .errors import ConfigError, DataError
from .nn import Architecture, TrainConfig

METHODS = ("fisher", "cmim", "rfs", "fqi", "amber", "amber_relevance_only", "amber_retrain")


@dataclass
class Protocol:
    """Everything besides the data and seeds that a benchmark run depends on."""

    rm_arch: Architecture
    final_arch: Architecture
    rm_train: TrainConfig
    final_train: TrainConfig
    ae_train: TrainConfig = field(default_factory=amber.default_ae_train)
    test_fraction: float = 0.2
    score_rows: int | None = None
    step: int = 1
    overfit_rm: bool = False
    cmim_bins: int = 5
    rfs_gammas: tuple = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)
    rfs_iterations: int = 50
    fqi_joint: bool = True

    def amber_config(self, method, k, seed):
        return amber.AmberConfig.variant(
            method,
            k,
            rm_train=self.rm_train,
            ae_train=self.ae_train,
            overfit_mode=self.overfit_rm,
            seed=seed,
            score_rows=self.score_rows,
            step=self.step,
        )


def cancer_protocol():
    """Dense 16-8-6-1 sigmoid network as both ranker and final model.

    The ranker is deliberately overfit: 2000 epochs on the full training
    set with no early stopping. Final models stop early with patience 5.
    """
    arch = Architecture([16, 8, 6, 1], output="sigmoid")
    final_tc = TrainConfig(loss="binary_cross_entropy", learning_rate=0.05, batch_size=16, max_epochs=300, patience=5)
    return Protocol(
        rm_arch=arch,
        final_arch=arch,
        rm_train=final_tc.replace(max_epochs=2000),
        final_train=final_tc,
        overfit_rm=True,
    )


def mnist_protocol():
    """MLP ranker (128-10) and a 512-512-10 final model, softmax outputs.

    Scoring 784 candidates one at a time is out of reach on one core, so
    the autoencoder and both scores use 1000 sampled training rows and 16
    pixels are removed per scoring round.
    """
    rm_tc = TrainConfig(loss="cross_entropy", learning_rate=0.05, batch_size=32, max_epochs=100, patience=5)
    return Protocol(
        rm_arch=Architecture([128, 10], output="softmax"),
        final_arch=Architecture([512, 512, 10], output="softmax"),
        rm_train=rm_tc,
        final_train=rm_tc,
        ae_train=TrainConfig(loss="mse", learning_rate=0.01, batch_size=32, max_epochs=20, patience=3),
        score_rows=1000,
        step=16,
    )


@dataclass
class CurvePoint:
    method: str
    feature_count: int
    mean_accuracy: float
    per_run_accuracies: list


@dataclass
class Timing:
    method: str
    seconds: float
    std: float
    samples: list


@dataclass
class BenchReport:
    k_keep: int
    seeds: list
    rows: dict  # method -> {"accuracy_at_top_10pct", "per_run", "ranking_seconds"}

    @property
    def runs(self):
        return len(self.seeds)

    def accuracy(self, method):
        return self.rows[method]["accuracy_at_top_10pct"]


@dataclass
class RankResult:
    order: list  # unit ids, most salient first
    seconds: float
    detail: object = None


def prepare_run(ds, test_fraction, seed):
    """Stratified split then train-fitted normalization of both sides."""
    train, test = split(ds, test_fraction, derive_seed(seed, SPLIT))
    stats = normalize_fit(train.X)
    return train.with_X(normalize_apply(train.X, stats)), test.with_X(normalize_apply(test.X, stats))


def top_fraction(n_units, fraction=0.10):
    return max(1, int(round(fraction * n_units)))


def selected_features(unit_list, order, count):
    return sorted(f for u in order[:count] for f in unit_list[u])


def final_accuracy(train, test, selected, final_arch, train_cfg, seed):
    """Test accuracy of a final model trained on the ``selected`` columns only."""
    selected = sorted(int(f) for f in selected)
    if not selected:
        raise DataError("final model needs at least one selected feature")
    net = nn.init_network(final_arch.build(len(selected)), seed=derive_seed(seed, FINAL))
    tc = train_cfg.replace(patience=5, seed=derive_seed(seed, FINAL, 1))
    net, _ = nn.train(net, train.X[:, selected], train.y, tc)
    return nn.evaluate_accuracy(net, test.X[:, selected], test.y)


def _feature_order_to_units(ranking, train):
    if not train.groups:
        return [int(f) for f in ranking.order]
    return [int(u) for u in baselines.grouped(ranking, train.d, train.groups).order]


def rank_units(method, train, protocol, seed, keep):
    """Order the units of ``train`` for ``method``; only the first ``keep`` must be exact.

    Returns a :class:`RankResult` with the wall-clock time of the ranking phase.
    """
    unit_list = make_units(train.d, train.groups)
    rm_spec = protocol.rm_arch.build(train.d)
    t0 = time.perf_counter()
    detail = None
    if method in amber.VARIANTS:
        cfg = protocol.amber_config(method, len(unit_list) - keep, derive_seed(seed, RANKER))
        detail = amber.run(train, rm_spec, cfg)
        order = detail.ranking()
    elif method == "fisher":
        detail = baselines.fisher_scores(train.X, train.y)
        order = _feature_order_to_units(detail, train)
    elif method == "cmim":
        D = baselines.discretize(train.X, protocol.cmim_bins)
        k_select = train.d if train.groups else max(1, min(train.d, keep))
        detail = baselines.cmim_select(D, train.y, k_select)
        order = _feature_order_to_units(detail, train)
    elif method == "rfs":
        tr_idx, va_idx = split_indices(train.y, 0.2, derive_seed(seed, VALIDATION))
        keep_features = len(selected_features(unit_list, list(range(len(unit_list))), keep))
        gamma, _ = baselines.rfs_sweep(
            train.X[tr_idx], train.y[tr_idx], train.X[va_idx], train.y[va_idx], protocol.rfs_gammas,
            keep_features, protocol.final_arch, protocol.final_train, seed=derive_seed(seed, VALIDATION, 1),
            num_classes=train.num_classes,
        )
        detail = baselines.rfs_scores(train.X, train.y, gamma, protocol.rfs_iterations, num_classes=train.num_classes)
        order = _feature_order_to_units(detail, train)
    elif method == "fqi":
        # same initialization and training stream as the AMBER ranker of this run
        cfg = protocol.amber_config("amber", 1, derive_seed(seed, RANKER))
        rm, _ = amber.train_ranker(train, rm_spec, cfg)
        if protocol.fqi_joint and train.groups:
            detail = baselines.fqi_scores(rm, train.X, unit_list)
            order = [int(u) for u in detail.order]
        else:
            detail = baselines.fqi_scores(rm, train.X)
            order = _feature_order_to_units(detail, train)
    else:
        raise ConfigError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    return RankResult(order, time.perf_counter() - t0, detail)


def accuracy_curve(method, ds, feature_counts, seeds, protocol):
    """Mean final-model accuracy at each count (counts are units when groups exist)."""
    counts = [int(c) for c in feature_counts]
    n_units = len(make_units(ds.d, ds.groups))
    if not counts or any(c < 1 or c > n_units for c in counts):
        raise ConfigError(f"feature counts must lie in 1..{n_units}")
    if any(a <= b for a, b in zip(counts, counts[1:])):
        raise ConfigError("feature counts must be strictly decreasing")
    if not seeds:
        raise ConfigError("need at least one run")
    per_count = {c: [] for c in counts}
    for seed in seeds:
        train, test = prepare_run(ds, protocol.test_fraction, seed)
        unit_list = make_units(train.d, train.groups)
        min_count = min(counts)
        if min_count == n_units:
            order = list(range(n_units))
        else:
            order = rank_units(method, train, protocol, seed, min_count).order
        for c in counts:
            sel = selected_features(unit_list, order, c)
            per_count[c].append(final_accuracy(train, test, sel, protocol.final_arch, protocol.final_train, seed))
    return [CurvePoint(method, c, float(np.mean(v)), v) for c, v in per_count.items()]


def compare_table(methods, ds, seeds, protocol, k_keep=None):
    """Accuracy with the top 10% of units for each method, plus ranking time."""
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigError(f"unknown methods {unknown}")
    if not seeds:
        raise ConfigError("need at least one run")
    n_units = len(make_units(ds.d, ds.groups))
    k_keep = top_fraction(n_units) if k_keep is None else int(k_keep)
    rows = {m: {"per_run": [], "seconds": [], "selected": []} for m in methods}
    for seed in seeds:
        train, test = prepare_run(ds, protocol.test_fraction, seed)
        unit_list = make_units(train.d, train.groups)
        for m in methods:
            res = rank_units(m, train, protocol, seed, k_keep)
            sel = selected_features(unit_list, res.order, k_keep)
            acc = final_accuracy(train, test, sel, protocol.final_arch, protocol.final_train, seed)
            rows[m]["per_run"].append(acc)
            rows[m]["seconds"].append(res.seconds)
            rows[m]["selected"].append(sel)
    out = {
        m: {
            "accuracy_at_top_10pct": float(np.mean(r["per_run"])),
            "per_run": r["per_run"],
            "ranking_seconds": float(np.mean(r["seconds"])),
            "selected": r["selected"],
        }
        for m, r in rows.items()
    }
    return BenchReport(k_keep, list(seeds), out)


def time_ranking(method, ds, protocol, seed=0, repeats=1):
    """Wall-clock seconds to rank every unit (AMBER eliminates all but one).

    Data preparation and final-model training are excluded. Measurements
    run one after another on the calling thread.
    """
    train, _ = prepare_run(ds, protocol.test_fraction, seed)
    samples = [rank_units(method, train, protocol, seed, 1).seconds for _ in range(max(1, int(repeats)))]
    std = statistics.stdev(samples) if len(samples) > 1 else 0.0
    return Timing(method, float(np.mean(samples)), std, samples)


# output files -----------------------------------------------------------------


def write_curve_csv(points, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "feature_count", "run", "accuracy"])
        for p in points:
            for run, acc in enumerate(p.per_run_accuracies):
                w.writerow([p.method, p.feature_count, run, repr(acc)])


def write_table_csv(report, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "accuracy", "seconds"])
        for m, r in report.rows.items():
            w.writerow([m, repr(r["accuracy_at_top_10pct"]), f"{r['ranking_seconds']:.6f}"])


def write_timing_csv(timings, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "seconds", "std", "repeats"])
        for t in timings:
            w.writerow([t.method, f"{t.seconds:.6f}", f"{t.std:.6f}", len(t.samples)])


def write_summary(obj, path):
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.integer, np.floating)):
            return o.item()
        return asdict(o)

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, default=default)
