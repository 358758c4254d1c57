"""Batch command-line front end.

Each command reads one JSON or YAML configuration, validates it before
doing any work, writes its outputs plus a ``manifest.json`` into the
output directory and prints a short fixed-format summary.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import platform
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, amber, baselines, data, evaluation as ev, synthetic
from .errors import AmberError, ConfigError, DataError, IngestionError
from .nn import Architecture, TrainConfig

COMMANDS = ("select", "curve", "compare", "bench-time", "gen-synthetic")
DATASET_KINDS = ("csv", "idx", "synthetic", "builtin")
BUILTINS = ("cancer", "mnist5k")
PROTOCOLS = {"cancer": ev.cancer_protocol, "mnist": ev.mnist_protocol}

DATASET_KEYS = {
    "kind", "path", "images", "labels", "label_column", "has_header", "groups", "pair_width",
    "name", "generator", "n", "seed", "params", "subsample",
}
TOP_KEYS = {
    "dataset", "method", "methods", "protocol", "rm_spec", "final_spec", "rm_train", "final_train",
    "ae_train", "amber", "baselines", "test_fraction", "k", "k_keep", "feature_counts", "runs", "seed",
    "seeds", "repeats", "out",
}
SPEC_KEYS = {"widths", "output", "hidden"}
AMBER_KEYS = {"score_rows", "step", "overfit_rm"}
BASELINE_KEYS = {"cmim_bins", "rfs_gammas", "rfs_iterations", "fqi_joint"}
TRAIN_KEYS = {f.name for f in fields(TrainConfig)}


@dataclass
class RunConfig:
    """A validated configuration. ``raw`` is the echo written to the manifest."""

    command: str
    dataset: dict
    protocol: ev.Protocol
    methods: list
    seeds: list
    out: Path
    k: int | None = None
    k_keep: int | None = None
    feature_counts: list = None
    repeats: int = 1
    raw: dict = field(default_factory=dict)


# config parsing ----------------------------------------------------------------


def read_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            import yaml

            doc = yaml.safe_load(text)
        else:
            doc = json.loads(text)
    except Exception as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping at the top level")
    return doc


def _reject_unknown(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a mapping")
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown field {where + '.' if where else ''}{key}")


def _int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def _train_config(base, doc, name):
    if doc is None:
        return base
    _reject_unknown(doc, TRAIN_KEYS, name)
    try:
        return base.replace(**doc)
    except ConfigError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _architecture(base, doc, name):
    if doc is None:
        return base
    _reject_unknown(doc, SPEC_KEYS, name)
    widths = doc.get("widths", base.widths)
    if not isinstance(widths, list) or not widths:
        raise ConfigError(f"{name}.widths must be a non-empty list")
    widths = [_int(w, f"{name}.widths", 1) for w in widths]
    return Architecture(widths, output=doc.get("output", base.output), hidden=doc.get("hidden", base.hidden))


def _check_dataset(doc):
    _reject_unknown(doc, DATASET_KEYS, "dataset")
    kind = doc.get("kind")
    if kind not in DATASET_KINDS:
        raise ConfigError(f"dataset.kind must be one of {', '.join(DATASET_KINDS)}, got {kind!r}")
    need = {"csv": ["path"], "idx": ["images", "labels"], "synthetic": ["generator"], "builtin": ["name"]}[kind]
    for key in need:
        if key not in doc:
            raise ConfigError(f"dataset.{key} is required for kind {kind}")
    if kind == "builtin" and doc["name"] not in BUILTINS:
        raise ConfigError(f"dataset.name must be one of {', '.join(BUILTINS)}")
    if kind == "synthetic" and doc["generator"] not in synthetic.GENERATORS:
        raise ConfigError(f"dataset.generator must be one of {', '.join(synthetic.GENERATORS)}")
    if "groups" in doc and "pair_width" in doc:
        raise ConfigError("dataset.groups and dataset.pair_width are mutually exclusive")
    if "subsample" in doc:
        _int(doc["subsample"], "dataset.subsample", 2)
    return dict(doc)


def build_config(command, doc, overrides=None):
    """Validate ``doc`` (plus flag ``overrides``) into a :class:`RunConfig`."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    doc = copy.deepcopy(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value
    _reject_unknown(doc, TOP_KEYS, "")
    out = Path(doc.get("out", "out"))
    if command == "gen-synthetic":
        if "dataset" not in doc:
            raise ConfigError("dataset is required")
        ds = _check_dataset(doc["dataset"])
        if ds["kind"] != "synthetic":
            raise ConfigError("gen-synthetic needs dataset.kind = synthetic")
        seed = _int(doc.get("seed", ds.get("seed", 0)), "seed", 0)
        return RunConfig(command, ds, None, [], [seed], out, raw=doc)

    if "dataset" not in doc:
        raise ConfigError("dataset is required")
    ds = _check_dataset(doc["dataset"])

    pname = doc.get("protocol", "cancer")
    if pname not in PROTOCOLS:
        raise ConfigError(f"protocol must be one of {', '.join(PROTOCOLS)}, got {pname!r}")
    p = PROTOCOLS[pname]()
    p.rm_arch = _architecture(p.rm_arch, doc.get("rm_spec"), "rm_spec")
    p.final_arch = _architecture(p.final_arch, doc.get("final_spec"), "final_spec")
    p.rm_train = _train_config(p.rm_train, doc.get("rm_train"), "rm_train")
    p.final_train = _train_config(p.final_train, doc.get("final_train"), "final_train")
    p.ae_train = _train_config(p.ae_train, doc.get("ae_train"), "ae_train")
    if "amber" in doc:
        _reject_unknown(doc["amber"], AMBER_KEYS, "amber")
        a = doc["amber"]
        if a.get("score_rows") is not None:
            p.score_rows = _int(a["score_rows"], "amber.score_rows", 2)
        if "step" in a:
            p.step = _int(a["step"], "amber.step", 1)
        if "overfit_rm" in a:
            p.overfit_rm = bool(a["overfit_rm"])
    if "baselines" in doc:
        _reject_unknown(doc["baselines"], BASELINE_KEYS, "baselines")
        b = doc["baselines"]
        if "cmim_bins" in b:
            p.cmim_bins = _int(b["cmim_bins"], "baselines.cmim_bins", 2)
        if "rfs_gammas" in b:
            gammas = b["rfs_gammas"]
            if not isinstance(gammas, list) or not gammas or any(not float(g) > 0 for g in gammas):
                raise ConfigError("baselines.rfs_gammas must be a non-empty list of positive numbers")
            p.rfs_gammas = tuple(float(g) for g in gammas)
        if "rfs_iterations" in b:
            p.rfs_iterations = _int(b["rfs_iterations"], "baselines.rfs_iterations", 1)
        if "fqi_joint" in b:
            p.fqi_joint = bool(b["fqi_joint"])
    if "test_fraction" in doc:
        tf = float(doc["test_fraction"])
        if not 0.0 < tf < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        p.test_fraction = tf

    if "method" in doc and "methods" in doc:
        raise ConfigError("give either method or methods, not both")
    methods = doc.get("methods", [doc["method"]] if "method" in doc else None)
    if not methods:
        raise ConfigError("method (or methods) is required")
    if not isinstance(methods, list):
        raise ConfigError("methods must be a list")
    for m in methods:
        if m not in ev.METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {', '.join(ev.METHODS)}")
    if command == "select" and len(methods) != 1:
        raise ConfigError("select takes exactly one method")

    if "seeds" in doc:
        seeds = doc["seeds"]
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("seeds must be a non-empty list")
        seeds = [_int(s, "seeds", 0) for s in seeds]
    else:
        seed = _int(doc.get("seed", 0), "seed", 0)
        runs = _int(doc.get("runs", 1), "runs", 1)
        seeds = [seed + i for i in range(runs)]

    cfg = RunConfig(command, ds, p, list(methods), seeds, out, raw=doc)
    if command == "select":
        if "k" not in doc:
            raise ConfigError("k is required for select")
        cfg.k = _int(doc["k"], "k", 1)
    if command == "curve":
        counts = doc.get("feature_counts")
        if not isinstance(counts, list) or not counts:
            raise ConfigError("feature_counts must be a non-empty list")
        cfg.feature_counts = [_int(c, "feature_counts", 1) for c in counts]
        if any(a <= b for a, b in zip(cfg.feature_counts, cfg.feature_counts[1:])):
            raise ConfigError("feature_counts must be strictly decreasing")
    if command == "compare" and doc.get("k_keep") is not None:
        cfg.k_keep = _int(doc["k_keep"], "k_keep", 1)
    if command == "bench-time":
        cfg.repeats = _int(doc.get("repeats", 1), "repeats", 1)
    return cfg


# dataset loading --------------------------------------------------------------


def load_dataset(spec, seed=0):
    kind = spec["kind"]
    if kind == "csv":
        ds = data.load_csv(spec["path"], spec.get("label_column", -1), spec.get("has_header", True))
    elif kind == "idx":
        ds = data.load_idx(spec["images"], spec["labels"])
    elif kind == "synthetic":
        n = _int(spec.get("n", 500), "dataset.n", 4)
        ds = synthetic.generate(spec["generator"], n=n, seed=spec.get("seed", seed), **spec.get("params", {}))
    else:
        ds = data.load_breast_cancer() if spec["name"] == "cancer" else data.load_mnist_5k()
    if "pair_width" in spec:
        ds.groups = data.validate_groups(data.pair_groups(_int(spec["pair_width"], "dataset.pair_width", 1)), ds.d)
    elif "groups" in spec:
        ds.groups = data.validate_groups(spec["groups"], ds.d)
    if "subsample" in spec:
        ds = data.stratified_subsample(ds, spec["subsample"], spec.get("seed", 0))
    return ds


# output ----------------------------------------------------------------------


def _prepare_out(cfg):
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {cfg.out}: {exc}") from None


def write_manifest(cfg, extra=None):
    doc = {
        "command": cfg.command,
        "config": cfg.raw,
        "seeds": cfg.seeds,
        "artifact_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if cfg.protocol is not None:
        doc["protocol"] = asdict(cfg.protocol)
    doc.update(extra or {})
    ev.write_summary(doc, cfg.out / "manifest.json")


# commands --------------------------------------------------------------------


def cmd_select(cfg, stream=sys.stdout):
    """Rank (or eliminate ``k`` units of) the whole dataset, normalized as one block."""
    _prepare_out(cfg)
    ds = load_dataset(cfg.dataset, cfg.seeds[0])
    n_units = len(data.units(ds.d, ds.groups))
    if not 1 <= cfg.k < n_units:
        raise ConfigError(f"k must satisfy 1 <= k < {n_units} (at least one unit must remain), got {cfg.k}")
    train = ds.with_X(data.normalize_apply(ds.X, data.normalize_fit(ds.X)))
    method, seed = cfg.methods[0], cfg.seeds[0]
    res = ev.rank_units(method, train, cfg.protocol, seed, n_units - cfg.k)
    unit_list = data.units(ds.d, ds.groups)
    kept = ev.selected_features(unit_list, res.order, n_units - cfg.k)
    if method in amber.VARIANTS:
        doc_path = cfg.out / "trace.json"
        doc_path.write_text(res.detail.dumps(), encoding="utf-8")
    else:
        doc_path = cfg.out / "ranking.json"
        doc_path.write_text(res.detail.dumps(), encoding="utf-8")
    lines = [
        f"method     {method}",
        f"dataset    {ds.n} x {ds.d} ({n_units} units)",
        f"eliminated {cfg.k}",
        f"kept       {', '.join(ds.feature_names[f] for f in kept)}",
        f"seconds    {res.seconds:.3f}",
    ]
    (cfg.out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(cfg, {"kept_features": kept})
    print("\n".join(lines), file=stream)
    return 0


def cmd_curve(cfg, stream=sys.stdout):
    _prepare_out(cfg)
    ds = load_dataset(cfg.dataset, cfg.seeds[0])
    points = []
    for m in cfg.methods:
        points.extend(ev.accuracy_curve(m, ds, cfg.feature_counts, cfg.seeds, cfg.protocol))
    ev.write_curve_csv(points, cfg.out / "curve.csv")
    ev.write_summary({"points": points}, cfg.out / "summary.json")
    write_manifest(cfg)
    print(f"{'method':<22}{'features':>9}{'accuracy':>10}", file=stream)
    for p in points:
        print(f"{p.method:<22}{p.feature_count:>9d}{p.mean_accuracy:>10.4f}", file=stream)
    return 0


def cmd_compare(cfg, stream=sys.stdout):
    _prepare_out(cfg)
    ds = load_dataset(cfg.dataset, cfg.seeds[0])
    report = ev.compare_table(cfg.methods, ds, cfg.seeds, cfg.protocol, cfg.k_keep)
    ev.write_table_csv(report, cfg.out / "table.csv")
    ev.write_summary(asdict(report), cfg.out / "summary.json")
    write_manifest(cfg, {"k_keep": report.k_keep})
    print(f"k_keep = {report.k_keep}, runs = {report.runs}", file=stream)
    print(f"{'method':<22}{'accuracy':>10}{'seconds':>12}", file=stream)
    for m, r in report.rows.items():
        print(f"{m:<22}{r['accuracy_at_top_10pct']:>10.4f}{r['ranking_seconds']:>12.3f}", file=stream)
    return 0


def cmd_bench_time(cfg, stream=sys.stdout):
    _prepare_out(cfg)
    ds = load_dataset(cfg.dataset, cfg.seeds[0])
    timings = [ev.time_ranking(m, ds, cfg.protocol, cfg.seeds[0], cfg.repeats) for m in cfg.methods]
    ev.write_timing_csv(timings, cfg.out / "timing.csv")
    ev.write_summary({"timings": timings}, cfg.out / "summary.json")
    write_manifest(cfg)
    print(f"{'method':<22}{'seconds':>12}{'std':>10}", file=stream)
    for t in timings:
        print(f"{t.method:<22}{t.seconds:>12.3f}{t.std:>10.3f}", file=stream)
    return 0


def cmd_gen_synthetic(cfg, stream=sys.stdout):
    _prepare_out(cfg)
    ds = load_dataset(cfg.dataset, cfg.seeds[0])
    path = cfg.out / f"{cfg.dataset['generator']}.csv"
    data.write_csv(ds, path)
    write_manifest(cfg, {"groups": ds.groups, "path": str(path)})
    print(f"wrote {ds.n} x {ds.d} to {path}", file=stream)
    return 0


HANDLERS = {
    "select": cmd_select,
    "curve": cmd_curve,
    "compare": cmd_compare,
    "bench-time": cmd_bench_time,
    "gen-synthetic": cmd_gen_synthetic,
}


class _Parser(argparse.ArgumentParser):
    # usage mistakes are configuration errors, not data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def make_parser():
    parser = _Parser(prog="amber-fs", description="Feature ranking and benchmark runs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON or YAML run configuration")
        p.add_argument("--seed", type=int, help="override the top-level seed")
        p.add_argument("--k", type=int, help="override k")
        p.add_argument("--out", help="override the output directory")
    return parser


def main(argv=None, stream=None):
    stream = stream or sys.stdout
    args = make_parser().parse_args(argv)
    try:
        doc = read_config(args.config)
        if args.seed is not None:
            doc.pop("seeds", None)
        cfg = build_config(args.command, doc, {"seed": args.seed, "k": args.k, "out": args.out})
        return HANDLERS[args.command](cfg, stream)
    except FileNotFoundError as exc:
        err = IngestionError(f"file not found: {exc.filename}")
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    except AmberError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
