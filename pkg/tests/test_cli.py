import csv
import json

import numpy as np
import pytest
import yaml

from amber_fs import cli, data

TINY = {
    "rm_spec": {"widths": [6, 1], "output": "sigmoid"},
    "final_spec": {"widths": [6, 1], "output": "sigmoid"},
    "rm_train": {"max_epochs": 20, "learning_rate": 0.1},
    "final_train": {"max_epochs": 20, "learning_rate": 0.1},
    "ae_train": {"max_epochs": 10},
    "amber": {"overfit_rm": False},
    "baselines": {"rfs_gammas": [0.1, 1.0], "rfs_iterations": 10},
}


def config(tmp_path, name="c.json", **fields):
    doc = {"dataset": {"kind": "synthetic", "generator": "single_informative", "n": 120}, **TINY, **fields}
    doc.setdefault("out", str(tmp_path / "out"))
    path = tmp_path / name
    if name.endswith(".json"):
        path.write_text(json.dumps(doc), encoding="utf-8")
    else:
        path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


class TestSelect:
    def test_amber_trace(self, tmp_path):
        assert run("select", config(tmp_path, method="amber", k=4)) == 0
        trace = json.loads((tmp_path / "out" / "trace.json").read_text(encoding="utf-8"))
        assert len(trace["iterations"]) == 4
        man = json.loads((tmp_path / "out" / "manifest.json").read_text(encoding="utf-8"))
        assert man["seeds"] == [0] and man["config"]["k"] == 4 and "artifact_version" in man
        assert (tmp_path / "out" / "summary.txt").exists()

    def test_cancer_k27(self, tmp_path):
        cfg = config(tmp_path, method="amber", k=27, rm_spec={"widths": [16, 8, 6, 1]})
        doc = json.loads(cfg.read_text())
        doc["dataset"] = {"kind": "builtin", "name": "cancer"}
        cfg.write_text(json.dumps(doc))
        assert run("select", cfg) == 0
        trace = json.loads((tmp_path / "out" / "trace.json").read_text(encoding="utf-8"))
        assert len(trace["iterations"]) == 27

    def test_baseline_ranking(self, tmp_path):
        assert run("select", config(tmp_path, name="c.yaml", method="fisher", k=2)) == 0
        doc = json.loads((tmp_path / "out" / "ranking.json").read_text(encoding="utf-8"))
        assert doc["method"] == "fisher" and sorted(doc["order"]) == list(range(6))

    def test_k_equals_d(self, tmp_path, capsys):
        assert run("select", config(tmp_path, method="amber", k=6)) == 1
        assert "k must" in capsys.readouterr().err

    def test_k_flag_override(self, tmp_path):
        assert run("select", config(tmp_path, method="amber", k=6), "--k", 2) == 0
        trace = json.loads((tmp_path / "out" / "trace.json").read_text(encoding="utf-8"))
        assert len(trace["iterations"]) == 2

    def test_missing_dataset_file(self, tmp_path, capsys):
        cfg = config(tmp_path, method="fisher", k=1)
        doc = json.loads(cfg.read_text())
        doc["dataset"] = {"kind": "csv", "path": str(tmp_path / "absent.csv")}
        cfg.write_text(json.dumps(doc))
        assert run("select", cfg) == 2
        assert "absent.csv" in capsys.readouterr().err

    def test_unknown_field(self, tmp_path, capsys):
        assert run("select", config(tmp_path, method="amber", k=1, colour="red")) == 1
        assert "colour" in capsys.readouterr().err

    def test_unknown_nested_field(self, tmp_path, capsys):
        assert run("select", config(tmp_path, method="amber", k=1, rm_train={"momentum": 0.9})) == 1
        assert "rm_train.momentum" in capsys.readouterr().err

    def test_bad_cell_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,y\n1,x,0\n", encoding="utf-8")
        cfg = config(tmp_path, method="fisher", k=1)
        doc = json.loads(cfg.read_text())
        doc["dataset"] = {"kind": "csv", "path": str(bad)}
        cfg.write_text(json.dumps(doc))
        assert run("select", cfg) == 2

    def test_numeric_failure(self, tmp_path, capsys):
        cfg = config(tmp_path, method="amber", k=1, rm_train={"learning_rate": 1e200, "max_epochs": 5})
        assert run("select", cfg) == 3
        assert "error" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert run("select", tmp_path / "none.json") == 1

    def test_usage_error_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            run("frobnicate")
        assert exc.value.code == 1

    def test_input_not_mutated(self, tmp_path):
        ds = data.load_breast_cancer()
        path = tmp_path / "cancer.csv"
        data.write_csv(ds, path)
        before = path.read_bytes()
        cfg = config(tmp_path, method="fisher", k=20)
        doc = json.loads(cfg.read_text())
        doc["dataset"] = {"kind": "csv", "path": str(path)}
        cfg.write_text(json.dumps(doc))
        assert run("select", cfg) == 0
        assert path.read_bytes() == before


class TestCurve:
    def test_curve(self, tmp_path, capsys):
        assert run("curve", config(tmp_path, methods=["fisher", "amber"], feature_counts=[4, 2], runs=2)) == 0
        rows = list(csv.reader(open(tmp_path / "out" / "curve.csv", encoding="utf-8")))
        assert rows[0] == ["method", "feature_count", "run", "accuracy"] and len(rows) == 1 + 2 * 2 * 2
        assert "features" in capsys.readouterr().out

    def test_ascending(self, tmp_path):
        assert run("curve", config(tmp_path, method="fisher", feature_counts=[2, 4])) == 1


class TestCompare:
    def test_all_methods(self, tmp_path):
        methods = ["fisher", "cmim", "rfs", "fqi", "amber", "amber_relevance_only", "amber_retrain"]
        assert run("compare", config(tmp_path, methods=methods)) == 0
        rows = list(csv.reader(open(tmp_path / "out" / "table.csv", encoding="utf-8")))
        assert rows[0] == ["method", "accuracy", "seconds"]
        assert [r[0] for r in rows[1:]] == methods

    def test_rerun_identical(self, tmp_path):
        acc = []
        for name in ("a", "b"):
            assert run("compare", config(tmp_path, methods=["fisher", "amber"], seeds=[3, 4]), "--out", tmp_path / name) == 0
            rows = list(csv.reader(open(tmp_path / name / "table.csv", encoding="utf-8")))
            acc.append([r[:2] for r in rows])
        assert acc[0] == acc[1]

    def test_seed_flag(self, tmp_path):
        assert run("compare", config(tmp_path, methods=["fisher"], seeds=[1, 2]), "--seed", 7) == 0
        man = json.loads((tmp_path / "out" / "manifest.json").read_text(encoding="utf-8"))
        assert man["seeds"] == [7]


class TestBenchTime:
    def test_timing(self, tmp_path):
        assert run("bench-time", config(tmp_path, methods=["fisher", "cmim"], repeats=2)) == 0
        rows = list(csv.reader(open(tmp_path / "out" / "timing.csv", encoding="utf-8")))
        assert [r[0] for r in rows[1:]] == ["fisher", "cmim"]
        assert rows[1][3] == "2"


class TestGenSynthetic:
    @pytest.mark.parametrize("gen", ["duplicate", "single_informative", "paired_group"])
    def test_generate(self, tmp_path, gen):
        cfg = tmp_path / "g.json"
        cfg.write_text(json.dumps({"dataset": {"kind": "synthetic", "generator": gen, "n": 50}, "out": str(tmp_path)}))
        assert run("gen-synthetic", cfg, "--seed", 3) == 0
        ds = data.load_csv(tmp_path / f"{gen}.csv")
        assert ds.n == 50
        man = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
        if gen == "paired_group":
            assert man["groups"][0] == [0, 4]
        if gen == "duplicate":
            np.testing.assert_array_equal(ds.X[:, 0], ds.X[:, 3])

    def test_reproducible(self, tmp_path):
        cfg = tmp_path / "g.json"
        cfg.write_text(json.dumps({"dataset": {"kind": "synthetic", "generator": "duplicate", "n": 30}}))
        run("gen-synthetic", cfg, "--out", tmp_path / "a")
        run("gen-synthetic", cfg, "--out", tmp_path / "b")
        assert (tmp_path / "a" / "duplicate.csv").read_bytes() == (tmp_path / "b" / "duplicate.csv").read_bytes()

    def test_wrong_kind(self, tmp_path):
        cfg = tmp_path / "g.json"
        cfg.write_text(json.dumps({"dataset": {"kind": "builtin", "name": "cancer"}}))
        assert run("gen-synthetic", cfg) == 1


class TestConfig:
    def test_grouped_csv(self, tmp_path):
        doc = {
            "dataset": {"kind": "synthetic", "generator": "single_informative", "n": 60, "pair_width": 3},
            "method": "amber",
            "k": 2,
            **TINY,
        }
        cfg = cli.build_config("select", doc)
        loaded = cli.load_dataset(cfg.dataset)
        assert loaded.groups == [(0, 3), (1, 4), (2, 5)]

    def test_method_and_methods(self):
        doc = {"dataset": {"kind": "builtin", "name": "cancer"}, "method": "fisher", "methods": ["cmim"], "k": 1}
        with pytest.raises(cli.ConfigError):
            cli.build_config("select", doc)

    def test_bad_protocol(self):
        doc = {"dataset": {"kind": "builtin", "name": "cancer"}, "method": "fisher", "protocol": "imagenet"}
        with pytest.raises(cli.ConfigError, match="protocol"):
            cli.build_config("compare", doc)
