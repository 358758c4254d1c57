import csv
import json

import numpy as np
import pytest

from amber_fs import data, evaluation as ev, synthetic
from amber_fs.data import Dataset
from amber_fs.errors import ConfigError, DataError
from amber_fs.nn import Architecture, TrainConfig


def tiny_protocol():
    arch = Architecture([6, 1], output="sigmoid")
    tc = TrainConfig(loss="binary_cross_entropy", learning_rate=0.1, batch_size=16, max_epochs=30, patience=5)
    return ev.Protocol(
        rm_arch=arch,
        final_arch=arch,
        rm_train=tc,
        final_train=tc,
        ae_train=TrainConfig(loss="mse", learning_rate=0.05, batch_size=16, max_epochs=15, patience=3),
        rfs_gammas=(0.1, 1.0),
        rfs_iterations=20,
    )


@pytest.fixture(scope="module")
def toy():
    return synthetic.single_informative(n=150, d=6, informative=2, seed=0)


@pytest.fixture(scope="module")
def cancer():
    return data.load_breast_cancer()


class TestHelpers:
    @pytest.mark.parametrize("n, k", [(30, 3), (784, 78), (5, 1), (4, 1), (1, 1), (15, 2)])
    def test_top_fraction(self, n, k):
        assert ev.top_fraction(n) == k

    def test_prepare_run_identical(self, toy):
        a, b = ev.prepare_run(toy, 0.2, 3), ev.prepare_run(toy, 0.2, 3)
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u.X, v.X)

    def test_train_stats_only(self, toy):
        train, test = ev.prepare_run(toy, 0.2, 0)
        assert np.all(np.abs(train.X.mean(axis=0)) < 1e-9)
        assert not np.all(np.abs(test.X.mean(axis=0)) < 1e-9)


class TestFinalAccuracy:
    def test_all_cancer_features(self, cancer):
        p = ev.cancer_protocol()
        train, test = ev.prepare_run(cancer, 0.2, 0)
        assert ev.final_accuracy(train, test, range(30), p.final_arch, p.final_train, 0) >= 0.90

    def test_constant_feature(self):
        rng = np.random.default_rng(0)
        y = (rng.random(400) < 0.7).astype(int)
        ds = Dataset(np.column_stack([np.ones(400), rng.normal(size=400)]), y)
        p = tiny_protocol()
        train, test = ev.prepare_run(ds, 0.25, 0)
        acc = ev.final_accuracy(train, test, [0], p.final_arch, p.final_train, 0)
        assert abs(acc - np.mean(test.y == np.bincount(train.y).argmax())) <= 0.05

    def test_repeatable(self, toy):
        p = tiny_protocol()
        train, test = ev.prepare_run(toy, 0.2, 0)
        a = ev.final_accuracy(train, test, [1, 2], p.final_arch, p.final_train, 4)
        assert a == ev.final_accuracy(train, test, [2, 1], p.final_arch, p.final_train, 4)

    def test_empty(self, toy):
        p = tiny_protocol()
        train, test = ev.prepare_run(toy, 0.2, 0)
        with pytest.raises(DataError):
            ev.final_accuracy(train, test, [], p.final_arch, p.final_train, 0)


class TestRankUnits:
    @pytest.mark.parametrize("method", ev.METHODS)
    def test_permutation_and_informative_first(self, toy, method):
        train, _ = ev.prepare_run(toy, 0.2, 0)
        res = ev.rank_units(method, train, tiny_protocol(), 0, 1)
        assert sorted(res.order) == list(range(6))
        assert res.seconds >= 0
        if method != "fqi":
            assert res.order[0] == 2

    def test_unknown(self, toy):
        train, _ = ev.prepare_run(toy, 0.2, 0)
        with pytest.raises(ConfigError):
            ev.rank_units("relief", train, tiny_protocol(), 0, 1)

    @pytest.mark.parametrize("method", ["fisher", "cmim", "rfs", "fqi", "amber"])
    def test_grouped(self, method):
        ds = synthetic.paired_group(n=160, width=3, seed=1)
        train, _ = ev.prepare_run(ds, 0.2, 0)
        res = ev.rank_units(method, train, tiny_protocol(), 0, 1)
        assert sorted(res.order) == [0, 1, 2]


class TestCurve:
    def test_full_count_single_point(self, toy):
        p = tiny_protocol()
        pts = ev.accuracy_curve("fisher", toy, [6], [0], p)
        train, test = ev.prepare_run(toy, p.test_fraction, 0)
        assert len(pts) == 1 and pts[0].per_run_accuracies == [
            ev.final_accuracy(train, test, range(6), p.final_arch, p.final_train, 0)
        ]

    def test_full_count_method_independent(self, toy):
        p = tiny_protocol()
        a = ev.accuracy_curve("fisher", toy, [6, 2], [0, 1], p)[0]
        b = ev.accuracy_curve("amber", toy, [6, 2], [0, 1], p)[0]
        assert a.per_run_accuracies == b.per_run_accuracies

    def test_mean(self, toy):
        pts = ev.accuracy_curve("cmim", toy, [4, 2, 1], [0, 1, 2], tiny_protocol())
        assert [p.feature_count for p in pts] == [4, 2, 1]
        for p in pts:
            assert len(p.per_run_accuracies) == 3
            assert p.mean_accuracy == pytest.approx(np.mean(p.per_run_accuracies))

    @pytest.mark.parametrize("counts", [[2, 4], [3, 3], [7], [0], []])
    def test_bad_counts(self, toy, counts):
        with pytest.raises(ConfigError):
            ev.accuracy_curve("fisher", toy, counts, [0], tiny_protocol())


class TestCompare:
    def test_all_methods(self, toy):
        rep = ev.compare_table(list(ev.METHODS), toy, [0], tiny_protocol())
        assert rep.k_keep == 1 and rep.runs == 1
        assert list(rep.rows) == list(ev.METHODS)

    def test_cancer_top_ten_percent(self, cancer):
        assert ev.top_fraction(cancer.d) == 3

    def test_reproducible(self, toy):
        a = ev.compare_table(["fisher", "amber"], toy, [0, 1], tiny_protocol(), k_keep=2)
        b = ev.compare_table(["fisher", "amber"], toy, [0, 1], tiny_protocol(), k_keep=2)
        for m in a.rows:
            assert a.rows[m]["per_run"] == b.rows[m]["per_run"]
            assert a.rows[m]["selected"] == b.rows[m]["selected"]

    def test_unknown_method(self, toy):
        with pytest.raises(ConfigError):
            ev.compare_table(["fisher", "lasso"], toy, [0], tiny_protocol())

    def test_no_seeds(self, toy):
        with pytest.raises(ConfigError):
            ev.compare_table(["fisher"], toy, [], tiny_protocol())


class TestTiming:
    def test_repeats(self, toy):
        t = ev.time_ranking("fisher", toy, tiny_protocol(), repeats=3)
        assert len(t.samples) == 3 and t.std >= 0

    def test_fisher_faster_than_amber(self, toy):
        p = tiny_protocol()
        assert ev.time_ranking("fisher", toy, p).seconds < ev.time_ranking("amber", toy, p).seconds


class TestWriters:
    def test_curve_csv(self, tmp_path, toy):
        pts = ev.accuracy_curve("fisher", toy, [3, 1], [0, 1], tiny_protocol())
        ev.write_curve_csv(pts, tmp_path / "c.csv")
        rows = list(csv.reader(open(tmp_path / "c.csv", encoding="utf-8")))
        assert rows[0] == ["method", "feature_count", "run", "accuracy"]
        assert len(rows) == 1 + 4

    def test_table_and_summary(self, tmp_path, toy):
        rep = ev.compare_table(["fisher", "cmim"], toy, [0], tiny_protocol())
        ev.write_table_csv(rep, tmp_path / "t.csv")
        rows = list(csv.reader(open(tmp_path / "t.csv", encoding="utf-8")))
        assert rows[0] == ["method", "accuracy", "seconds"] and len(rows) == 3
        ev.write_summary({"report": rep}, tmp_path / "s.json")
        doc = json.loads((tmp_path / "s.json").read_text(encoding="utf-8"))
        assert doc["report"]["k_keep"] == 1

    def test_timing_csv(self, tmp_path, toy):
        ev.write_timing_csv([ev.time_ranking("fisher", toy, tiny_protocol())], tmp_path / "x.csv")
        rows = list(csv.reader(open(tmp_path / "x.csv", encoding="utf-8")))
        assert rows[0][:2] == ["method", "seconds"]
