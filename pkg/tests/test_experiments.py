import csv
import json

import numpy as np
import pytest

from ordinal_shapley.core import FunctionUtility
from ordinal_shapley.data import NoiseMask
from ordinal_shapley.estimators import EstimatorConfig
from ordinal_shapley.experiments import (
    Curve,
    ExperimentConfig,
    curve_auc,
    detection_curve,
    removal_curve,
    removal_order,
    report_stem,
    run_experiment,
    write_report,
)

GOOD = np.array([1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0], bool)


def share_of_good_kept(seq):
    return float(GOOD[list(seq)].mean())


def evaluator():
    return FunctionUtility(share_of_good_kept, len(GOOD))


def test_removal_order_breaks_ties_by_index():
    vals = np.array([0.5, 1.0, 0.5, np.nan, -1.0])
    np.testing.assert_array_equal(removal_order(vals, "most-first"), [1, 0, 2, 3, 4])
    np.testing.assert_array_equal(removal_order(vals, "least-first"), [4, 3, 0, 2, 1])
    with pytest.raises(ValueError):
        removal_order(vals, "random")


def test_most_first_removal_of_good_points_hurts():
    values = GOOD.astype(float)
    most = removal_curve(values, evaluator(), "most-first", step_fraction=0.1)
    least = removal_curve(values, evaluator(), "least-first", step_fraction=0.1)
    rand = removal_curve(values, evaluator(), "random", step_fraction=0.1, random_orders=20)
    np.testing.assert_allclose(most.fractions, np.linspace(0, 0.5, 6))
    # after removing 2 good points: 8 good of 18 kept
    assert most.at(0.1) == pytest.approx(8 / 18)
    assert least.at(0.5) == 1.0
    assert most.at(0.5) == 0.0
    assert most.at(0.3) < rand.at(0.3) < least.at(0.3)


def test_detection_curve_reports_recall_of_flipped_points():
    mask = NoiseMask(~GOOD, 0.5, 0, np.zeros(len(GOOD), int))
    curve = detection_curve(GOOD.astype(float), evaluator(), mask, step_fraction=0.25)
    np.testing.assert_allclose(curve.flipped_recall, [0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        detection_curve(GOOD.astype(float), evaluator(), NoiseMask(GOOD[:3], 0.5, 0, GOOD[:3]))


def test_curve_auc_trapezoid_and_step_sum():
    curve = Curve([0.0, 0.25, 0.5], [1.0, 0.5, 0.5], "most-first")
    auc = curve_auc(curve, 0.5)
    assert auc.integral == pytest.approx(0.25 * 0.75 + 0.25 * 0.5)
    assert auc.step_sum == pytest.approx(2.0)
    with pytest.raises(ValueError):
        curve_auc(Curve([0.0, 0.25], [1.0, 1.0], "random"), 0.5)


def test_curve_validation():
    with pytest.raises(ValueError):
        Curve([0.1, 0.2], [1, 1], "most-first")
    with pytest.raises(ValueError):
        Curve([0.0], [1], "sideways")
    with pytest.raises(KeyError):
        Curve([0.0, 0.5], [1, 1], "random").at(0.25)


def small_config(**kw):
    base = dict(dataset="wine", estimator="tmc", repetitions=2, split_counts=(30, 30, 40),
                step_fraction=0.1, random_orders=2,
                estimator_config=EstimatorConfig(max_permutations=20, min_permutations=0,
                                                 convergence_tolerance=0.0))
    base.update(kw)
    return ExperimentConfig(**base).validate()


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(estimator="exact").validate()
    with pytest.raises(ValueError):
        ExperimentConfig(mode="weird").validate()
    with pytest.raises(ValueError):
        ExperimentConfig(dataset="custom").validate()


def test_small_noisy_experiment_end_to_end(tmp_path):
    cfg = small_config(mode="noisy", estimator="ctmc")
    report = run_experiment(cfg)
    assert len(report.succeeded) == 2
    rep = report.succeeded[0]
    assert sum(rep.flipped) == 6
    assert set(rep.curves) == {"most-first", "least-first", "random"}
    assert rep.curves["least-first"].flipped_recall is not None
    paths = write_report(report, cfg, tmp_path)
    names = sorted(p.name for p in paths)
    stem = report_stem(cfg)
    assert names == sorted([f"{stem}.json", f"{stem}_timing.json"]
                           + [f"{stem}_{d}.csv" for d in ("most-first", "least-first", "random")])
    doc = json.loads((tmp_path / f"{stem}.json").read_text())
    assert doc["config"]["mode"] == "noisy"
    with open(tmp_path / f"{stem}_least-first.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["fraction", "mean_accuracy", "stddev", "flipped_recall"]
    assert len(rows) == 7


def test_reports_are_byte_identical_across_runs(tmp_path):
    cfg = small_config(repetitions=1)
    a, b = tmp_path / "a", tmp_path / "b"
    write_report(run_experiment(cfg), cfg, a)
    write_report(run_experiment(cfg), cfg, b)
    for path in a.iterdir():
        if path.name.endswith("_timing.json"):
            continue
        assert path.read_bytes() == (b / path.name).read_bytes(), path.name


def test_failing_repetition_is_recorded_not_fatal(monkeypatch):
    import ordinal_shapley.experiments as ex

    real = ex.run_repetition
    calls = {"n": 0}

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 1:
            raise RuntimeError("trainer blew up")
        return real(*args, **kw)

    monkeypatch.setattr(ex, "run_repetition", flaky)
    report = run_experiment(small_config())
    assert len(report.succeeded) == 1
    assert "blew up" in report.repetitions[0].error
