"""Removal and noisy-label detection benchmarks for data values."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import UtilityOracle, ValueVector
from .data import (
    Dataset,
    DatasetSchema,
    SplitSpec,
    class_partition,
    inject_label_noise,
    load_preset,
    load_tabular,
    split,
)
from .estimators import ESTIMATORS, EstimatorConfig
from .mlutility import LogRegHyper, MlUtilityOracle

log = logging.getLogger(__name__)

DIRECTIONS = ("most-first", "least-first", "random")


@dataclass
class Curve:
    fractions: np.ndarray
    accuracies: np.ndarray
    direction: str
    flipped_recall: np.ndarray | None = None

    def __post_init__(self):
        self.fractions = np.asarray(self.fractions, float)
        self.accuracies = np.asarray(self.accuracies, float)
        if len(self.fractions) != len(self.accuracies) or len(self.fractions) == 0:
            raise ValueError("a curve needs matching, non-empty fraction/accuracy arrays")
        if self.fractions[0] != 0 or np.any(np.diff(self.fractions) <= 0):
            raise ValueError("fractions must start at 0 and strictly increase")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")

    def at(self, fraction: float) -> float:
        k = int(np.argmin(np.abs(self.fractions - fraction)))
        if abs(self.fractions[k] - fraction) > 1e-9:
            raise KeyError(f"curve has no point at fraction {fraction}")
        return float(self.accuracies[k])


@dataclass
class AucPair:
    integral: float
    step_sum: float


def _grid(step_fraction: float, limit: float) -> np.ndarray:
    if not 0 < step_fraction <= 0.5:
        raise ValueError("step_fraction must lie in (0, 0.5]")
    steps = int(math.floor(limit / step_fraction + 1e-9))
    return np.round(np.arange(steps + 1) * step_fraction, 12)


def removal_order(values: ValueVector | np.ndarray, direction: str,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Player indices in removal order; ties go to the lower index first.

    Players without an estimate (NaN) are ranked as if their value were 0.
    """
    vals = values.values if isinstance(values, ValueVector) else np.asarray(values, float)
    vals = np.nan_to_num(vals, nan=0.0)
    idx = np.arange(len(vals))
    if direction == "most-first":
        return np.lexsort((idx, -vals))
    if direction == "least-first":
        return np.lexsort((idx, vals))
    if direction == "random":
        if rng is None:
            raise ValueError("random removal needs a generator")
        return rng.permutation(len(vals))
    raise ValueError(f"unknown direction {direction!r}")


def _curve_for_order(order: np.ndarray, evaluator: UtilityOracle, grid: np.ndarray,
                     flipped: np.ndarray | None) -> tuple[list[float], list[float]]:
    m = len(order)
    accs, recalls = [], []
    total_flipped = int(flipped.sum()) if flipped is not None else 0
    for f in grid:
        k = int(round(f * m))
        if k >= m:
            raise ValueError(f"removing {k} of {m} points leaves nothing to train on")
        removed = order[:k]
        keep = np.setdiff1d(np.arange(m), removed)  # sorted: canonical index order
        accs.append(evaluator(tuple(int(p) for p in keep)))
        if flipped is not None:
            hit = int(flipped[removed].sum())
            recalls.append(hit / total_flipped if total_flipped else 0.0)
    return accs, recalls


def removal_curve(values: ValueVector | np.ndarray, evaluator: UtilityOracle,
                  direction: str = "most-first", step_fraction: float = 0.05,
                  limit: float = 0.5, seed: int = 0, random_orders: int = 1,
                  mask=None) -> Curve:
    """Accuracy after removing growing shares of points in value order.

    ``evaluator`` retrains on the kept points (in index order) and scores the
    evaluation slice.  ``direction="random"`` averages ``random_orders``
    seeded shuffles.  With a noise ``mask`` the curve also carries the share
    of flipped points removed so far.
    """
    grid = _grid(step_fraction, limit)
    flipped = None if mask is None else np.asarray(mask.flipped, bool)
    if direction == "random":
        rng = np.random.default_rng(seed)
        runs = [_curve_for_order(removal_order(values, direction, rng), evaluator, grid, flipped)
                for _ in range(max(1, random_orders))]
        accs = np.mean([r[0] for r in runs], axis=0)
        recalls = np.mean([r[1] for r in runs], axis=0) if flipped is not None else None
    else:
        accs, recalls = _curve_for_order(removal_order(values, direction), evaluator, grid, flipped)
        recalls = np.asarray(recalls) if flipped is not None else None
    return Curve(grid, np.asarray(accs), direction, recalls)


def detection_curve(values: ValueVector | np.ndarray, evaluator: UtilityOracle, mask,
                    direction: str = "least-first", step_fraction: float = 0.05,
                    limit: float = 0.5, seed: int = 0, random_orders: int = 1) -> Curve:
    """Removal curve that also tracks recall of the mislabeled points."""
    if len(mask.flipped) != evaluator.n_players:
        raise ValueError("noise mask does not line up with the valued points")
    return removal_curve(values, evaluator, direction, step_fraction, limit, seed,
                         random_orders, mask)


def curve_auc(curve: Curve, limit: float = 0.5) -> AucPair:
    """Trapezoidal area over ``[0, limit]`` and the plain sum of the curve's points."""
    if curve.fractions[-1] < limit - 1e-9:
        raise ValueError(f"curve stops at {curve.fractions[-1]}, before {limit}")
    keep = curve.fractions <= limit + 1e-9
    x, yv = curve.fractions[keep], curve.accuracies[keep]
    integral = float(np.sum((x[1:] - x[:-1]) * (yv[1:] + yv[:-1]) / 2.0))
    return AucPair(integral, float(np.sum(yv)))


# ---------------------------------------------------------------------------
# full protocol


@dataclass
class ExperimentConfig:
    dataset: str = "wine"
    estimator: str = "tmc"
    mode: str = "raw"
    repetitions: int = 5
    seed: int = 0
    noise_fraction: float = 0.2
    step_fraction: float = 0.05
    limit: float = 0.5
    random_orders: int = 5
    data_path: str | None = None
    schema_path: str | None = None
    split_counts: tuple[int, int, int | None] | None = None
    estimator_config: EstimatorConfig = field(default_factory=EstimatorConfig)
    hyper: LogRegHyper | None = None

    def validate(self) -> "ExperimentConfig":
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {', '.join(ESTIMATORS)}")
        if self.mode not in ("raw", "noisy"):
            raise ValueError("mode must be 'raw' or 'noisy'")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.dataset == "custom" and not (self.data_path and self.schema_path):
            raise ValueError("a custom dataset needs a data file and a schema")
        if self.dataset == "custom" and self.split_counts is None:
            raise ValueError("a custom dataset needs explicit split counts")
        self.estimator_config.validate()
        return self


@dataclass
class Repetition:
    index: int
    seed: int
    values: list[float] | None = None
    diagnostics: dict[str, Any] | None = None
    curves: dict[str, Curve] = field(default_factory=dict)
    auc: dict[str, AucPair] = field(default_factory=dict)
    flipped: list[bool] | None = None
    wall_time: float = 0.0
    error: str | None = None

    def noise_summary(self) -> dict[str, float] | None:
        if self.flipped is None or self.values is None:
            return None
        vals = np.nan_to_num(np.asarray(self.values, float), nan=0.0)
        mask = np.asarray(self.flipped, bool)
        return {"mean_value_flipped": float(vals[mask].mean()),
                "mean_value_clean": float(vals[~mask].mean())}


@dataclass
class ExperimentReport:
    config: dict[str, Any]
    repetitions: list[Repetition]
    mean_curves: dict[str, np.ndarray]
    std_curves: dict[str, np.ndarray]
    mean_recall: dict[str, np.ndarray]
    fractions: np.ndarray | None

    @property
    def succeeded(self) -> list[Repetition]:
        return [r for r in self.repetitions if r.error is None]

    def mean_auc(self, direction: str) -> AucPair:
        pairs = [r.auc[direction] for r in self.succeeded]
        return AucPair(float(np.mean([p.integral for p in pairs])),
                       float(np.mean([p.step_sum for p in pairs])))

    def to_dict(self) -> dict[str, Any]:
        reps = []
        for r in self.repetitions:
            entry: dict[str, Any] = {"index": r.index, "seed": r.seed, "error": r.error}
            if r.error is None:
                entry.update({
                    "values": r.values,
                    "diagnostics": r.diagnostics,
                    "curves": {d: {"accuracy": c.accuracies.tolist(),
                                   "flipped_recall": None if c.flipped_recall is None
                                   else c.flipped_recall.tolist()}
                               for d, c in r.curves.items()},
                    "auc": {d: asdict(a) for d, a in r.auc.items()},
                })
                if r.flipped is not None:
                    entry["flipped"] = r.flipped
                    entry["noise_summary"] = r.noise_summary()
            reps.append(entry)
        return {
            "config": self.config,
            "fractions": None if self.fractions is None else self.fractions.tolist(),
            "mean_curves": {d: v.tolist() for d, v in self.mean_curves.items()},
            "std_curves": {d: v.tolist() for d, v in self.std_curves.items()},
            "mean_flipped_recall": {d: v.tolist() for d, v in self.mean_recall.items()},
            "mean_auc": {d: asdict(self.mean_auc(d)) for d in self.mean_curves}
            if self.succeeded else {},
            "repetitions": reps,
        }

    def timing(self) -> dict[str, Any]:
        return {"repetitions": [{"index": r.index, "wall_time": r.wall_time,
                                 "utility_evaluations": (r.diagnostics or {}).get(
                                     "utility_evaluations")} for r in self.repetitions]}


def _load_dataset(cfg: ExperimentConfig) -> tuple[Dataset, SplitSpec]:
    if cfg.dataset == "custom":
        ds = load_tabular(cfg.data_path, DatasetSchema.from_json(cfg.schema_path))
        spec = SplitSpec(*cfg.split_counts)
    else:
        ds = load_preset(cfg.dataset, cfg.data_path)
        spec = SplitSpec.for_preset(cfg.dataset)
        if cfg.split_counts is not None:
            spec = SplitSpec(*cfg.split_counts)
    return ds, spec


def _config_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    out = asdict(cfg)
    out["hyper"] = None if cfg.hyper is None else asdict(cfg.hyper)
    return out


def run_repetition(ds: Dataset, spec: SplitSpec, cfg: ExperimentConfig, index: int) -> Repetition:
    seed = cfg.seed + index
    rep = Repetition(index=index, seed=seed)
    start = time.perf_counter()
    parts = split(ds, SplitSpec(spec.valued_count, spec.assessment_count, spec.heldout_count, seed))
    y_train = parts.valued.y
    mask = None
    if cfg.mode == "noisy":
        y_train, mask = inject_label_noise(parts.valued.y, cfg.noise_fraction, seed,
                                           n_classes=ds.n_classes)
        rep.flipped = mask.flipped.tolist()
    hyper = cfg.hyper or LogRegHyper(class_count=max(2, ds.n_classes))
    valuation = MlUtilityOracle(parts.valued.X, y_train, parts.assessment.X, parts.assessment.y,
                                hyper)
    est_cfg = EstimatorConfig(**{**asdict(cfg.estimator_config), "seed": seed})
    fn = ESTIMATORS[cfg.estimator]
    if cfg.estimator == "tmc":
        values, diag = fn(valuation, None, est_cfg)
    else:
        values, diag = fn(valuation, None, class_partition(y_train), est_cfg)
    rep.values = [None if math.isnan(v) else float(v) for v in values.values]
    rep.diagnostics = diag.to_dict()
    scorer = MlUtilityOracle(parts.valued.X, y_train, parts.heldout.X, parts.heldout.y, hyper)
    for direction in DIRECTIONS:
        curve = removal_curve(values, scorer, direction, cfg.step_fraction, cfg.limit,
                              seed=seed, random_orders=cfg.random_orders, mask=mask)
        rep.curves[direction] = curve
        rep.auc[direction] = curve_auc(curve, cfg.limit)
    rep.wall_time = time.perf_counter() - start
    return rep


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Split, (optionally) corrupt, value and benchmark, once per repetition.

    A failing repetition is recorded with its error and does not stop the rest.
    """
    cfg.validate()
    ds, spec = _load_dataset(cfg)
    reps = []
    for index in range(cfg.repetitions):
        try:
            rep = run_repetition(ds, spec, cfg, index)
        except Exception as exc:  # noqa: BLE001 - reported per repetition
            log.error("repetition %d failed: %s", index, exc)
            rep = Repetition(index=index, seed=cfg.seed + index, error=f"{type(exc).__name__}: {exc}")
        reps.append(rep)
        log.info("repetition %d/%d done", index + 1, cfg.repetitions)
    ok = [r for r in reps if r.error is None]
    mean_curves, std_curves, mean_recall = {}, {}, {}
    fractions = None
    if ok:
        fractions = ok[0].curves[DIRECTIONS[0]].fractions
        for d in DIRECTIONS:
            stack = np.array([r.curves[d].accuracies for r in ok])
            mean_curves[d] = stack.mean(axis=0)
            std_curves[d] = stack.std(axis=0)
            if cfg.mode == "noisy":
                mean_recall[d] = np.array([r.curves[d].flipped_recall for r in ok]).mean(axis=0)
    return ExperimentReport(_config_dict(cfg), reps, mean_curves, std_curves, mean_recall,
                            fractions)


def report_stem(cfg: ExperimentConfig) -> str:
    return f"{cfg.dataset}_{cfg.estimator}_{cfg.mode}_{cfg.seed}"


def write_report(report: ExperimentReport, cfg: ExperimentConfig, out_dir: str | Path) -> list[Path]:
    """JSON report, a timing sidecar, and one CSV per removal direction."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = report_stem(cfg)
    written = []
    path = out / f"{stem}.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    path = out / f"{stem}_timing.json"
    path.write_text(json.dumps(report.timing(), indent=2) + "\n", encoding="utf-8")
    written.append(path)
    if report.fractions is None:
        return written
    for d in DIRECTIONS:
        path = out / f"{stem}_{d}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["fraction", "mean_accuracy", "stddev"]
            if d in report.mean_recall:
                header.append("flipped_recall")
            w.writerow(header)
            for k, f in enumerate(report.fractions):
                row = [repr(float(f)), repr(float(report.mean_curves[d][k])),
                       repr(float(report.std_curves[d][k]))]
                if d in report.mean_recall:
                    row.append(repr(float(report.mean_recall[d][k])))
                w.writerow(row)
        written.append(path)
    return written
