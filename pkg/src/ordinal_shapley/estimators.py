"""Permutation-sampling estimators of the partial ordinal Shapley value.

* :func:`tmc_estimate`  - truncated Monte Carlo over full permutations;
* :func:`cmc_estimate`  - per round, a fixed proportion of every label class
  is drawn and only that subset is permuted;
* :func:`ctmc_estimate` - class subsampling combined with truncation.

Each player's estimate is the plain mean of the marginals it has observed, so
players skipped by class subsampling keep their previous mean.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import OracleError, UtilityOracle, ValueVector
from .exact import Partition

log = logging.getLogger(__name__)

_NORM_FLOOR = 1e-8


@dataclass
class EstimatorConfig:
    max_permutations: int = 1000
    truncated_factor: float = 0.05
    class_proportion: float = 0.8
    convergence_tolerance: float = 0.05
    convergence_window: int = 100
    min_permutations: int = 100
    seed: int = 0
    worker_count: int = 1

    def validate(self) -> "EstimatorConfig":
        if self.max_permutations < 1:
            raise ValueError("max_permutations must be >= 1")
        if self.truncated_factor < 0 or not math.isfinite(self.truncated_factor):
            raise ValueError("truncated_factor must be finite and >= 0")
        if not 0 < self.class_proportion <= 1:
            raise ValueError("class_proportion must lie in (0, 1]")
        if self.convergence_tolerance < 0:
            raise ValueError("convergence_tolerance must be >= 0")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be >= 1")
        if not 0 <= self.min_permutations <= self.max_permutations:
            raise ValueError("need 0 <= min_permutations <= max_permutations")
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        return self


@dataclass
class ConvergenceTrace:
    """Value snapshots taken every ``convergence_window`` rounds."""

    rounds: list[int] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)
    changes: list[float] = field(default_factory=list)

    def record(self, rounds_done: int, values: np.ndarray) -> float | None:
        snap = np.nan_to_num(np.asarray(values, dtype=float), nan=0.0)
        change = None
        if self.snapshots:
            change = float(np.abs(snap - self.snapshots[-1]).sum()
                           / max(np.abs(snap).sum(), _NORM_FLOOR))
            self.changes.append(change)
        self.rounds.append(rounds_done)
        self.snapshots.append(snap)
        return change


def convergence_check(trace: ConvergenceTrace, cfg: EstimatorConfig) -> bool:
    """Relative L1 change over the last window is below the tolerance."""
    if not trace.changes or cfg.convergence_tolerance <= 0:
        return False
    if trace.rounds[-1] < max(cfg.min_permutations, cfg.convergence_window):
        return False
    return trace.changes[-1] < cfg.convergence_tolerance


@dataclass
class EstimatorDiagnostics:
    permutations_used: int = 0
    utility_evaluations: int = 0
    truncation_events: int = 0
    per_player_samples: np.ndarray | None = None
    position_counts: np.ndarray | None = None
    convergence_trace: list[float] = field(default_factory=list)
    converged: bool = False
    failed_rounds: int = 0
    failures: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "permutations_used": self.permutations_used,
            "utility_evaluations": self.utility_evaluations,
            "truncation_events": self.truncation_events,
            "per_player_samples": [int(x) for x in self.per_player_samples],
            "convergence_trace": [float(x) for x in self.convergence_trace],
            "converged": self.converged,
            "failed_rounds": self.failed_rounds,
            "failures": list(self.failures),
        }


def sample_permutation(rng: np.random.Generator, players: Sequence[int]) -> tuple[int, ...]:
    """Uniformly random ordering of ``players`` (Fisher-Yates via numpy)."""
    if len(players) == 0:
        raise ValueError("cannot permute an empty player set")
    return tuple(int(p) for p in rng.permutation(np.asarray(players)))


class _Accumulator:
    """Per-worker sums; merged in worker order for reproducibility."""

    def __init__(self, n: int, keep_marginals: bool):
        self.sums = [0.0] * n
        self.counts = [0] * n
        self.pos = [[0] * n for _ in range(n)]
        self.rounds = 0
        self.evals = 0
        self.truncations = 0
        self.failed = 0
        self.failures: list[str] = []
        self.marginals: list[list[float]] | None = [[] for _ in range(n)] if keep_marginals else None


def _walk(U: UtilityOracle, order: tuple[int, ...], factor: float | None,
          v0: float) -> tuple[list[float], int, int]:
    """Prefix marginals along ``order``; truncation against the full-order value."""
    margs = []
    evals = 0
    truncs = 0
    prev = v0
    last = len(order) - 1
    if factor is None:
        for j in range(len(order)):
            cur = U(order[: j + 1])
            evals += 1
            margs.append(cur - prev)
            prev = cur
        return margs, evals, truncs
    ref = U(order)
    evals += 1
    for j in range(len(order)):
        if abs(ref - prev) < factor:
            truncs += 1
            margs.append(0.0)
            continue
        cur = ref if j == last else U(order[: j + 1])
        evals += j != last
        margs.append(cur - prev)
        prev = cur
    return margs, evals, truncs


def _select(rng: np.random.Generator, classes: Partition, q: float) -> list[int]:
    chosen: list[int] = []
    for union in classes.unions:
        k = min(len(union), math.ceil(round(q * len(union), 9)))
        chosen.extend(int(p) for p in rng.choice(np.asarray(union), size=k, replace=False))
    return chosen


def _run_rounds(acc: _Accumulator, U: UtilityOracle, n: int, rounds: int,
                rng: np.random.Generator, factor: float | None,
                classes: Partition | None, q: float) -> None:
    v0 = float(U.empty_value)
    everyone = np.arange(n)
    for _ in range(rounds):
        if classes is None:
            order = tuple(int(p) for p in rng.permutation(everyone))
        else:
            order = tuple(int(p) for p in rng.permutation(np.asarray(_select(rng, classes, q))))
        try:
            margs, evals, truncs = _walk(U, order, factor, v0)
        except Exception as exc:  # noqa: BLE001 - the round is dropped and reported
            acc.failed += 1
            if len(acc.failures) < 10:
                acc.failures.append(f"{type(exc).__name__}: {exc}")
            continue
        acc.rounds += 1
        acc.evals += evals
        acc.truncations += truncs
        sums, counts, pos = acc.sums, acc.counts, acc.pos
        for j, (p, m) in enumerate(zip(order, margs)):
            sums[p] += m
            counts[p] += 1
            pos[p][j] += 1
        if acc.marginals is not None:
            for p, m in zip(order, margs):
                acc.marginals[p].append(m)


def _estimate(U: UtilityOracle, n: int | None, cfg: EstimatorConfig, method: str,
              factor: float | None, classes: Partition | None,
              keep_marginals: bool) -> tuple[ValueVector, EstimatorDiagnostics]:
    cfg.validate()
    n = U.n_players if n is None else int(n)
    if n != U.n_players:
        raise ValueError(f"n={n} does not match the oracle's {U.n_players} players")
    if classes is not None:
        classes.validate(n)
    start = time.perf_counter()
    workers = cfg.worker_count
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(workers)]
    accs = [_Accumulator(n, keep_marginals) for _ in range(workers)]
    trace = ConvergenceTrace()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    q = cfg.class_proportion
    done = 0
    converged = False
    try:
        while done < cfg.max_permutations:
            block = min(cfg.convergence_window, cfg.max_permutations - done)
            ok_before = sum(a.rounds for a in accs)
            shares = [block // workers + (k < block % workers) for k in range(workers)]
            if pool is None:
                _run_rounds(accs[0], U, n, shares[0], streams[0], factor, classes, q)
            else:
                futures = [pool.submit(_run_rounds, accs[k], U, n, shares[k], streams[k],
                                       factor, classes, q) for k in range(workers)]
                for fut in futures:
                    fut.result()
            if sum(a.rounds for a in accs) == ok_before:
                msgs = [m for a in accs for m in a.failures]
                raise OracleError(f"every {method} round in a block failed; first error: {msgs[0]}")
            done += block
            values = _merge(accs, n)[0]
            trace.record(done, values)
            log.debug("%s: %d/%d rounds", method, done, cfg.max_permutations)
            if convergence_check(trace, cfg):
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()

    values, counts, pos = _merge(accs, n)
    diag = EstimatorDiagnostics(
        permutations_used=sum(a.rounds for a in accs),
        utility_evaluations=sum(a.evals for a in accs),
        truncation_events=sum(a.truncations for a in accs),
        per_player_samples=counts,
        position_counts=pos,
        convergence_trace=trace.changes,
        converged=converged,
        failed_rounds=sum(a.failed for a in accs),
        failures=[m for a in accs for m in a.failures][:10],
        wall_time=time.perf_counter() - start,
    )
    vv = ValueVector(values=values, per_player_samples=counts, method=method,
                     permutations_used=diag.permutations_used,
                     utility_evaluations=diag.utility_evaluations)
    if keep_marginals:
        vv.extra["marginals"] = [[m for a in accs for m in a.marginals[p]] for p in range(n)]
    return vv, diag


def _merge(accs: list[_Accumulator], n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sums = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    pos = np.zeros((n, n), dtype=np.int64)
    for a in accs:
        sums += np.asarray(a.sums)
        counts += np.asarray(a.counts, dtype=np.int64)
        pos += np.asarray(a.pos, dtype=np.int64)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return values, counts, pos


def tmc_estimate(U: UtilityOracle, n: int | None = None, cfg: EstimatorConfig | None = None, *,
                 keep_marginals: bool = False) -> tuple[ValueVector, EstimatorDiagnostics]:
    """Truncated Monte Carlo over uniformly random orderings of all players.

    Once the running prefix value is within ``truncated_factor`` of the value
    of the whole ordering, the remaining players receive a zero marginal
    without further utility calls.
    """
    cfg = cfg or EstimatorConfig()
    return _estimate(U, n, cfg, "tmc", cfg.truncated_factor, None, keep_marginals)


def cmc_estimate(U: UtilityOracle, n: int | None, classes: Partition,
                 cfg: EstimatorConfig | None = None, *,
                 keep_marginals: bool = False) -> tuple[ValueVector, EstimatorDiagnostics]:
    """Class-subsampled Monte Carlo.

    Each round keeps ``ceil(q * |class|)`` random members of every class,
    orders them at random and walks every prefix without truncation.
    """
    cfg = cfg or EstimatorConfig()
    return _estimate(U, n, cfg, "cmc", None, classes, keep_marginals)


def ctmc_estimate(U: UtilityOracle, n: int | None, classes: Partition,
                  cfg: EstimatorConfig | None = None, *,
                  keep_marginals: bool = False) -> tuple[ValueVector, EstimatorDiagnostics]:
    """Class subsampling plus truncation against the selected subset's value."""
    cfg = cfg or EstimatorConfig()
    return _estimate(U, n, cfg, "ctmc", cfg.truncated_factor, classes, keep_marginals)


ESTIMATORS = {"tmc": tmc_estimate, "cmc": cmc_estimate, "ctmc": ctmc_estimate}
