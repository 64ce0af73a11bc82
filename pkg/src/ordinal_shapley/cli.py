"""Command-line entry point: ``ordshap {value,bounds,experiment}``.

Exit codes: 0 success, 2 configuration error, 3 utility-oracle failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

from .bounds import (
    CmcBoundInput,
    TmcBoundInput,
    cmc_bound_raw,
    tmc_bound_raw,
    truncation_bias,
    vector_bound_raw,
)
from .core import OracleError, UtilityOracle
from .data import DataError, DatasetSchema, SplitSpec, class_partition, load_preset, load_tabular, split
from .estimators import ESTIMATORS, EstimatorConfig
from .exact import (
    ExactSizeError,
    Partition,
    classic_shapley,
    ordinal_shapley,
    partial_ordinal_shapley,
    special_case_across_union,
    special_case_within_union,
)
from .experiments import ExperimentConfig, run_experiment, write_report
from .mlutility import MlUtilityOracle
from .synthetic import TableUtility

OUTPUT_ENV = "ORDSHAP_OUTPUT_DIR"
EXIT_CONFIG = 2
EXIT_ORACLE = 3

EXACT_METHODS = {
    "classic": classic_shapley,
    "ordinal": ordinal_shapley,
    "partial": partial_ordinal_shapley,
    "special1": special_case_within_union,
    "special2": special_case_across_union,
}

log = logging.getLogger("ordinal_shapley")


class ConfigError(ValueError):
    pass


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _p_norm(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, except for options that have none."""

    def _get_help_string(self, action):
        if action.default is None:
            return action.help
        return super()._get_help_string(action)


def _add_common(p: argparse.ArgumentParser, sampling: bool = True) -> None:
    if sampling:
        p.add_argument("--seed", type=int, default=0, help="base random seed")
        p.add_argument("--workers", type=int, default=1, help="estimator worker threads")
    p.add_argument("--out", default=os.environ.get(OUTPUT_ENV),
                   help=f"output directory (falls back to ${OUTPUT_ENV})")
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="log progress to stderr (-vv for per-block counters)")


def _add_estimator(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("estimator")
    g.add_argument("--permutations", type=int, default=1000, help="maximum sampled rounds T")
    g.add_argument("--truncated-factor", type=float, default=0.05,
                   help="skip prefixes within this distance of the full-order value")
    g.add_argument("--proportion", type=float, default=0.8,
                   help="share q of every class drawn per round (cmc/ctmc)")
    g.add_argument("--tolerance", type=float, default=0.05,
                   help="relative L1 change that counts as converged (0 disables)")
    g.add_argument("--window", type=int, default=100, help="rounds between convergence checks")
    g.add_argument("--min-permutations", type=int, default=100,
                   help="rounds before convergence may stop the run")


def _add_dataset(p: argparse.ArgumentParser, required: bool) -> None:
    g = p.add_argument_group("dataset")
    g.add_argument("--dataset", choices=["wine", "cancer", "adult", "custom"],
                   required=required, default=None, help="preset name or 'custom'")
    g.add_argument("--data", default=None, help="data file (presets fall back to $ORDSHAP_DATA_DIR)")
    g.add_argument("--schema", default=None, help="schema JSON for --dataset custom")
    g.add_argument("--valued", type=int, default=None, help="override: points to value")
    g.add_argument("--assessment", type=int, default=None,
                   help="override: points scoring coalitions during valuation")
    g.add_argument("--heldout", type=int, default=None,
                   help="override: held-out points (default: preset / remainder)")


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    parser = argparse.ArgumentParser(prog="ordshap", formatter_class=fmt,
                                     description="Ordinal Shapley values for ordered coalitions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("value", formatter_class=fmt, help="compute exact or estimated values")
    p.add_argument("--method", required=True,
                   choices=[*EXACT_METHODS, *ESTIMATORS], help="allocation rule or estimator")
    p.add_argument("--table", default=None, help="JSON utility table (explicit game)")
    p.add_argument("--partition", default=None,
                   help="unions as '0,1;2' (special1/special2; classes for cmc/ctmc on tables)")
    _add_dataset(p, required=False)
    _add_estimator(p)
    _add_common(p)
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("bounds", formatter_class=fmt, help="evaluate estimator tail bounds")
    p.add_argument("--kind", required=True, choices=["tmc", "cmc", "vector"],
                   help="positional Hoeffding, class Bennett, or l^p union bound")
    p.add_argument("--input", default=None, help="JSON file with any of the flags below")
    p.add_argument("--eps", type=_float_list, default=None, help="comma-separated epsilon grid")
    p.add_argument("--client", type=int, default=0, help="client label for single-client rows")
    g = p.add_argument_group("tmc")
    g.add_argument("--m", type=_int_list, default=None,
                   help="samples per position m_1,...,m_k for the client")
    g.add_argument("--k", type=int, default=None, help="positions kept (default: len(m))")
    g.add_argument("--r-max", type=float, default=None, help="largest positional range r_max,k")
    g.add_argument("--eps-k", type=float, default=None, help="truncation bias epsilon_k")
    g.add_argument("--table", default=None,
                   help="JSON utility table: compute epsilon_k exactly for --client (n <= 8)")
    g = p.add_argument_group("cmc")
    g.add_argument("--q", type=float, default=None, help="selection probability of the class")
    g.add_argument("--T", type=int, default=None, help="sample size")
    g.add_argument("--delta", type=_float_list, default=None,
                   help="marginal range of the client (comma list: one per client for vector)")
    g = p.add_argument_group("vector")
    g.add_argument("--per-client", choices=["tmc", "cmc"], default="cmc",
                   help="bound applied to every client")
    g.add_argument("--n", type=int, default=None, help="number of clients")
    g.add_argument("--p", type=_p_norm, default=2.0, help="l^p norm (number or 'inf')")
    _add_common(p, sampling=False)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("experiment", formatter_class=fmt,
                       help="removal / noisy-label detection benchmark")
    _add_dataset(p, required=True)
    p.add_argument("--estimator", choices=list(ESTIMATORS), default="tmc",
                   help="sampler used to value the points")
    p.add_argument("--mode", choices=["raw", "noisy"], default="raw",
                   help="'noisy' flips labels before valuing and tracks detection")
    p.add_argument("--repetitions", type=int, default=5,
                   help="independent splits, one per seed starting at --seed")
    p.add_argument("--noise", type=float, default=0.2, help="label-noise fraction (noisy mode)")
    p.add_argument("--step", type=float, default=0.05, help="removal step as a share of points")
    p.add_argument("--random-orders", type=int, default=5,
                   help="shuffles averaged for the random-removal baseline")
    _add_estimator(p)
    _add_common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def _estimator_config(args) -> EstimatorConfig:
    return EstimatorConfig(max_permutations=args.permutations,
                           truncated_factor=args.truncated_factor,
                           class_proportion=args.proportion,
                           convergence_tolerance=args.tolerance,
                           convergence_window=args.window,
                           min_permutations=min(args.min_permutations, args.permutations),
                           seed=args.seed, worker_count=args.workers).validate()


def _split_counts(args) -> tuple[int, int, int | None] | None:
    given = (args.valued, args.assessment, args.heldout)
    if all(v is None for v in given):
        return None
    if args.valued is None or args.assessment is None:
        raise ConfigError("--valued and --assessment must be given together")
    return (args.valued, args.assessment, args.heldout)


def _dataset_game(args) -> tuple[UtilityOracle, Partition]:
    counts = _split_counts(args)
    if args.dataset == "custom":
        if not (args.data and args.schema):
            raise ConfigError("--dataset custom needs --data and --schema")
        if counts is None:
            raise ConfigError("--dataset custom needs --valued and --assessment")
        ds = load_tabular(args.data, DatasetSchema.from_json(args.schema))
    else:
        ds = load_preset(args.dataset, args.data)
    spec = SplitSpec(*counts, seed=args.seed) if counts else SplitSpec.for_preset(args.dataset, args.seed)
    parts = split(ds, spec)
    oracle = MlUtilityOracle(parts.valued.X, parts.valued.y, parts.assessment.X, parts.assessment.y)
    return oracle, class_partition(parts.valued.y)


def _write_values(vv, args, stdout) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["player", "value", "samples"])
    for p, (v, s) in enumerate(zip(vv.values, vv.per_player_samples)):
        w.writerow([p, "nan" if math.isnan(v) else repr(float(v)), int(s)])
    stdout.write(buf.getvalue())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"values_{args.method}.csv").write_text(buf.getvalue(), encoding="utf-8")
        (out / f"values_{args.method}.json").write_text(
            json.dumps(vv.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_value(args, stdout=None) -> int:
    stdout = stdout or sys.stdout
    if (args.table is None) == (args.dataset is None):
        raise ConfigError("give exactly one game source: --table or --dataset")
    if args.table:
        game = TableUtility.from_json(args.table)
        classes = Partition.parse(args.partition) if args.partition else None
    else:
        game, classes = _dataset_game(args)
        if args.partition:
            classes = Partition.parse(args.partition)
    if args.method in ("special1", "special2"):
        if args.partition is None:
            raise ConfigError(f"--method {args.method} needs --partition")
        vv = EXACT_METHODS[args.method](game, Partition.parse(args.partition))
    elif args.method in EXACT_METHODS:
        vv = EXACT_METHODS[args.method](game)
    else:
        cfg = _estimator_config(args)
        if args.method == "tmc":
            vv, diag = ESTIMATORS["tmc"](game, None, cfg)
        else:
            if classes is None:
                raise ConfigError(f"--method {args.method} needs --partition with --table")
            vv, diag = ESTIMATORS[args.method](game, None, classes, cfg)
        vv.extra["diagnostics"] = diag.to_dict()
    _write_values(vv, args, stdout)
    return 0


def _bound_args(args) -> argparse.Namespace:
    if args.input:
        doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
        for key, val in doc.items():
            attr = key.replace("-", "_")
            if getattr(args, attr, None) is None or attr in ("p", "per_client"):
                setattr(args, attr, _p_norm(str(val)) if attr == "p" else val)
        for attr in ("eps", "delta"):
            if isinstance(getattr(args, attr), (int, float)):
                setattr(args, attr, [float(getattr(args, attr))])
    return args


def _need(args, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"--kind {args.kind} needs {', '.join(missing)}")


def _tmc_single(args, eps: float) -> float:
    k = args.k or len(args.m)
    return tmc_bound_raw(TmcBoundInput(args.m, k, args.r_max, eps, args.eps_k))


def _cmc_single(args, delta: float, eps: float) -> float:
    return cmc_bound_raw(CmcBoundInput(args.q, args.T, delta, eps))


def cmd_bounds(args, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = _bound_args(args)
    _need(args, "eps")
    per = args.per_client if args.kind == "vector" else args.kind
    if per == "tmc":
        _need(args, "m", "r_max")
        if args.eps_k is None:
            if args.table:
                k = args.k or len(args.m)
                args.eps_k = truncation_bias(TableUtility.from_json(args.table), args.client, k)
            else:
                args.eps_k = 0.0
    else:
        _need(args, "q", "T", "delta")
    rows = []
    if args.kind == "vector":
        _need(args, "n")
        deltas = args.delta if per == "cmc" else None
        if deltas is not None and len(deltas) not in (1, args.n):
            raise ConfigError("--delta needs one value or one per client")

        def per_client(i: int, eps: float) -> float:
            if per == "tmc":
                return min(1.0, _tmc_single(args, eps))
            d = deltas[i] if len(deltas) > 1 else deltas[0]
            return min(1.0, _cmc_single(args, d, eps))

        for eps in args.eps:
            raw = vector_bound_raw(per_client, args.n, args.p, eps)
            rows.append(("all", eps, raw))
    else:
        for eps in args.eps:
            raw = _tmc_single(args, eps) if per == "tmc" else _cmc_single(args, args.delta[0], eps)
            rows.append((args.client, eps, raw))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["client", "epsilon", "bound_raw", "bound_clamped"])
    for client, eps, raw in rows:
        w.writerow([client, repr(float(eps)), repr(float(raw)), repr(min(1.0, float(raw)))])
    stdout.write(buf.getvalue())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"bounds_{args.kind}.csv").write_text(buf.getvalue(), encoding="utf-8")
    return 0


def cmd_experiment(args, stdout=None) -> int:
    stdout = stdout or sys.stdout
    cfg = ExperimentConfig(dataset=args.dataset, estimator=args.estimator, mode=args.mode,
                           repetitions=args.repetitions, seed=args.seed,
                           noise_fraction=args.noise, step_fraction=args.step,
                           random_orders=args.random_orders, data_path=args.data,
                           schema_path=args.schema, split_counts=_split_counts(args),
                           estimator_config=_estimator_config(args)).validate()
    report = run_experiment(cfg)
    out = args.out or "results"
    paths = write_report(report, cfg, out)
    for path in paths:
        stdout.write(f"{path}\n")
    if not report.succeeded:
        first = report.repetitions[0].error
        print(f"ordshap: every repetition failed; first error: {first}", file=sys.stderr)
        return EXIT_ORACLE
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OracleError as exc:
        print(f"ordshap: oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ConfigError, DataError, ExactSizeError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"ordshap: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
