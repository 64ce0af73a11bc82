"""Synthetic games used as fixtures for the exact solvers, estimators and bounds."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .core import Coalition, OracleError, UtilityOracle, check_coalition
from .exact import PERMUTATION_LIMIT, ExactSizeError, ordered_subsets

_MASK64 = (1 << 64) - 1


def _mix(*parts: int) -> float:
    """Deterministic uniform [0, 1) from integers (splitmix64 finalizer)."""
    x = 0x9E3779B97F4A7C15
    for part in parts:
        x = (x ^ (part & _MASK64)) * 0xBF58476D1CE4E5B9 & _MASK64
        x ^= x >> 31
        x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x ^= x >> 30
    x = x * 0xBF58476D1CE4E5B9 & _MASK64
    x ^= x >> 27
    x = x * 0x94D049BB133111EB & _MASK64
    x ^= x >> 31
    return (x >> 11) / float(1 << 53)


def _seq_code(seq: Sequence[int]) -> int:
    code = 1
    for p in seq:
        code = code * 1009 + p + 1
    return code


def format_key(seq: Sequence[int]) -> str:
    return ",".join(str(p) for p in seq)


def parse_key(key: str) -> Coalition:
    key = key.strip()
    if not key:
        return ()
    return tuple(int(p) for p in key.split(","))


class TableUtility(UtilityOracle):
    """Explicit utility per ordered coalition."""

    def __init__(self, n_players: int, table: Mapping[Sequence[int], float],
                 empty_value: float = 0.0, require_complete: bool = False):
        self.n_players = int(n_players)
        self.empty_value = float(empty_value)
        self.table: dict[Coalition, float] = {}
        for seq, val in table.items():
            seq = check_coalition(parse_key(seq) if isinstance(seq, str) else seq,
                                  self.n_players)
            if seq:
                self.table[seq] = float(val)
            else:
                self.empty_value = float(val)
        if require_complete:
            missing = [s for s in ordered_subsets(range(self.n_players))
                       if s and s not in self.table]
            if missing:
                raise ValueError(f"table misses {len(missing)} sequences, e.g. {missing[0]}")

    def evaluate(self, seq: Coalition) -> float:
        try:
            return self.table[seq]
        except KeyError:
            raise OracleError(f"no utility recorded for sequence {format_key(seq)!r}") from None

    @classmethod
    def random(cls, n: int, seed: int = 0, low: float = 0.0, high: float = 1.0) -> "TableUtility":
        if n > PERMUTATION_LIMIT:
            raise ExactSizeError(f"random tables are limited to n <= {PERMUTATION_LIMIT}")
        rng = np.random.default_rng(seed)
        seqs = [s for s in ordered_subsets(range(n)) if s]
        vals = rng.uniform(low, high, size=len(seqs))
        return cls(n, dict(zip(seqs, vals.tolist())))

    @classmethod
    def from_json(cls, doc: Mapping[str, Any] | str | Path) -> "TableUtility":
        """Load ``{"n": 2, "empty_value": 0, "values": {"0": 1, "1,0": 3, ...}}``.

        The sequence keys may also sit at the top level next to ``n``.
        """
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text(encoding="utf-8"))
        if "n" not in doc:
            raise ValueError("utility table needs an 'n' field")
        values = doc.get("values")
        if values is None:
            values = {k: v for k, v in doc.items() if k not in ("n", "empty_value")}
        return cls(int(doc["n"]), {parse_key(k): v for k, v in values.items()},
                   empty_value=float(doc.get("empty_value", 0.0)), require_complete=True)

    def to_json(self) -> dict[str, Any]:
        return {"n": self.n_players, "empty_value": self.empty_value,
                "values": {format_key(k): v for k, v in sorted(self.table.items(),
                                                                key=lambda kv: (len(kv[0]), kv[0]))}}


class PositionalLinearUtility(UtilityOracle):
    """``U(seq) = sum_j w_pos[j] * v[seq[j]]``: each slot scales its occupant."""

    def __init__(self, position_weights: Sequence[float], player_values: Sequence[float]):
        self.w = np.asarray(position_weights, dtype=float)
        self.v = np.asarray(player_values, dtype=float)
        if self.w.shape != self.v.shape:
            raise ValueError("need one position weight per player")
        self.n_players = len(self.v)
        self.empty_value = 0.0

    def evaluate(self, seq: Coalition) -> float:
        return float(np.dot(self.w[: len(seq)], self.v[list(seq)]))

    def closed_form(self) -> np.ndarray:
        """Partial ordinal value: every player is equally likely at every slot."""
        return self.v * self.w.mean()


class OrderInvariantUtility(UtilityOracle):
    """Utility of the member set only: additive values or a function of size."""

    def __init__(self, n_players: int, *, additive: Sequence[float] | None = None,
                 by_size: Sequence[float] | None = None):
        if (additive is None) == (by_size is None):
            raise ValueError("give exactly one of additive / by_size")
        self.n_players = int(n_players)
        self.additive = None if additive is None else np.asarray(additive, float)
        self.by_size = None if by_size is None else np.asarray(by_size, float)
        if self.additive is not None and len(self.additive) != n_players:
            raise ValueError("additive needs one value per player")
        if self.by_size is not None and len(self.by_size) != n_players + 1:
            raise ValueError("by_size needs values for sizes 0..n")
        self.empty_value = 0.0 if self.by_size is None else float(self.by_size[0])

    def evaluate(self, seq: Coalition) -> float:
        if self.additive is not None:
            return float(self.additive[list(seq)].sum())
        return float(self.by_size[len(seq)])


class BoundedMarginalUtility(UtilityOracle):
    """Prefix-additive game with declared marginal ranges.

    Appending player ``p`` at zero-based slot ``j`` after a given prefix adds
    ``scale[p] * position_range[j] * g`` where ``g`` in [0, 1) is a
    deterministic hash of (seed, prefix, p).  So the marginal of ``p`` at slot
    ``j`` lies in ``[0, scale[p] * position_range[j]]`` and over all slots in
    ``[0, scale[p] * max(position_range)]``.
    """

    def __init__(self, position_range: Sequence[float], scale: Sequence[float] | None = None,
                 seed: int = 0):
        self.r = np.asarray(position_range, dtype=float)
        if np.any(self.r <= 0):
            raise ValueError("position ranges must be positive")
        self.n_players = len(self.r)
        self.scale = np.ones(self.n_players) if scale is None else np.asarray(scale, float)
        self.seed = int(seed)
        self.empty_value = 0.0

    def marginal(self, prefix: Coalition, p: int) -> float:
        g = _mix(self.seed, _seq_code(prefix), p)
        return float(self.scale[p] * self.r[len(prefix)] * g)

    def evaluate(self, seq: Coalition) -> float:
        return math.fsum(self.marginal(seq[:j], p) for j, p in enumerate(seq))

    def position_ranges(self, player: int) -> np.ndarray:
        """Declared marginal range of ``player`` at each slot."""
        return self.scale[player] * self.r

    def player_range(self, player: int) -> float:
        """Declared marginal range of ``player`` over all slots."""
        return float(self.scale[player] * self.r.max())


class ClassOrdinalUtility(UtilityOracle):
    """Additive values plus order effects confined to one label class.

    ``U(seq) = sum_{p in seq} v[p] + scale * g(seq restricted to the ordinal
    class)``, with ``g`` a hashed pseudo-random table over ordered subsequences
    (``g(()) = 0``).  Players outside the ordinal class act additively, so
    dropping some of them does not alter anyone else's marginal.
    """

    def __init__(self, labels: Sequence[int], values: Sequence[float], ordinal_class: int,
                 scale: float = 1.0, seed: int = 0):
        self.labels = tuple(int(x) for x in labels)
        self.v = np.asarray(values, dtype=float)
        if len(self.v) != len(self.labels):
            raise ValueError("need one value per player")
        self.n_players = len(self.labels)
        self.ordinal_class = int(ordinal_class)
        self.scale = float(scale)
        self.seed = int(seed)
        self.empty_value = 0.0

    def evaluate(self, seq: Coalition) -> float:
        sub = tuple(p for p in seq if self.labels[p] == self.ordinal_class)
        order_term = self.scale * _mix(self.seed, _seq_code(sub)) if sub else 0.0
        return float(self.v[list(seq)].sum()) + order_term


def utility_range(U: UtilityOracle) -> float:
    """max - min of the utility over every ordered coalition (n <= 8)."""
    if U.n_players > PERMUTATION_LIMIT:
        raise ExactSizeError("utility range needs full enumeration")
    vals = [U(s) for s in ordered_subsets(range(U.n_players))]
    return max(vals) - min(vals)


def make_synthetic_utility(kind: str, params: Mapping[str, Any] | None = None,
                           seed: int = 0) -> UtilityOracle:
    """Build one of the fixture games by name.

    kinds: ``table`` (``values`` mapping, or ``n`` for a random table),
    ``positional-linear`` (``position_weights``, ``player_values``),
    ``order-invariant`` (``n`` with ``additive`` or ``by_size``),
    ``bounded-marginal`` (``position_range``, optional ``scale``),
    ``class-ordinal`` (``labels``, ``values``, ``ordinal_class``, ``scale``).
    """
    params = dict(params or {})
    if kind == "table":
        if "values" in params:
            return TableUtility.from_json(params)
        return TableUtility.random(int(params["n"]), seed=seed,
                                   low=params.get("low", 0.0), high=params.get("high", 1.0))
    if kind == "positional-linear":
        return PositionalLinearUtility(params["position_weights"], params["player_values"])
    if kind == "order-invariant":
        return OrderInvariantUtility(int(params["n"]), additive=params.get("additive"),
                                     by_size=params.get("by_size"))
    if kind == "bounded-marginal":
        return BoundedMarginalUtility(params["position_range"], params.get("scale"), seed=seed)
    if kind == "class-ordinal":
        return ClassOrdinalUtility(params["labels"], params["values"], params["ordinal_class"],
                                   scale=params.get("scale", 1.0), seed=seed)
    raise ValueError(f"unknown synthetic utility kind {kind!r}")
