"""Players, ordered coalitions and the utility-oracle abstraction.

Every solver in the package talks to a game through :class:`UtilityOracle`,
which maps an *ordered* coalition (a tuple of distinct, zero-based player
indices) to a float.  Order matters: ``U((0, 1))`` and ``U((1, 0))`` are
different evaluations.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

Coalition = tuple[int, ...]


class OracleError(RuntimeError):
    """Raised when a utility oracle cannot produce a value for a coalition."""


def canonical_sequence(players: Iterable[int]) -> Coalition:
    """Members of a player set in strictly increasing index order."""
    return tuple(sorted(set(players)))


def insert_at(seq: Sequence[int], player: int, k: int) -> Coalition:
    """Insert ``player`` so that exactly ``k`` elements of ``seq`` precede it."""
    if player in seq:
        raise ValueError(f"player {player} already in sequence {tuple(seq)}")
    if not 0 <= k <= len(seq):
        raise ValueError(f"slot {k} out of range for a sequence of length {len(seq)}")
    seq = tuple(seq)
    return seq[:k] + (player,) + seq[k:]


def apply_transposition(seq: Sequence[int], i: int, j: int) -> Coalition:
    """Relabel ``i`` as ``j`` and ``j`` as ``i`` in place; positions are kept."""
    if i == j:
        raise ValueError("transposition needs two distinct players")
    swap = {i: j, j: i}
    return tuple(swap.get(p, p) for p in seq)


def check_coalition(seq: Sequence[int], n_players: int) -> Coalition:
    seq = tuple(int(p) for p in seq)
    if len(set(seq)) != len(seq):
        raise ValueError(f"coalition has repeated players: {seq}")
    for p in seq:
        if not 0 <= p < n_players:
            raise ValueError(f"player {p} outside [0, {n_players})")
    return seq


class UtilityOracle:
    """Base class for games over ordered coalitions.

    Subclasses implement :meth:`evaluate` for non-empty sequences; calling the
    oracle on ``()`` returns ``empty_value`` without touching ``evaluate``.
    Implementations must be deterministic and safe to call from several
    threads at once.
    """

    n_players: int
    empty_value: float = 0.0

    def evaluate(self, seq: Coalition) -> float:
        raise NotImplementedError

    def __call__(self, seq: Sequence[int]) -> float:
        seq = tuple(seq)
        if not seq:
            return float(self.empty_value)
        return float(self.evaluate(seq))


class FunctionUtility(UtilityOracle):
    """Adapts a plain callable ``f(seq) -> float`` to the oracle interface."""

    def __init__(self, func: Callable[[Coalition], float], n_players: int,
                 empty_value: float = 0.0):
        self.func = func
        self.n_players = int(n_players)
        self.empty_value = float(empty_value)

    def evaluate(self, seq: Coalition) -> float:
        return float(self.func(seq))


class SumUtility(UtilityOracle):
    """Pointwise sum of two games on the same players."""

    def __init__(self, first: UtilityOracle, second: UtilityOracle):
        if first.n_players != second.n_players:
            raise ValueError("games must have the same number of players")
        self.first = first
        self.second = second
        self.n_players = first.n_players
        self.empty_value = first.empty_value + second.empty_value

    def evaluate(self, seq: Coalition) -> float:
        return self.first(seq) + self.second(seq)


class CachedUtility(UtilityOracle):
    """Memoizes an oracle on the exact ordered sequence.

    ``maxsize=None`` keeps every entry; otherwise the least recently used
    entry is evicted.  Hit and miss counters are exposed for diagnostics.
    """

    def __init__(self, inner: UtilityOracle, maxsize: int | None = None):
        self.inner = inner
        self.n_players = inner.n_players
        self.empty_value = inner.empty_value
        self.maxsize = maxsize
        self.hits = 0
        self.misses = 0
        self._cache: OrderedDict[Coalition, float] = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._cache)

    def evaluate(self, seq: Coalition) -> float:
        return self.evaluate_cached(seq)

    def __call__(self, seq: Sequence[int]) -> float:
        return self.evaluate_cached(tuple(seq))

    def evaluate_cached(self, seq: Coalition) -> float:
        if not seq:
            return float(self.empty_value)
        with self._lock:
            if seq in self._cache:
                self.hits += 1
                self._cache.move_to_end(seq)
                return self._cache[seq]
        try:
            value = float(self.inner(seq))
        except OracleError:
            raise
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise OracleError(f"utility evaluation failed on {seq}: {exc}") from exc
        with self._lock:
            self.misses += 1
            self._cache[seq] = value
            if self.maxsize is not None and len(self._cache) > self.maxsize:
                self._cache.popitem(last=False)
        return value

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()
            self.hits = self.misses = 0


@dataclass
class ValueVector:
    """Per-player values plus the bookkeeping of how they were obtained."""

    values: np.ndarray
    per_player_samples: np.ndarray
    method: str
    permutations_used: int = 0
    utility_evaluations: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.per_player_samples = np.asarray(self.per_player_samples, dtype=np.int64)
        if self.values.shape != self.per_player_samples.shape:
            raise ValueError("values and per_player_samples must have equal length")
        if np.any(self.per_player_samples < 0):
            raise ValueError("sample counts must be non-negative")

    @property
    def n_players(self) -> int:
        return len(self.values)

    @property
    def defined(self) -> np.ndarray:
        """False for players whose value was never observed (NaN)."""
        return ~np.isnan(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "n_players": self.n_players,
            "values": [None if np.isnan(v) else float(v) for v in self.values],
            "per_player_samples": [int(s) for s in self.per_player_samples],
            "permutations_used": int(self.permutations_used),
            "utility_evaluations": int(self.utility_evaluations),
            **self.extra,
        }
