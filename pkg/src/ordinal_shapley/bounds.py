"""Tail bounds for the TMC and CMC estimators.

All public bound functions return the probability clamped to ``[0, 1]``;
the ``*_raw`` variants return the unclamped expression.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import UtilityOracle
from .exact import PERMUTATION_LIMIT, ExactSizeError


@dataclass
class TmcBoundInput:
    """Inputs of the positional Hoeffding bound for one client.

    ``per_position_samples[j]`` counts the rounds in which the client sat at
    slot ``j + 1``; only the first ``k`` slots enter the bound.  ``epsilon_k``
    is the bias from ignoring slots beyond ``k``.
    """

    per_position_samples: Sequence[int]
    k: int
    r_max: float
    epsilon: float
    epsilon_k: float = 0.0

    def validate(self) -> None:
        if self.k < 1 or self.k > len(self.per_position_samples):
            raise ValueError("k must lie in 1..len(per_position_samples)")
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        if any(m < 0 for m in self.per_position_samples):
            raise ValueError("sample counts must be non-negative")
        if self.epsilon_k < 0:
            raise ValueError("epsilon_k must be non-negative")
        if self.epsilon <= self.epsilon_k:
            raise ValueError("the bound needs epsilon > epsilon_k")


@dataclass
class CmcBoundInput:
    q: float
    T: int
    delta: float
    epsilon: float

    def validate(self) -> None:
        if not 0 < self.q <= 1:
            raise ValueError("selection probability q must lie in (0, 1]")
        if self.T < 1:
            raise ValueError("T must be a positive integer")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def tmc_bound_raw(inp: TmcBoundInput) -> float:
    inp.validate()
    gap = inp.epsilon - inp.epsilon_k
    denom = inp.k ** 2 * inp.r_max ** 2
    return math.fsum(2.0 * math.exp(-2.0 * m * gap * gap / denom)
                     for m in inp.per_position_samples[: inp.k])


def tmc_bound(inp: TmcBoundInput) -> float:
    """``min(1, sum_j 2 exp(-2 m_j (eps - eps_k)^2 / (k^2 r_max^2)))``."""
    return min(1.0, tmc_bound_raw(inp))


def positional_range(a: Sequence[float], b: Sequence[float], k: int,
                     nonnegative: bool = False) -> float:
    """Upper bound on the marginal range at slot ``k + 1``.

    ``a[s - 1] * s <= U <= b[s - 1] * s`` for every ordered coalition of size
    ``s``.  With ``nonnegative`` the lower end of the marginal is floored at 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("a and b must have equal length")
    if np.any(a > b):
        raise ValueError("need a_s <= b_s for every size s")
    if not 0 <= k < len(a):
        raise ValueError(f"slot k+1={k + 1} needs sizes up to {k + 1}")
    a_next, b_next = a[k], b[k]
    a_k, b_k = (a[k - 1], b[k - 1]) if k >= 1 else (0.0, 0.0)
    upper = (b_next - a_k) * k + b_next
    lower = (a_next - b_k) * k + a_next
    if nonnegative:
        lower = max(lower, 0.0)
    return float(upper - lower)


def bennett_h(x: float) -> float:
    """``(1 + x) ln(1 + x) - x``.

    Below 0.1 the closed form cancels badly, so the alternating series
    ``sum_{k>=2} (-x)^k / (k (k - 1))`` is summed instead.
    """
    if x < 0:
        raise ValueError("bennett_h is defined for x >= 0")
    if x < 0.1:
        return math.fsum((-x) ** k / (k * (k - 1)) for k in range(2, 40))
    return (1.0 + x) * math.log1p(x) - x


def cmc_bound_raw(inp: CmcBoundInput) -> float:
    inp.validate()
    var = 2.0 * inp.q - inp.q ** 2
    return math.exp(-var * inp.T * bennett_h(inp.epsilon / (var * inp.delta)))


def cmc_bound(inp: CmcBoundInput) -> float:
    """``min(1, exp(-(2q - q^2) T h(eps / ((2q - q^2) delta))))``."""
    return min(1.0, cmc_bound_raw(inp))


def vector_bound_raw(per_client_bound: Callable[[int, float], float], n: int, p: float,
                     epsilon: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    if n < 1:
        raise ValueError("need at least one client")
    eps = epsilon if math.isinf(p) else epsilon / n ** (1.0 / p)
    return math.fsum(per_client_bound(i, eps) for i in range(n))


def vector_bound(per_client_bound: Callable[[int, float], float], n: int, p: float,
                 epsilon: float) -> float:
    """Union bound for ``P(||phi - phi_hat||_p >= epsilon)``.

    For finite ``p`` every client is checked at ``epsilon / n**(1/p)``; for
    ``p = inf`` at ``epsilon`` itself.
    """
    return min(1.0, vector_bound_raw(per_client_bound, n, p, epsilon))


def truncation_bias(U: UtilityOracle, player: int, k: int) -> float:
    """``|phi_i^(k) - phi_i|``: what ignoring slots beyond ``k`` costs (exact, n <= 8).

    Slot ``j`` collects the orderings in which ``j - 1`` players precede
    ``player``.
    """
    n = U.n_players
    if n > PERMUTATION_LIMIT:
        raise ExactSizeError("truncation bias needs full enumeration")
    if not 1 <= k <= n:
        raise ValueError("k must lie in 1..n")
    per_slot = np.zeros(n)
    others = [p for p in range(n) if p != player]
    for s in range(n):
        weight = 1.0 / (n * math.factorial(s) * math.comb(n - 1, s))
        per_slot[s] = weight * math.fsum(U(seq + (player,)) - U(seq)
                                         for seq in itertools.permutations(others, s))
    return float(abs(per_slot[:k].sum() - per_slot.sum()))
