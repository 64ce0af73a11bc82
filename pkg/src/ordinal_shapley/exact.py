"""Exact Shapley-type values by full enumeration.

Four allocation rules are provided:

* ``classic_shapley``: the set-function Shapley value (subset form, with a
  permutation-form cross-check on small games);
* ``ordinal_shapley``: averages the marginal of inserting a player at every
  slot of every ordered coalition of the others;
* ``partial_ordinal_shapley``: averages the marginal of *appending* a player
  to the sequence that precedes it, over all n! orderings; a second,
  independent subset-and-permutation implementation is kept as an oracle;
* ``special_case_within_union`` / ``special_case_across_union``: the reduced
  sums available when the players split into unions and order effects live
  only inside (resp. only between) unions.

The brute-force axiom checkers at the bottom are used as test oracles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import (
    CachedUtility,
    Coalition,
    UtilityOracle,
    ValueVector,
    apply_transposition,
    canonical_sequence,
    insert_at,
)

CLASSIC_SUBSET_LIMIT = 12
PERMUTATION_LIMIT = 8
ORDINAL_LIMIT = 7
AXIOM_LIMIT = 7
PREMISE_LIMIT = 6
AXIOM_TOLERANCE = 1e-9


class ExactSizeError(ValueError):
    """The game is too large for exhaustive enumeration."""


def _check_size(n: int, limit: int, what: str) -> None:
    if n < 1:
        raise ValueError("a game needs at least one player")
    if n > limit:
        raise ExactSizeError(f"{what} enumerates too much for n={n} (limit {limit})")


def _players(U: UtilityOracle, n: int | None) -> int:
    if n is None:
        return U.n_players
    if n != U.n_players:
        raise ValueError(f"n={n} does not match the oracle's {U.n_players} players")
    return n


def ordered_subsets(players: Sequence[int], max_len: int | None = None) -> Iterator[Coalition]:
    """Every ordered coalition drawn from ``players``, shortest first."""
    top = len(players) if max_len is None else max_len
    for r in range(top + 1):
        yield from itertools.permutations(players, r)


@dataclass(frozen=True)
class Partition:
    """Disjoint unions covering the players ``0..n-1``."""

    unions: tuple[tuple[int, ...], ...]

    def __init__(self, unions: Iterable[Iterable[int]]):
        cleaned = tuple(tuple(sorted(int(p) for p in u)) for u in unions)
        object.__setattr__(self, "unions", tuple(u for u in cleaned if u))

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        """One union per distinct label, in order of first occurrence."""
        groups: dict = {}
        for idx, lab in enumerate(labels):
            groups.setdefault(lab, []).append(idx)
        return cls(groups.values())

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Parse ``"0,1;2,3"`` style descriptions."""
        return cls([int(p) for p in chunk.split(",") if p.strip()]
                   for chunk in text.split(";") if chunk.strip())

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls([[p] for p in range(n)])

    @classmethod
    def grand(cls, n: int) -> "Partition":
        return cls([range(n)])

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(u) for u in self.unions)

    @property
    def n_players(self) -> int:
        return sum(self.sizes)

    def union_ids(self) -> dict[int, int]:
        return {p: k for k, u in enumerate(self.unions) for p in u}

    def validate(self, n: int) -> None:
        seen = [p for u in self.unions for p in u]
        if len(seen) != len(set(seen)):
            raise ValueError("unions overlap")
        if sorted(seen) != list(range(n)):
            raise ValueError(f"unions do not cover exactly the players 0..{n - 1}")

    def __str__(self) -> str:
        return ";".join(",".join(map(str, u)) for u in self.unions)


@dataclass
class AxiomCheckResult:
    holds: bool
    max_violation: float
    witness: tuple[Coalition, Coalition] | None = None


def _finish(phi: np.ndarray, method: str, cu: CachedUtility, perms: int = 0) -> ValueVector:
    n = len(phi)
    return ValueVector(values=phi, per_player_samples=np.zeros(n, dtype=np.int64),
                       method=method, permutations_used=perms,
                       utility_evaluations=cu.misses)


# ---------------------------------------------------------------------------
# classic value


def _set_values(cu: UtilityOracle, n: int) -> np.ndarray:
    values = np.empty(1 << n)
    for mask in range(1 << n):
        values[mask] = cu(tuple(p for p in range(n) if mask >> p & 1))
    return values


def classic_shapley_permutation_form(U: UtilityOracle, n: int | None = None) -> ValueVector:
    """Average of set marginals over all n! orderings (canonical evaluation)."""
    n = _players(U, n)
    _check_size(n, PERMUTATION_LIMIT, "permutation-form classic value")
    cu = CachedUtility(U)
    set_value = _set_values(cu, n)
    phi = np.zeros(n)
    for perm in itertools.permutations(range(n)):
        mask = 0
        for p in perm:
            phi[p] += set_value[mask | (1 << p)] - set_value[mask]
            mask |= 1 << p
    phi /= math.factorial(n)
    return _finish(phi, "classic-permutation", cu, math.factorial(n))


def classic_shapley(U: UtilityOracle, n: int | None = None, *,
                    cross_check: bool = True) -> ValueVector:
    """Classic Shapley value of a set function.

    The oracle is evaluated on canonical (sorted) sequences only, so it is the
    caller's job to pass an order-invariant game.  For ``n <= 7`` the subset
    form is cross-checked against the permutation form.
    """
    n = _players(U, n)
    _check_size(n, CLASSIC_SUBSET_LIMIT, "classic value")
    cu = CachedUtility(U)
    set_value = _set_values(cu, n)
    weights = [1.0 / (n * math.comb(n - 1, s)) for s in range(n)]
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        for mask in range(1 << n):
            if mask & bit:
                continue
            phi[i] += weights[mask.bit_count()] * (set_value[mask | bit] - set_value[mask])
    if cross_check and n <= 7:
        alt = classic_shapley_permutation_form(cu, n).values
        scale = max(1.0, float(np.max(np.abs(phi))))
        if np.max(np.abs(alt - phi)) > 1e-9 * scale:
            raise RuntimeError("subset and permutation forms of the classic value disagree")
    return _finish(phi, "classic", cu)


# ---------------------------------------------------------------------------
# ordinal and partial ordinal values


def ordinal_shapley(U: UtilityOracle, n: int | None = None) -> ValueVector:
    """Ordinal value: every insertion slot of every ordered coalition of the others."""
    n = _players(U, n)
    _check_size(n, ORDINAL_LIMIT, "ordinal value")
    cu = CachedUtility(U)
    phi = np.zeros(n)
    for i in range(n):
        others = [p for p in range(n) if p != i]
        total = 0.0
        for seq in ordered_subsets(others):
            s = len(seq)
            base = cu(seq)
            slots = sum(cu(insert_at(seq, i, k)) - base for k in range(s + 1))
            total += slots / (math.factorial(s + 1) * math.comb(n - 1, s))
        phi[i] = total / n
    return _finish(phi, "ordinal", cu)


def partial_ordinal_shapley(U: UtilityOracle, n: int | None = None) -> ValueVector:
    """Partial ordinal value as the mean append-marginal over all n! orderings."""
    n = _players(U, n)
    _check_size(n, PERMUTATION_LIMIT, "partial ordinal value")
    cu = CachedUtility(U)
    phi = np.zeros(n)
    for perm in itertools.permutations(range(n)):
        prev = cu(())
        for j, p in enumerate(perm):
            cur = cu(perm[: j + 1])
            phi[p] += cur - prev
            prev = cur
    phi /= math.factorial(n)
    return _finish(phi, "partial", cu, math.factorial(n))


def partial_ordinal_shapley_subset_form(U: UtilityOracle, n: int | None = None) -> ValueVector:
    """Same value, summed over subsets S of the others and their orderings."""
    n = _players(U, n)
    _check_size(n, PERMUTATION_LIMIT, "partial ordinal value")
    cu = CachedUtility(U)
    phi = np.zeros(n)
    for i in range(n):
        others = [p for p in range(n) if p != i]
        for s in range(n):
            weight = 1.0 / (n * math.factorial(s) * math.comb(n - 1, s))
            acc = 0.0
            for seq in itertools.permutations(others, s):
                acc += cu(seq + (i,)) - cu(seq)
            phi[i] += weight * acc
    return _finish(phi, "partial-subset", cu)


# ---------------------------------------------------------------------------
# partition special cases


def _within_union_orders(canon: Coalition, ids: dict[int, int]) -> Iterator[Coalition]:
    """Reorderings of ``canon`` that only permute players inside each union."""
    slots: dict[int, list[int]] = {}
    for pos, p in enumerate(canon):
        slots.setdefault(ids[p], []).append(pos)
    groups = list(slots.values())
    member_perms = [itertools.permutations([canon[pos] for pos in g]) for g in groups]
    for choice in itertools.product(*member_perms):
        out = list(canon)
        for g, members in zip(groups, choice):
            for pos, p in zip(g, members):
                out[pos] = p
        yield tuple(out)


def _coset_representatives(canon: Coalition, ids: dict[int, int]) -> Iterator[Coalition]:
    """Lexicographically smallest sequence of every union-id pattern of ``canon``.

    Orderings with the same pattern (which union sits at which position) are
    one equal-utility orbit when reordering inside a union is irrelevant.
    """
    members: dict[int, list[int]] = {}
    for p in canon:
        members.setdefault(ids[p], []).append(p)
    pattern = tuple(ids[p] for p in canon)
    for arrangement in sorted(set(itertools.permutations(pattern))):
        queues = {k: iter(v) for k, v in members.items()}
        yield tuple(next(queues[k]) for k in arrangement)


def _union_counts(seq: Iterable[int], ids: dict[int, int], n_unions: int) -> list[int]:
    counts = [0] * n_unions
    for p in seq:
        counts[ids[p]] += 1
    return counts


def special_case_within_union(U: UtilityOracle, part: Partition) -> ValueVector:
    """Value when only reorderings inside unions change the utility.

    Sums over subsets S of the others and the within-union reorderings of the
    canonical sequence of S, each weighted by ``1 / (s_1! ... s_t!)``.
    """
    n = U.n_players
    part.validate(n)
    _check_size(n, PERMUTATION_LIMIT, "within-union special case")
    ids = part.union_ids()
    cu = CachedUtility(U)
    phi = np.zeros(n)
    for i in range(n):
        others = [p for p in range(n) if p != i]
        for s in range(n):
            outer = 1.0 / (n * math.comb(n - 1, s))
            for subset in itertools.combinations(others, s):
                counts = _union_counts(subset, ids, len(part.unions))
                inner = 1.0 / math.prod(math.factorial(c) for c in counts)
                for seq in _within_union_orders(subset, ids):
                    phi[i] += outer * inner * (cu(seq + (i,)) - cu(seq))
    return _finish(phi, "special1", cu)


def special_case_across_union(U: UtilityOracle, part: Partition) -> ValueVector:
    """Value when only the interleaving of unions changes the utility.

    Sums over subsets S of the others and one representative ordering per
    union-id pattern, each weighted by ``s_1! ... s_t! / |S|!``.
    """
    n = U.n_players
    part.validate(n)
    _check_size(n, PERMUTATION_LIMIT, "across-union special case")
    ids = part.union_ids()
    cu = CachedUtility(U)
    phi = np.zeros(n)
    for i in range(n):
        others = [p for p in range(n) if p != i]
        for s in range(n):
            outer = 1.0 / (n * math.comb(n - 1, s))
            for subset in itertools.combinations(others, s):
                counts = _union_counts(subset, ids, len(part.unions))
                inner = math.prod(math.factorial(c) for c in counts) / math.factorial(s)
                for seq in _coset_representatives(subset, ids):
                    phi[i] += outer * inner * (cu(seq + (i,)) - cu(seq))
    return _finish(phi, "special2", cu)


def verify_special_case_premise(U: UtilityOracle, part: Partition, case: str,
                                tol: float = AXIOM_TOLERANCE) -> AxiomCheckResult:
    """Brute-force check that a game satisfies a special-case premise.

    ``case="within"``: swapping two present players from *different* unions
    never changes the utility.  ``case="across"``: swapping two present
    players from the *same* union never changes it.
    """
    if case not in ("within", "across"):
        raise ValueError("case must be 'within' or 'across'")
    n = U.n_players
    part.validate(n)
    _check_size(n, PREMISE_LIMIT, "premise verification")
    ids = part.union_ids()
    cu = CachedUtility(U)
    worst, witness = 0.0, None
    for seq in ordered_subsets(range(n)):
        base = cu(seq)
        for a, b in itertools.combinations(seq, 2):
            same = ids[a] == ids[b]
            if (case == "within") == same:
                continue
            swapped = apply_transposition(seq, a, b)
            gap = abs(cu(swapped) - base)
            if gap > worst:
                worst, witness = gap, (seq, swapped)
    return AxiomCheckResult(worst <= tol, worst, witness)


# ---------------------------------------------------------------------------
# axiom oracles


def check_partial_ordinal_null_player(U: UtilityOracle, i: int,
                                      tol: float = AXIOM_TOLERANCE) -> AxiomCheckResult:
    """Does appending ``i`` to any ordered coalition leave the utility unchanged?"""
    n = U.n_players
    _check_size(n, AXIOM_LIMIT, "null-player check")
    others = [p for p in range(n) if p != i]
    worst, witness = 0.0, None
    for seq in ordered_subsets(others):
        grown = seq + (i,)
        gap = abs(U(grown) - U(seq))
        if gap > worst:
            worst, witness = gap, (seq, grown)
    return AxiomCheckResult(worst <= tol, worst, witness)


def check_ordinal_null_player(U: UtilityOracle, i: int,
                              tol: float = AXIOM_TOLERANCE) -> AxiomCheckResult:
    """Does inserting ``i`` at any slot of any ordered coalition change nothing?"""
    n = U.n_players
    _check_size(n, AXIOM_LIMIT, "null-player check")
    others = [p for p in range(n) if p != i]
    worst, witness = 0.0, None
    for seq in ordered_subsets(others):
        base = U(seq)
        for k in range(len(seq) + 1):
            grown = insert_at(seq, i, k)
            gap = abs(U(grown) - base)
            if gap > worst:
                worst, witness = gap, (seq, grown)
    return AxiomCheckResult(worst <= tol, worst, witness)


def check_ordinal_symmetry(U: UtilityOracle, i: int, j: int,
                           tol: float = AXIOM_TOLERANCE) -> AxiomCheckResult:
    """Is the utility unchanged when ``i`` and ``j`` trade places everywhere?"""
    if i == j:
        raise ValueError("symmetry needs two distinct players")
    n = U.n_players
    _check_size(n, AXIOM_LIMIT, "symmetry check")
    worst, witness = 0.0, None
    for seq in ordered_subsets(range(n)):
        swapped = apply_transposition(seq, i, j)
        gap = abs(U(seq) - U(swapped))
        if gap > worst:
            worst, witness = gap, (seq, swapped)
    return AxiomCheckResult(worst <= tol, worst, witness)


def mean_grand_coalition_value(U: UtilityOracle, n: int | None = None) -> float:
    """Average utility of the grand coalition over all n! orderings."""
    n = _players(U, n)
    _check_size(n, PERMUTATION_LIMIT, "efficiency target")
    total = math.fsum(U(perm) for perm in itertools.permutations(range(n)))
    return total / math.factorial(n)


def efficiency_residual(values: ValueVector | np.ndarray, U: UtilityOracle,
                        n: int | None = None) -> float:
    """``|sum(phi) - mean over orderings of U(grand coalition)|``."""
    phi = values.values if isinstance(values, ValueVector) else np.asarray(values, float)
    return abs(math.fsum(phi) - mean_grand_coalition_value(U, n))


__all__ = [
    "AxiomCheckResult",
    "ExactSizeError",
    "Partition",
    "canonical_sequence",
    "check_ordinal_null_player",
    "check_ordinal_symmetry",
    "check_partial_ordinal_null_player",
    "classic_shapley",
    "classic_shapley_permutation_form",
    "efficiency_residual",
    "mean_grand_coalition_value",
    "ordered_subsets",
    "ordinal_shapley",
    "partial_ordinal_shapley",
    "partial_ordinal_shapley_subset_form",
    "special_case_across_union",
    "special_case_within_union",
    "verify_special_case_premise",
]
