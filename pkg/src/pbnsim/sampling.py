"""Alias tables and grouped perturbation.

``build_alias`` is the two-worklist (small/large) form of the alias method.
``alias_next`` takes two independent uniforms: one picks the cell, the
other decides between the cell and its alias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AliasTable",
    "PerturbationPlan",
    "alias_distribution",
    "alias_next",
    "build_alias",
    "build_perturbation_plan",
    "draw",
    "perturbation_probs",
]

K_MAX_LIMIT = 24
DEFAULT_K = 16


@dataclass(frozen=True, eq=False)
class AliasTable:
    prob: np.ndarray  # float64 cut-offs
    alias: np.ndarray  # int64

    @property
    def size(self) -> int:
        return len(self.prob)

    def __eq__(self, other):
        if not isinstance(other, AliasTable):
            return NotImplemented
        return np.array_equal(self.prob, other.prob) and np.array_equal(self.alias, other.alias)


def build_alias(probs) -> AliasTable:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or len(probs) == 0:
        raise ValueError("alias table needs a non-empty distribution")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("probabilities must be finite and non-negative")
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total:.12g}, not 1")

    n = len(probs)
    scaled = (probs * n).tolist()
    prob = [1.0] * n
    alias = list(range(n))
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    small.reverse()
    large.reverse()
    while small and large:
        lo = small.pop()
        hi = large.pop()
        prob[lo] = scaled[lo]
        alias[lo] = hi
        scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
        if scaled[hi] < 1.0:
            small.append(hi)
        else:
            large.append(hi)
    # leftovers on either list are rounding residue: keep the cell outright
    return AliasTable(np.array(prob, dtype=np.float64), np.array(alias, dtype=np.int64))


def alias_next(table: AliasTable, u1: float, u2: float) -> int:
    n = len(table.prob)
    i = int(u1 * n)
    if i >= n:
        i = n - 1
    return i if u2 < table.prob[i] else int(table.alias[i])


def draw(table: AliasTable, rng) -> int:
    """One sample; size-1 tables consume no randomness."""
    if len(table.prob) == 1:
        return 0
    u1 = rng.random()
    u2 = rng.random()
    return alias_next(table, u1, u2)


def alias_distribution(table: AliasTable) -> np.ndarray:
    """Exact distribution implied by the table: each cell has mass 1/N."""
    n = len(table.prob)
    out = np.zeros(n)
    np.add.at(out, np.arange(n), table.prob / n)
    np.add.at(out, table.alias, (1.0 - table.prob) / n)
    return out


def perturbation_probs(k: int, p: float) -> np.ndarray:
    """P(c) = p^popcount(c) (1-p)^(k - popcount(c)) for c in [0, 2^k)."""
    c = np.arange(1 << k, dtype=np.int64)
    pc = np.zeros(1 << k, dtype=np.int64)
    for bit in range(k):
        pc += (c >> bit) & 1
    return np.power(p, pc) * np.power(1.0 - p, k - pc)


@dataclass(frozen=True, eq=False)
class PerturbationPlan:
    n_nodes: int
    k: int
    g: int
    k_last: int
    table: AliasTable
    mask: int

    def __eq__(self, other):
        if not isinstance(other, PerturbationPlan):
            return NotImplemented
        return (self.n_nodes, self.k, self.g, self.k_last, self.mask) == (
            other.n_nodes, other.k, other.g, other.k_last, other.mask) and self.table == other.table


def build_perturbation_plan(n_nodes: int, k_max: int, p: float) -> PerturbationPlan:
    if n_nodes < 1:
        raise ValueError("perturbation plan needs at least one node")
    if not 1 <= k_max <= K_MAX_LIMIT:
        raise ValueError(f"k must lie in [1, {K_MAX_LIMIT}], got {k_max}")
    g = -(-n_nodes // k_max)
    k = -(-n_nodes // g)
    k_last = n_nodes - k * (g - 1)
    table = build_alias(perturbation_probs(k, p))
    return PerturbationPlan(n_nodes, k, g, k_last, table, (1 << k_last) - 1)
