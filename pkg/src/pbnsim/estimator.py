"""Steady-state estimation and speedup prediction.

The statistical estimator is the two-state Markov chain approach to run
length control: the trajectory is projected onto a 0/1 predicate, the
smallest thinning interval ``k`` for which the thinned projection looks
first-order Markov (BIC of second- vs first-order fit) is chosen, and the
fitted switching probabilities ``alpha = P(0->1)``, ``beta = P(1->0)``
give the burn-in and the sample size needed for the requested precision
and confidence. The run is extended and refitted until it is long enough.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from . import _kernels as K
from .engine import Simulator, exact_transition_matrix
from .model import Model
from .reduction import ReducedModel

__all__ = [
    "EstimationResult",
    "SPEEDUP_COEFFICIENTS",
    "estimate_steady_state",
    "fit_two_state",
    "marginal_steady_state_exact",
    "parse_predicate",
    "predict_speedup",
    "stationary_distribution",
]

SPEEDUP_COEFFICIENTS = (2.89, 2.71, 2.40, -1.65, 0.71)


def predict_speedup(leaf_fraction: float, density: float) -> float:
    """Fitted speedup polynomial in leaf fraction and density."""
    b1, b2, b3, b4, b5 = SPEEDUP_COEFFICIENTS
    x1, x2 = leaf_fraction, density
    return b1 + b2 * x1 + b3 * x1 * x1 + b4 * x2 + b5 * x2 * x2


def parse_predicate(model: Model, text: str) -> tuple[tuple[int, int], ...]:
    """``"a=1&b=0"`` -> ``((index_of_a, 1), (index_of_b, 0))``."""
    literals = []
    for part in text.split("&"):
        part = part.strip()
        name, sep, value = part.partition("=")
        if not sep or value.strip() not in ("0", "1"):
            raise ValueError(f"bad predicate literal {part!r}; expected name=0 or name=1")
        try:
            literals.append((model.index_of(name.strip()), int(value)))
        except KeyError:
            raise ValueError(f"predicate names unknown node {name.strip()!r}") from None
    return tuple(literals)


def _holds(predicate, states: np.ndarray) -> np.ndarray:
    hit = np.ones(len(states), dtype=bool)
    for node, value in predicate:
        hit &= ((states >> node) & 1) == value
    return hit


def stationary_distribution(P: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Stationary vector of a row-stochastic matrix.

    A direct solve gives the starting point; power iteration then runs until
    the L1 residual ``|pi P - pi|`` is at most ``tol``.
    """
    size = len(P)
    A = P.T - np.eye(size)
    A[-1, :] = 1.0
    b = np.zeros(size)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
        pi = np.clip(pi, 0.0, None)
    except np.linalg.LinAlgError:
        pi = np.full(size, 1.0 / size)
    pi /= pi.sum()
    for _ in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        residual = np.abs(nxt - pi).sum()
        pi = nxt
        if residual <= tol:
            return pi
    raise RuntimeError(f"power iteration did not reach residual {tol}")


def marginal_steady_state_exact(m: Model | ReducedModel, predicate) -> float:
    """Stationary mass of the states satisfying ``predicate`` (small models only)."""
    P = exact_transition_matrix(m)
    pi = stationary_distribution(P)
    states = np.arange(len(pi))
    return float(pi[_holds(predicate, states)].sum())


# -- two-state Markov chain approach ----------------------------------------

@dataclass
class EstimationResult:
    estimate: float
    sample_size: int
    burn_in: int
    thinning: int
    alpha: float
    beta: float
    steps: int
    wall_time: float
    degenerate: bool = False


def _bic_first_order(counts: np.ndarray) -> float:
    """BIC of the second-order vs first-order fit; negative favours first order."""
    n = counts.reshape(2, 2, 2).astype(np.float64)
    total = n.sum()
    if total == 0:
        return math.inf
    n_ij = n.sum(axis=2)
    n_jk = n.sum(axis=0)
    n_j = n.sum(axis=(0, 2))
    g2 = 0.0
    for i in range(2):
        for j in range(2):
            for k in range(2):
                if n[i, j, k] > 0:
                    expected = n_ij[i, j] * n_jk[j, k] / n_j[j]
                    g2 += 2.0 * n[i, j, k] * math.log(n[i, j, k] / expected)
    return g2 - 2.0 * math.log(total)


def fit_two_state(tcounts: np.ndarray) -> tuple[int, float, float, bool]:
    """Pick the thinning interval and fit the switching probabilities.

    ``tcounts[k]`` holds the eight triple counts of the k-thinned projection.
    Returns ``(k, alpha, beta, first_order_ok)``.
    """
    chosen = None
    for k in range(1, len(tcounts)):
        if tcounts[k].sum() == 0:
            break
        if _bic_first_order(tcounts[k]) < 0:
            chosen = k
            break
    ok = chosen is not None
    if chosen is None:
        filled = [k for k in range(1, len(tcounts)) if tcounts[k].sum() > 0]
        chosen = filled[-1] if filled else 1
    pairs = tcounts[chosen].reshape(2, 2, 2).sum(axis=0)
    from0 = pairs[0].sum()
    from1 = pairs[1].sum()
    alpha = pairs[0, 1] / from0 if from0 else 0.0
    beta = pairs[1, 0] / from1 if from1 else 0.0
    return chosen, float(alpha), float(beta), ok


def _requirements(alpha, beta, k, precision, confidence, epsilon) -> tuple[int, int]:
    """Burn-in and sample size in unthinned steps."""
    s = alpha + beta
    lam = 1.0 - s
    if abs(lam) < 1e-300 or abs(lam) >= 1.0:
        burn = 1
    else:
        burn = max(1, math.ceil(math.log(epsilon * s / max(alpha, beta)) / math.log(abs(lam))))
    z = NormalDist().inv_cdf(0.5 * (1.0 + confidence))
    n = math.ceil(alpha * beta * (2.0 - s) / s ** 3 * (z / precision) ** 2)
    return burn * k, max(1, n) * k


def estimate_steady_state(
    method: str,
    target,
    predicate,
    precision: float = 1e-5,
    confidence: float = 0.95,
    seed: int = 0,
    s0=None,
    pilot: int = 10_000,
    epsilon: float | None = None,
    max_steps: int = 10 ** 11,
) -> EstimationResult:
    """Estimate the stationary probability that ``predicate`` holds.

    ``predicate`` is a sequence of ``(original_node_index, value)`` literals;
    ``epsilon`` (burn-in closeness) defaults to ``precision / 10``.
    """
    if not 0 < precision < 1:
        raise ValueError("precision must lie in (0, 1)")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    if epsilon is None:
        epsilon = precision / 10
    pilot = max(pilot, 3 * K.KMAX + K.BLOCK)
    start = time.perf_counter()
    sim = Simulator(method, target, seed=seed, s0=s0, predicate=tuple(predicate))
    sim.advance(pilot, track=False)
    degenerate = False
    while True:
        k, alpha, beta, _ = fit_two_state(sim.tcounts)
        if alpha == 0.0 or beta == 0.0:
            # predicate never switched: widen the run before giving up
            if sim.t * 2 <= max_steps:
                sim.advance(sim.t, track=False)
                continue
            degenerate = True
            burn, need = 0, 0
            break
        burn, need = _requirements(alpha, beta, k, precision, confidence, epsilon)
        burn = -(-burn // K.BLOCK) * K.BLOCK
        total = burn + need
        if total > max_steps:
            raise RuntimeError(f"required {total} steps exceeds max_steps={max_steps}")
        if sim.t >= total:
            break
        sim.advance(total - sim.t, track=False)

    hits = int(sim.pstats[0])
    if degenerate:
        estimate = hits / sim.t
        used = sim.t
    else:
        used = sim.t - burn
        estimate = (hits - int(sim.ckpt[burn // K.BLOCK])) / used
    return EstimationResult(
        estimate=estimate, sample_size=used, burn_in=burn, thinning=k, alpha=alpha, beta=beta,
        steps=sim.t, wall_time=time.perf_counter() - start, degenerate=degenerate,
    )
