"""Random PBN generator for benchmark corpora.

The generator fixes a set of kept nodes (the interest set) and a set of
leaves. Kept nodes only read kept nodes; each leaf reads kept nodes and
leaves placed before it in a random leaf order, so leaf-to-leaf wiring is
acyclic and every leaf is removable. Parent counts are spread over the
predictor functions so the total hits ``round(density * n)`` exactly; the
functions of one node all read subsets of a single regulator set.
"""

from __future__ import annotations

import numpy as np

from .model import BooleanFunction, Model, ModelError, Node, normalize_probs

__all__ = ["generate_random"]


def _selection_probs(rng: np.random.Generator, ell: int) -> tuple[float, ...]:
    if ell == 1:
        return (1.0,)
    # thousandths, each at least 0.001, summing to exactly 1000
    raw = rng.dirichlet(np.ones(ell)) * (1000 - ell)
    ints = np.floor(raw).astype(int) + 1
    ints[int(np.argmax(ints))] += 1000 - int(ints.sum())
    return normalize_probs([int(w) / 1000 for w in ints])


def generate_random(
    n: int,
    target_density: float,
    leaf_pct: float = 0.0,
    max_functions: int = 3,
    max_parents: int = 5,
    seed: int = 0,
    perturbation_rate: float = 0.001,
) -> Model:
    if n < 2:
        raise ModelError("generator needs n >= 2")
    if max_parents < 1 or max_functions < 1:
        raise ModelError("max_parents and max_functions must be positive")
    if not (0.0 <= leaf_pct < 1.0):
        raise ModelError("leaf_pct must lie in [0, 1)")
    if target_density <= 0:
        raise ModelError("target density must be positive")
    if target_density > max_parents * max_functions:
        raise ModelError(f"density {target_density} infeasible with at most {max_functions} "
                         f"functions of {max_parents} parents")

    rng = np.random.default_rng(seed)
    n_leaves = min(int(round(leaf_pct * n)), n - 1)
    perm = rng.permutation(n)
    leaves = [int(i) for i in perm[:n_leaves]]
    kept = sorted(int(i) for i in perm[n_leaves:])
    n_kept = len(kept)

    # parent pool of each node: kept nodes read kept nodes; leaf j reads kept + leaves[:j]
    pool = {i: kept for i in kept}
    for pos, leaf in enumerate(leaves):
        pool[leaf] = kept + leaves[:pos]

    ell = rng.integers(1, max_functions + 1, size=n)
    total = int(round(target_density * n))

    def cap(i: int) -> int:
        return min(max_parents, len(pool[i]))

    # grow function counts until the parent total fits
    room = sum(int(ell[i]) * cap(i) for i in range(n))
    order = rng.permutation(n)
    for i in order:
        if room >= total:
            break
        while ell[i] < max_functions and room < total:
            ell[i] += 1
            room += cap(int(i))
    if room < total:
        raise ModelError(f"density {target_density} infeasible for n={n} with {n_kept} kept nodes")
    # shrink function counts while there are more functions than parents to hand out
    for i in order:
        while ell[i] > 1 and int(ell.sum()) > total:
            ell[i] -= 1

    owners = np.repeat(np.arange(n), ell)
    caps = np.array([cap(int(i)) for i in owners])
    arity = np.zeros(len(owners), dtype=int)
    if total >= len(owners):
        arity[:] = np.minimum(1, caps)
    else:
        arity[rng.choice(len(owners), size=total, replace=False)] = 1
    remaining = total - int(arity.sum())
    while remaining > 0:
        open_slots = np.flatnonzero(arity < caps)
        pick = rng.choice(open_slots, size=min(remaining, len(open_slots)), replace=False)
        arity[pick] += 1
        remaining -= len(pick)

    # each node draws a regulator set once; its functions read subsets of it
    functions: list[list[BooleanFunction]] = [[] for _ in range(n)]
    first = np.concatenate([[0], np.cumsum(ell)[:-1]])
    for i in range(n):
        arities = [int(a) for a in arity[first[i]: first[i] + ell[i]]]
        candidates = pool[i]
        size = max(arities)
        regulators = [int(candidates[j]) for j in rng.choice(len(candidates), size=size, replace=False)]
        for k in arities:
            parents = [regulators[j] for j in rng.choice(size, size=k, replace=False)]
            bits = rng.integers(0, 2, size=1 << k)
            functions[i].append(BooleanFunction.from_outputs(parents, bits))

    nodes = tuple(
        Node(f"x{i}", tuple(functions[i]), _selection_probs(rng, len(functions[i]))) for i in range(n)
    )
    return Model(nodes, perturbation_rate, frozenset(kept))
