"""Leaf detection and network reduction.

A leaf is a node outside the interest set that has no children once every
leaf child has been removed. Leaves never influence the kept nodes, so
they can be dropped; their perturbations collapse into a single check
against ``t = (1 - p) ** n_leaves``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .model import Model, Node

__all__ = ["ReducedModel", "check_leaf_perturbation", "children_of", "find_leaves", "reduce"]


def children_of(m: Model) -> list[set[int]]:
    children: list[set[int]] = [set() for _ in range(m.n)]
    for j, node in enumerate(m.nodes):
        for parent in node.parent_set():
            children[parent].add(j)
    return children


def find_leaves(m: Model) -> list[int]:
    """Removable nodes, in an order where each has no kept child when removed.

    Self-loops count as a child, so a self-regulating node is never a leaf.
    """
    children = children_of(m)
    remaining = [len(c) for c in children]
    removed = [False] * m.n
    queue = deque(i for i in range(m.n) if remaining[i] == 0 and i not in m.interest)
    order = []
    while queue:
        j = queue.popleft()
        removed[j] = True
        order.append(j)
        for parent in m.nodes[j].parent_set():
            if parent == j or removed[parent]:
                continue
            remaining[parent] -= 1
            if remaining[parent] == 0 and parent not in m.interest:
                queue.append(parent)
    return order


@dataclass(frozen=True)
class ReducedModel:
    model: Model
    removed: tuple[int, ...]
    index_map: dict[int, int]
    leaf_no_perturb_prob: float

    @property
    def kept(self) -> list[int]:
        """Original index of each reduced node."""
        out = [0] * len(self.index_map)
        for orig, red in self.index_map.items():
            out[red] = orig
        return out

    @property
    def n_leaves(self) -> int:
        return len(self.removed)


def reduce(m: Model) -> ReducedModel:
    removed = find_leaves(m)
    if not removed:
        return ReducedModel(m, (), {i: i for i in range(m.n)}, 1.0)
    gone = set(removed)
    kept = [i for i in range(m.n) if i not in gone]
    if not kept:
        raise ValueError("every node is a leaf; nothing left to simulate")
    index_map = {orig: red for red, orig in enumerate(kept)}
    nodes = []
    for orig in kept:
        node = m.nodes[orig]
        nodes.append(Node(node.name, tuple(f.remap(index_map) for f in node.functions), node.probs))
    interest = frozenset(index_map[i] for i in m.interest)
    reduced = Model(tuple(nodes), m.perturbation_rate, interest)
    t = (1.0 - m.perturbation_rate) ** len(removed)
    return ReducedModel(reduced, tuple(removed), index_map, t)


def check_leaf_perturbation(t: float, u: float) -> bool:
    """True when at least one leaf flipped, given a uniform draw ``u``."""
    return u > t
