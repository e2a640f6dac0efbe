"""Node grouping for simultaneous update.

Nodes with several predictor functions are split into ``m`` groups so that
the summed number of combined functions stays within a budget ``theta``;
``m`` starts at the AM-GM lower bound and grows until the greedy
multiplicative partition fits. Single-function nodes are packed by shared
parents. Each group then gets its combined predictor functions: one flat
table per function choice, indexed by the valuation of the group's parent
union and returning all member outputs packed into one integer.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Model
from .reduction import ReducedModel
from .sampling import AliasTable, build_alias

__all__ = [
    "CombinedFunction",
    "Group",
    "GroupingPlan",
    "ResourceLimitError",
    "combine",
    "greedy_partition",
    "lower_bound",
    "partition",
]

DEFAULT_THETA = 1 << 25
DEFAULT_MAX_GROUP_PARENTS = 18
DEFAULT_MAX_TABLE_BITS = 12
MAX_GROUP_WIDTH = 32
MAX_TOTAL_CELLS = 1 << 28


class ResourceLimitError(RuntimeError):
    """A memory budget cannot accommodate the requested grouping."""


def lower_bound(weights: Sequence[int], theta: float) -> int:
    """Smallest m with ``m * prod(weights) ** (1/m) <= theta``.

    Searched from 1 up to ``len(weights)``; if even that fails no
    partition exists and ``len(weights)`` is returned so the caller's
    budget check reports it.
    """
    if not weights:
        return 1
    log_total = math.fsum(math.log(w) for w in weights)
    log_theta = math.log(theta)
    for m in range(1, len(weights) + 1):
        if math.log(m) + log_total / m <= log_theta + 1e-12:
            return m
    return len(weights)


def greedy_partition(weights: Sequence[int], m: int) -> list[list[int]]:
    """Assign item indices to ``m`` groups, heaviest first, smallest product wins."""
    if m < 1:
        raise ValueError("need at least one group")
    order = sorted(range(len(weights)), key=lambda i: (-weights[i], i))
    groups: list[list[int]] = [[] for _ in range(m)]
    products = [1] * m
    for i in order:
        j = min(range(m), key=lambda g: (products[g], g))
        groups[j].append(i)
        products[j] *= weights[i]
    return groups


@dataclass(frozen=True, eq=False)
class CombinedFunction:
    parents: tuple[int, ...]
    outputs: np.ndarray  # uint32, length 2^len(parents)
    selection_prob: float
    choice: tuple[int, ...]  # function index chosen for each member

    def __eq__(self, other):
        if not isinstance(other, CombinedFunction):
            return NotImplemented
        return (self.parents == other.parents and self.choice == other.choice
                and self.selection_prob == other.selection_prob
                and np.array_equal(self.outputs, other.outputs))


@dataclass(frozen=True, eq=False)
class Group:
    members: tuple[int, ...]
    functions: tuple[CombinedFunction, ...]
    alias: AliasTable | None

    @property
    def width(self) -> int:
        return len(self.members)

    @property
    def parents(self) -> tuple[int, ...]:
        return self.functions[0].parents

    @property
    def n_functions(self) -> int:
        return len(self.functions)

    @property
    def cells(self) -> int:
        return self.n_functions << len(self.parents)

    def __eq__(self, other):
        if not isinstance(other, Group):
            return NotImplemented
        return (self.members == other.members and self.functions == other.functions
                and self.alias == other.alias)


@dataclass(frozen=True, eq=False)
class GroupingPlan:
    groups: tuple[Group, ...]
    cum: tuple[int, ...]
    n_multi: int  # the first n_multi groups hold multi-function nodes

    @property
    def order(self) -> list[int]:
        """Reduced-node index at each packed bit position."""
        return [i for g in self.groups for i in g.members]

    @property
    def m(self) -> int:
        return len(self.groups)

    def budget_sum(self) -> int:
        return sum(g.n_functions for g in self.groups[: self.n_multi])

    def table_cells(self) -> int:
        return sum(g.cells for g in self.groups)

    def __eq__(self, other):
        if not isinstance(other, GroupingPlan):
            return NotImplemented
        return self.cum == other.cum and self.n_multi == other.n_multi and self.groups == other.groups


def _union(model: Model, members) -> set[int]:
    out: set[int] = set()
    for i in members:
        out |= model.nodes[i].parent_set()
    return out


def combine(members: Sequence[int], model: Model, budget: int | None = None) -> list[CombinedFunction]:
    """Cartesian product of the members' predictor functions.

    Member 0's choice varies slowest. Output bit ``j`` of each table entry
    is member ``j``'s function evaluated on the same parent valuation.
    """
    members = tuple(members)
    if len(members) > MAX_GROUP_WIDTH:
        raise ResourceLimitError(f"group of {len(members)} nodes exceeds {MAX_GROUP_WIDTH} bits")
    union = tuple(sorted(_union(model, members)))
    n_combined = math.prod(model.nodes[i].n_functions for i in members)
    cells = n_combined << len(union)
    if budget is not None and cells > budget:
        raise ResourceLimitError(f"group needs {cells} table cells, budget is {budget}")
    pos = {node: j for j, node in enumerate(union)}
    v = np.arange(1 << len(union), dtype=np.int64)

    member_outputs = []
    for node_idx in members:
        outs = []
        for f in model.nodes[node_idx].functions:
            idx = np.zeros_like(v)
            for j, parent in enumerate(f.parents):
                idx |= ((v >> pos[parent]) & 1) << j
            outs.append(f.outputs()[idx].astype(np.uint32))
        member_outputs.append(outs)

    tables = [np.zeros(len(v), dtype=np.uint32)]
    for j, outs in enumerate(member_outputs):
        shift = np.uint32(j)
        tables = [t | (o << shift) for t in tables for o in outs]

    combined = []
    choices = itertools.product(*[range(model.nodes[i].n_functions) for i in members])
    for table, choice in zip(tables, choices):
        prob = math.prod(model.nodes[i].probs[c] for i, c in zip(members, choice))
        combined.append(CombinedFunction(union, table, prob, tuple(choice)))
    return combined


def _fits(model: Model, members: list[int], union: set[int], node: int,
          max_parents: int, max_cells: int) -> bool:
    if len(members) + 1 > MAX_GROUP_WIDTH:
        return False
    merged = union | model.nodes[node].parent_set()
    if len(merged) > max_parents:
        return False
    n_combined = math.prod(model.nodes[i].n_functions for i in members) * model.nodes[node].n_functions
    return (n_combined << len(merged)) <= max_cells


def _pack_by_parents(model: Model, nodes: Sequence[int], max_parents: int, max_cells: int) -> list[list[int]]:
    """Add each node to the feasible group sharing the most parents, else open one."""
    groups: list[list[int]] = []
    unions: list[set[int]] = []
    for node in nodes:
        parents = model.nodes[node].parent_set()
        best, best_shared = -1, -1
        for j, (members, union) in enumerate(zip(groups, unions)):
            if not _fits(model, members, union, node, max_parents, max_cells):
                continue
            shared = len(parents & union)
            if shared > best_shared:
                best, best_shared = j, shared
        if best < 0:
            groups.append([node])
            unions.append(set(parents))
        else:
            groups[best].append(node)
            unions[best] |= parents
    return groups


def partition(
    rm: ReducedModel | Model,
    theta: int = DEFAULT_THETA,
    max_group_parents: int = DEFAULT_MAX_GROUP_PARENTS,
    max_table_bits: int = DEFAULT_MAX_TABLE_BITS,
) -> GroupingPlan:
    """Group the nodes of a (reduced) model and build their combined functions.

    Multi-function groups from the greedy search are further split so each
    group's combined tables (functions x parent valuations) stay within
    ``2 ** max_table_bits`` cells and its parent union within
    ``max_group_parents``. Splitting never raises the summed product, so
    the ``theta`` budget still holds. Single-function groups are limited by
    ``max_group_parents`` only.
    """
    model = rm.model if isinstance(rm, ReducedModel) else rm
    max_cells = 1 << max_table_bits
    weights_all = model.n_functions()
    multi = [i for i in range(model.n) if weights_all[i] > 1]
    single = [i for i in range(model.n) if weights_all[i] == 1]

    multi_groups: list[list[int]] = []
    if multi:
        weights = [weights_all[i] for i in multi]
        if theta < max(weights):
            raise ResourceLimitError(f"theta={theta} is smaller than a node with {max(weights)} functions")
        m = lower_bound(weights, theta)
        while True:
            found = greedy_partition(weights, m)
            total = sum(math.prod(weights[i] for i in g) for g in found)
            if total <= theta:
                break
            if m >= len(weights):
                raise ResourceLimitError(
                    f"theta={theta} cannot hold the combined functions even with every node alone")
            m += 1
        for g in found:
            if g:
                multi_groups.extend(
                    _pack_by_parents(model, [multi[i] for i in g], max_group_parents, max_cells))

    single_groups = _pack_by_parents(model, single, max_group_parents, 1 << max_group_parents)
    single_cells = sum(1 << len(_union(model, g)) for g in single_groups)
    if single_cells > theta:
        raise ResourceLimitError(f"single-function groups need {single_cells} cells, theta is {theta}")

    groups = []
    total_cells = 0
    for members in multi_groups + single_groups:
        functions = combine(members, model)
        total_cells += len(functions) * len(functions[0].outputs)
        if total_cells > MAX_TOTAL_CELLS:
            raise ResourceLimitError(f"combined tables exceed {MAX_TOTAL_CELLS} cells")
        alias = build_alias([f.selection_prob for f in functions]) if len(functions) > 1 else None
        groups.append(Group(tuple(members), tuple(functions), alias))

    cum = [0]
    for g in groups[:-1]:
        cum.append(cum[-1] + g.width)
    return GroupingPlan(tuple(groups), tuple(cum), len(multi_groups))
