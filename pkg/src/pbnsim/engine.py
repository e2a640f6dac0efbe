"""Simulators: reference, reduction-only and structure-based (grouped).

Three methods share one driver:

``old``
    node-by-node stepping of the full model.
``reduced``
    node-by-node stepping of the reduced model plus one leaf check.
``grouped``
    reduced model, grouped perturbation and combined-function update.

The pure-Python steppers (:func:`step_reference`, :func:`step_reduced`,
:func:`step_grouped`) draw randomness in exactly the order of the compiled
kernels, so a seeded Python run reproduces a compiled run bit for bit.
The ``*_step_distribution`` functions enumerate every random outcome of
one step exactly, through the same alias tables and combined tables the
steppers use.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from .grouping import (DEFAULT_MAX_GROUP_PARENTS, DEFAULT_MAX_TABLE_BITS, DEFAULT_THETA,
                       GroupingPlan, partition)
from .model import Model, Node, eval_function, n_words, state_from_int, state_to_int
from .reduction import ReducedModel, check_leaf_perturbation, reduce
from .rng import Xoshiro256, seed_state
from .sampling import (DEFAULT_K, AliasTable, PerturbationPlan, alias_distribution,
                       build_alias, build_perturbation_plan, draw)

__all__ = [
    "METHODS",
    "PreparedSimulation",
    "Simulator",
    "Trajectory",
    "exact_transition_matrix",
    "grouped_step_distribution",
    "prepare",
    "reference_step_distribution",
    "simulate",
    "step_grouped",
    "step_reduced",
    "step_reference",
]

METHODS = ("old", "reduced", "grouped")
MAX_EXACT_NODES = 12


@dataclass(frozen=True, eq=False)
class PreparedSimulation:
    reduced: ReducedModel
    pplan: PerturbationPlan
    gplan: GroupingPlan
    t: float

    @property
    def n(self) -> int:
        return self.reduced.model.n

    @property
    def order(self) -> list[int]:
        """Reduced-node index held by each packed bit."""
        return self.gplan.order

    @property
    def bit_nodes(self) -> list[int]:
        """Original model index held by each packed bit."""
        kept = self.reduced.kept
        return [kept[i] for i in self.order]

    def __eq__(self, other):
        if not isinstance(other, PreparedSimulation):
            return NotImplemented
        return (self.reduced == other.reduced and self.pplan == other.pplan
                and self.gplan == other.gplan and self.t == other.t)


def prepare(
    m: Model,
    theta: int = DEFAULT_THETA,
    k_max: int = DEFAULT_K,
    max_group_parents: int = DEFAULT_MAX_GROUP_PARENTS,
    max_table_bits: int = DEFAULT_MAX_TABLE_BITS,
) -> PreparedSimulation:
    rm = reduce(m)
    pplan = build_perturbation_plan(rm.model.n, k_max, m.perturbation_rate)
    gplan = partition(rm, theta, max_group_parents, max_table_bits)
    t = (1.0 - m.perturbation_rate) ** (m.n - rm.model.n)
    return PreparedSimulation(rm, pplan, gplan, t)


# -- pure-Python steppers ---------------------------------------------------

@lru_cache(maxsize=None)
def _node_alias(node: Node) -> AliasTable:
    return build_alias(node.probs)


def _step_nodes(model: Model, t: float, s: int, rng) -> int:
    n = model.n
    p = model.perturbation_rate
    gamma = 0
    for i in range(n):
        if rng.random() < p:
            gamma |= 1 << i
    if gamma:
        return s ^ gamma
    if t < 1.0 and check_leaf_perturbation(t, rng.random()):
        return s
    out = 0
    for i, node in enumerate(model.nodes):
        k = draw(_node_alias(node), rng) if node.n_functions > 1 else 0
        out |= eval_function(node.functions[k], s) << i
    return out


def _as_words(result: int, like, n: int):
    if isinstance(like, (int, np.integer)):
        return result
    return state_from_int(result, n)


def step_reference(m: Model, s, rng):
    """One step of the full model: n perturbation draws, then all functions."""
    return _as_words(_step_nodes(m, 1.0, state_to_int(s), rng), s, m.n)


def step_reduced(rm: ReducedModel, s, rng):
    """One step of the reduced model; ``s`` is over the kept nodes."""
    return _as_words(_step_nodes(rm.model, rm.leaf_no_perturb_prob, state_to_int(s), rng), s, rm.model.n)


def _perturb_groups(pp: PerturbationPlan, s: int, draws: Sequence[int]) -> tuple[int, bool]:
    perturbed = False
    for i, c in enumerate(draws):
        if i == pp.g - 1:
            c &= pp.mask
        if c:
            s ^= c << (i * pp.k)
            perturbed = True
    return s, perturbed


def _group_input(group, s: int, positions: Sequence[int]) -> int:
    v = 0
    for j, parent in enumerate(group.parents):
        v |= ((s >> positions[parent]) & 1) << j
    return v


def _positions(ps: PreparedSimulation) -> list[int]:
    pos = [0] * ps.n
    for bit, node in enumerate(ps.order):
        pos[node] = bit
    return pos


def _apply_groups(ps: PreparedSimulation, s: int, choices: Sequence[int], positions) -> int:
    out = 0
    for group, off, c in zip(ps.gplan.groups, ps.gplan.cum, choices):
        v = _group_input(group, s, positions)
        out |= int(group.functions[c].outputs[v]) << off
    return out


def step_grouped(ps: PreparedSimulation, s, rng):
    """One structure-based step on a packed state (bit order ``ps.order``)."""
    value = state_to_int(s)
    draws = [draw(ps.pplan.table, rng) for _ in range(ps.pplan.g)]
    value, perturbed = _perturb_groups(ps.pplan, value, draws)
    if perturbed or (ps.t < 1.0 and check_leaf_perturbation(ps.t, rng.random())):
        return _as_words(value, s, ps.n)
    choices = [draw(g.alias, rng) if g.alias is not None else 0 for g in ps.gplan.groups]
    return _as_words(_apply_groups(ps, value, choices, _positions(ps)), s, ps.n)


# -- exact one-step distributions -------------------------------------------

def _add(dist: dict, key: int, mass: float) -> None:
    if mass:
        dist[key] = dist.get(key, 0.0) + mass


def reference_step_distribution(m: Model | ReducedModel, s: int) -> dict[int, float]:
    """Next-state law of the node-by-node stepper, by full enumeration."""
    t = 1.0
    if isinstance(m, ReducedModel):
        m, t = m.model, m.leaf_no_perturb_prob
    n, p = m.n, m.perturbation_rate
    dist: dict[int, float] = {}
    for gamma in range(1, 1 << n):
        k = bin(gamma).count("1")
        _add(dist, s ^ gamma, p ** k * (1 - p) ** (n - k))
    quiet = (1 - p) ** n
    _add(dist, s, quiet * (1 - t))
    per_node = []
    for node in m.nodes:
        law = alias_distribution(_node_alias(node)) if node.n_functions > 1 else np.ones(1)
        per_node.append([(k, float(q)) for k, q in enumerate(law) if q > 0])
    for combo in itertools.product(*per_node):
        mass = quiet * t * math.prod(q for _, q in combo)
        out = 0
        for i, (node, (k, _)) in enumerate(zip(m.nodes, combo)):
            out |= eval_function(node.functions[k], s) << i
        _add(dist, out, mass)
    return dist


def grouped_step_distribution(ps: PreparedSimulation, s: int) -> dict[int, float]:
    """Next-state law of :func:`step_grouped` from packed state ``s``.

    Enumerates every cell/coin outcome of the perturbation table for each
    perturbation group and every combined-function choice of each group.
    """
    pp = ps.pplan
    law = alias_distribution(pp.table)
    gammas = {0: 1.0}
    for i in range(pp.g):
        nxt: dict[int, float] = {}
        for c, q in enumerate(law):
            if q == 0:
                continue
            cc = c & pp.mask if i == pp.g - 1 else c
            for gamma, mass in gammas.items():
                _add(nxt, gamma | (cc << (i * pp.k)), mass * q)
        gammas = nxt
    dist: dict[int, float] = {}
    quiet = gammas.pop(0, 0.0)
    for gamma, mass in gammas.items():
        _add(dist, s ^ gamma, mass)
    _add(dist, s, quiet * (1 - ps.t))

    positions = _positions(ps)
    outs = {0: quiet * ps.t}
    for group, off in zip(ps.gplan.groups, ps.gplan.cum):
        v = _group_input(group, s, positions)
        choice_law = alias_distribution(group.alias) if group.alias is not None else np.ones(1)
        nxt = {}
        for c, q in enumerate(choice_law):
            if q == 0:
                continue
            bits = int(group.functions[c].outputs[v]) << off
            for acc, mass in outs.items():
                _add(nxt, acc | bits, mass * q)
        outs = nxt
    for state, mass in outs.items():
        _add(dist, state, mass)
    return dist


def exact_transition_matrix(m: Model | ReducedModel) -> np.ndarray:
    """Dense 2^n x 2^n transition matrix of the perturbed PBN.

    For a :class:`ReducedModel` the leaf perturbations are folded in: when
    no kept node flips, the step is the identity with probability ``1 - t``.
    Function updates use the per-node probability that the next bit is 1,
    which factorises over nodes because selections are independent.
    """
    t = 1.0
    if isinstance(m, ReducedModel):
        m, t = m.model, m.leaf_no_perturb_prob
    n, p = m.n, m.perturbation_rate
    if n > MAX_EXACT_NODES:
        raise ValueError(f"exact matrix limited to {MAX_EXACT_NODES} nodes, model has {n}")
    size = 1 << n
    states = np.arange(size)
    popcount = np.zeros(size, dtype=np.int64)
    for i in range(n):
        popcount += (states >> i) & 1
    gamma_prob = p ** popcount * (1 - p) ** (n - popcount)
    gamma_prob[0] = 0.0
    P = gamma_prob[states[:, None] ^ states[None, :]]

    # q[s, i] = P(node i takes value 1 after a function update from s)
    q = np.zeros((size, n))
    for i, node in enumerate(m.nodes):
        for f, c in zip(node.functions, node.probs):
            idx = np.zeros(size, dtype=np.int64)
            for j, parent in enumerate(f.parents):
                idx |= ((states >> parent) & 1) << j
            q[:, i] += c * f.outputs()[idx]
    F = np.ones((size, size))
    for i in range(n):
        bit = ((states >> i) & 1).astype(bool)
        F *= np.where(bit[None, :], q[:, i][:, None], 1.0 - q[:, i][:, None])
    quiet = (1 - p) ** n
    P += quiet * t * F
    P[states, states] += quiet * (1 - t)
    return P


# -- compiled driver --------------------------------------------------------

def _reference_data(model: Model, t: float):
    nfunc = np.array(model.n_functions(), dtype=np.int64)
    alias_start = np.zeros(model.n, dtype=np.int64)
    alias_prob, alias_idx = [], []
    fstart = np.zeros(model.n, dtype=np.int64)
    par_start, arity, par_idx, tab_start, tabs = [], [], [], [], []
    n_f = 0
    n_par = 0
    n_tab = 0
    n_alias = 0
    for i, node in enumerate(model.nodes):
        fstart[i] = n_f
        if node.n_functions > 1:
            table = _node_alias(node)
            alias_start[i] = n_alias
            alias_prob.append(table.prob)
            alias_idx.append(table.alias)
            n_alias += table.size
        for f in node.functions:
            par_start.append(n_par)
            arity.append(f.arity)
            par_idx.extend(f.parents)
            n_par += f.arity
            tab_start.append(n_tab)
            tabs.append(f.outputs())
            n_tab += f.size
            n_f += 1
    cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(1, dtype=dt)
    return (
        np.int64(model.n), np.float64(model.perturbation_rate), np.float64(t), nfunc, alias_start,
        cat(alias_prob, np.float64), cat(alias_idx, np.int64), fstart,
        np.array(par_start, dtype=np.int64), np.array(arity, dtype=np.int64),
        np.array(par_idx if par_idx else [0], dtype=np.int64),
        np.array(tab_start, dtype=np.int64), cat(tabs, np.uint8),
    )


def _grouped_data(ps: PreparedSimulation):
    pp = ps.pplan
    positions = _positions(ps)
    groups = ps.gplan.groups
    m = len(groups)
    g_alias_start = np.zeros(m, dtype=np.int64)
    g_par_start = np.zeros(m, dtype=np.int64)
    g_npar = np.zeros(m, dtype=np.int64)
    g_tab_start = np.zeros(m, dtype=np.int64)
    par_pos, alias_prob, alias_idx, tabs = [], [], [], []
    n_alias = n_tab = 0
    width = max(g.width for g in groups)
    dtype = np.uint8 if width <= 8 else np.uint16 if width <= 16 else np.uint32
    for gi, group in enumerate(groups):
        g_par_start[gi] = len(par_pos)
        g_npar[gi] = len(group.parents)
        par_pos.extend(positions[p] for p in group.parents)
        if group.alias is not None:
            g_alias_start[gi] = n_alias
            alias_prob.append(group.alias.prob)
            alias_idx.append(group.alias.alias)
            n_alias += group.alias.size
        g_tab_start[gi] = n_tab
        for f in group.functions:
            tabs.append(f.outputs)
            n_tab += len(f.outputs)
    cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(1, dtype=dt)
    return (
        pp.table.prob, pp.table.alias, np.int64(pp.k), np.int64(pp.g), np.int64(pp.mask),
        np.float64(ps.t),
        np.array(ps.gplan.cum, dtype=np.int64), np.array([g.width for g in groups], dtype=np.int64),
        np.array([g.n_functions for g in groups], dtype=np.int64), g_alias_start, g_par_start,
        g_npar, g_tab_start, np.array(par_pos if par_pos else [0], dtype=np.int64),
        cat(alias_prob, np.float64), cat(alias_idx, np.int64), cat(tabs, dtype),
    )


@dataclass
class Trajectory:
    """Running statistics of one trajectory; ``nodes`` are original indices."""

    nodes: list[int]
    names: list[str]
    steps: int
    one_counts: np.ndarray
    predicate_hits: int
    final_state: dict[int, int]
    states: list[dict[int, int]] | None = None

    def frequencies(self) -> np.ndarray:
        if self.steps == 0:
            return np.zeros(len(self.nodes))
        return self.one_counts / self.steps

    def merge(self, other: "Trajectory") -> "Trajectory":
        """Pool the statistics of two independent trajectories over the same nodes."""
        if self.nodes != other.nodes:
            raise ValueError("trajectories cover different nodes")
        return Trajectory(self.nodes, self.names, self.steps + other.steps,
                          self.one_counts + other.one_counts,
                          self.predicate_hits + other.predicate_hits, other.final_state)


def _model_of(target) -> Model:
    if isinstance(target, PreparedSimulation):
        return target.reduced.model
    if isinstance(target, ReducedModel):
        return target.model
    return target


class Simulator:
    """Compiled trajectory driver that keeps its state and RNG between calls.

    ``target`` is a :class:`Model` for ``old``; a :class:`ReducedModel` (or a
    Model, reduced on the spot) for ``reduced``; a :class:`PreparedSimulation`
    (or a Model, prepared with defaults) for ``grouped``. ``s0`` is a state of
    the original model (int, word array or bit list); it defaults to all zeros.
    ``predicate`` is a sequence of ``(original_index, value)`` literals.
    """

    def __init__(self, method: str, target, seed: int = 0, s0=None, predicate=None, names=None):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
        self.method = method
        if method == "old":
            model = _model_of(target)
            self.data = _reference_data(model, 1.0)
            self.kernel = K.step_reference
            self.bit_nodes = list(range(model.n))
            all_names = model.names
        elif method == "reduced":
            rm = target if isinstance(target, ReducedModel) else reduce(_model_of(target))
            self.data = _reference_data(rm.model, rm.leaf_no_perturb_prob)
            self.kernel = K.step_reference
            self.bit_nodes = rm.kept
            all_names = None
        else:
            ps = target if isinstance(target, PreparedSimulation) else prepare(target)
            self.data = _grouped_data(ps)
            self.kernel = K.step_grouped
            self.bit_nodes = ps.bit_nodes
            all_names = None
        self.target = target
        n_bits = len(self.bit_nodes)
        if names is None:
            names = all_names or _names_for(target, self.bit_nodes)
        self.names = list(names)
        self.state = np.zeros(n_words(n_bits), dtype=np.uint64)
        if s0 is not None:
            self.state = self._pack(s0)
        self.rs = seed_state(seed)
        self.t = 0
        self.since = np.ones(n_bits, dtype=np.int64)
        self.ones = np.zeros(n_bits, dtype=np.int64)
        self._prev = np.zeros_like(self.state)
        self._set_predicate(predicate)

    # packing between original-model states and engine bit order
    def _pack(self, s0) -> np.ndarray:
        if isinstance(s0, (list, tuple)):
            value = sum(int(b) << i for i, b in enumerate(s0))
        else:
            value = state_to_int(s0)
        packed = 0
        for bit, node in enumerate(self.bit_nodes):
            packed |= ((value >> node) & 1) << bit
        return state_from_int(packed, len(self.bit_nodes))

    def node_values(self) -> dict[int, int]:
        value = state_to_int(self.state)
        return {node: (value >> bit) & 1 for bit, node in enumerate(self.bit_nodes)}

    def _set_predicate(self, predicate) -> None:
        nw = len(self.state)
        self.pmask = np.zeros(nw, dtype=np.uint64)
        self.pval = np.zeros(nw, dtype=np.uint64)
        self.use_pred = predicate is not None
        where = {node: bit for bit, node in enumerate(self.bit_nodes)}
        for node, value in predicate or ():
            if node not in where:
                raise ValueError(f"predicate references node {node}, which this method does not simulate "
                                 "(removed leaf)")
            bit = where[node]
            self.pmask[bit >> 6] |= np.uint64(1) << np.uint64(bit & 63)
            if value:
                self.pval[bit >> 6] |= np.uint64(1) << np.uint64(bit & 63)
        self.pstats = np.zeros(1, dtype=np.int64)
        self.ring = np.zeros(K.RING, dtype=np.uint8)
        self.tcounts = np.zeros((K.KMAX + 1, 8), dtype=np.int64)
        self.ckpt = np.zeros(1, dtype=np.int64)

    def advance(self, steps: int, track: bool = True) -> None:
        if steps < 0:
            raise ValueError("steps must be non-negative")
        if self.use_pred:
            need = (self.t + steps) // K.BLOCK + 1
            if len(self.ckpt) < need:
                grown = np.zeros(max(need, 2 * len(self.ckpt)), dtype=np.int64)
                grown[: len(self.ckpt)] = self.ckpt
                self.ckpt = grown
        K.run(self.kernel, self.data, self.state, self.rs, np.int64(steps), np.int64(self.t), track,
              self.since, self.ones, self._prev, self.use_pred, self.pmask, self.pval, self.pstats,
              self.ring, self.tcounts, self.ckpt)
        self.t += steps

    def one_counts(self) -> np.ndarray:
        value = state_to_int(self.state)
        bits = np.array([(value >> b) & 1 for b in range(len(self.bit_nodes))], dtype=np.int64)
        return self.ones + bits * (self.t - self.since + 1)

    def trajectory(self) -> Trajectory:
        order = np.argsort(self.bit_nodes, kind="stable")
        counts = self.one_counts()
        return Trajectory(
            nodes=[self.bit_nodes[i] for i in order],
            names=[self.names[i] for i in order],
            steps=self.t,
            one_counts=counts[order],
            predicate_hits=int(self.pstats[0]),
            final_state=self.node_values(),
        )


def _names_for(target, bit_nodes) -> list[str]:
    if isinstance(target, PreparedSimulation):
        rm = target.reduced
    elif isinstance(target, ReducedModel):
        rm = target
    else:
        return [target.nodes[i].name for i in bit_nodes]
    by_orig = {orig: rm.model.nodes[red].name for orig, red in rm.index_map.items()}
    return [by_orig[i] for i in bit_nodes]


def simulate(
    stepper: str | Callable,
    target,
    s0=None,
    steps: int = 0,
    seed: int = 0,
    predicate=None,
    track: bool = True,
    log_states: bool = False,
) -> Trajectory:
    """Run ``steps`` steps and return the trajectory statistics.

    ``stepper`` is a method name (compiled path) or one of the Python
    steppers :func:`step_reference`, :func:`step_reduced`, :func:`step_grouped`
    (pure-Python path driven by :class:`~pbnsim.rng.Xoshiro256`).
    """
    if callable(stepper):
        return _simulate_python(stepper, target, s0, steps, seed, predicate, log_states)
    sim = Simulator(stepper, target, seed=seed, s0=s0, predicate=predicate)
    if not log_states:
        sim.advance(steps, track=track)
        return sim.trajectory()
    states = []
    for _ in range(steps):
        sim.advance(1, track=track)
        states.append(sim.node_values())
    traj = sim.trajectory()
    traj.states = states
    return traj


_PY_METHOD = {step_reference: "old", step_reduced: "reduced", step_grouped: "grouped"}


def _simulate_python(stepper, target, s0, steps, seed, predicate, log_states) -> Trajectory:
    method = _PY_METHOD.get(stepper)
    if method is None:
        raise ValueError("unknown Python stepper")
    if method == "reduced" and not isinstance(target, ReducedModel):
        target = reduce(_model_of(target))
    if method == "grouped" and not isinstance(target, PreparedSimulation):
        target = prepare(_model_of(target))
    # reuse the compiled driver's packing and bookkeeping, step in Python
    sim = Simulator(method, target, seed=seed, s0=s0, predicate=predicate)
    rng = Xoshiro256(state=sim.rs)
    value = state_to_int(sim.state)
    n_bits = len(sim.bit_nodes)
    ones = np.zeros(n_bits, dtype=np.int64)
    hits = 0
    states = [] if log_states else None
    mask, want = state_to_int(sim.pmask), state_to_int(sim.pval)
    for _ in range(steps):
        value = stepper(target, value, rng)
        for b in range(n_bits):
            ones[b] += (value >> b) & 1
        if predicate is not None and value & mask == want:
            hits += 1
        if log_states:
            states.append({node: (value >> b) & 1 for b, node in enumerate(sim.bit_nodes)})
    sim.state = state_from_int(value, n_bits)
    sim.rs = rng.state
    order = np.argsort(sim.bit_nodes, kind="stable")
    return Trajectory(
        nodes=[sim.bit_nodes[i] for i in order],
        names=[sim.names[i] for i in order],
        steps=steps,
        one_counts=ones[order],
        predicate_hits=hits,
        final_state=sim.node_values(),
        states=states,
    )
