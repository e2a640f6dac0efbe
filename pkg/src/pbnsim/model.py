"""PBN data model, text format, truth-table evaluation and density.

A network is a list of nodes, each carrying one or more Boolean predictor
functions plus the probabilities with which they are selected. States are
bit vectors: bit ``i`` holds node ``i``. At the Python level a state is a
``numpy.uint64`` word array (node 0 = bit 0 of word 0); plain ints are
accepted wherever a state is read.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

MAX_PARENTS = 30
PROB_TOLERANCE = 1e-9

__all__ = [
    "BooleanFunction",
    "Model",
    "ModelError",
    "Node",
    "density",
    "eval_function",
    "get_bit",
    "load_model",
    "n_words",
    "normalize_probs",
    "parse_model",
    "save_model",
    "serialize_model",
    "state_from_bits",
    "state_from_int",
    "state_to_bits",
    "state_to_int",
]


class ModelError(ValueError):
    """Raised for malformed model text or an inconsistent model."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# -- states -----------------------------------------------------------------

def n_words(n: int) -> int:
    return max(1, (n + 63) // 64)


def state_from_int(value: int, n: int) -> np.ndarray:
    if value < 0 or value >> n:
        raise ValueError(f"state value does not fit in {n} bits")
    words = np.zeros(n_words(n), dtype=np.uint64)
    for w in range(len(words)):
        words[w] = (value >> (64 * w)) & 0xFFFFFFFFFFFFFFFF
    return words


def state_to_int(state) -> int:
    if isinstance(state, (int, np.integer)):
        return int(state)
    value = 0
    for w, word in enumerate(state):
        value |= int(word) << (64 * w)
    return value


def state_from_bits(bits: Sequence[int]) -> np.ndarray:
    value = 0
    for i, b in enumerate(bits):
        if b:
            value |= 1 << i
    return state_from_int(value, len(bits))


def state_to_bits(state, n: int) -> list[int]:
    value = state_to_int(state)
    return [(value >> i) & 1 for i in range(n)]


def get_bit(state, i: int) -> int:
    if isinstance(state, (int, np.integer)):
        return (int(state) >> i) & 1
    return int((int(state[i >> 6]) >> (i & 63)) & 1)


# -- functions and nodes ----------------------------------------------------

@dataclass(frozen=True)
class BooleanFunction:
    """Truth table over an ordered parent list.

    Bit ``v`` of ``table`` is the output when the parents, read with
    ``parents[0]`` as the least significant bit, encode ``v``.
    """

    parents: tuple[int, ...]
    table: int

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))
        if len(self.parents) > MAX_PARENTS:
            raise ModelError(f"function has {len(self.parents)} parents (limit {MAX_PARENTS})")
        if len(set(self.parents)) != len(self.parents):
            raise ModelError("function lists a parent more than once")
        if self.table < 0 or self.table >> self.size:
            raise ModelError("truth table wider than 2^(number of parents)")

    @property
    def arity(self) -> int:
        return len(self.parents)

    @property
    def size(self) -> int:
        return 1 << len(self.parents)

    @classmethod
    def from_outputs(cls, parents: Sequence[int], outputs: Iterable[int]) -> "BooleanFunction":
        table = 0
        for v, out in enumerate(outputs):
            if out:
                table |= 1 << v
        return cls(tuple(parents), table)

    @classmethod
    def from_callable(cls, parents: Sequence[int], fn) -> "BooleanFunction":
        """Tabulate ``fn(*parent_bits)`` over all parent valuations."""
        k = len(parents)
        return cls.from_outputs(
            parents, (int(bool(fn(*[(v >> j) & 1 for j in range(k)]))) for v in range(1 << k))
        )

    def outputs(self) -> np.ndarray:
        """Truth table as a uint8 array of length 2^arity."""
        nbytes = max(1, (self.size + 7) // 8)
        raw = np.frombuffer(self.table.to_bytes(nbytes, "little"), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self.size].copy()

    def remap(self, index_map: dict[int, int]) -> "BooleanFunction":
        return BooleanFunction(tuple(index_map[p] for p in self.parents), self.table)


def eval_function(f: BooleanFunction, s) -> int:
    """Output of ``f`` on state ``s`` (word array or int)."""
    value = state_to_int(s)
    v = 0
    for j, parent in enumerate(f.parents):
        v |= ((value >> parent) & 1) << j
    return (f.table >> v) & 1


def normalize_probs(probs: Sequence[float]) -> tuple[float, ...]:
    """Check a selection-probability vector and rescale it to sum to one.

    Vectors that already sum to exactly 1.0 are returned unchanged so that
    text round-trips are stable.
    """
    probs = tuple(float(c) for c in probs)
    if not probs:
        raise ModelError("node has no predictor functions")
    for c in probs:
        if not (0.0 < c <= 1.0):
            raise ModelError(f"selection probability {c!r} outside (0, 1]")
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise ModelError(f"selection probabilities sum to {total:.12g}")
    if total != 1.0:
        probs = tuple(c / total for c in probs)
    return probs


@dataclass(frozen=True)
class Node:
    name: str
    functions: tuple[BooleanFunction, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "probs", tuple(float(c) for c in self.probs))
        if not self.functions:
            raise ModelError(f"node {self.name!r} has no predictor functions")
        if len(self.functions) != len(self.probs):
            raise ModelError(f"node {self.name!r}: {len(self.functions)} functions but "
                             f"{len(self.probs)} selection probabilities")
        for c in self.probs:
            if not (0.0 < c <= 1.0):
                raise ModelError(f"node {self.name!r}: selection probability {c!r} outside (0, 1]")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > PROB_TOLERANCE:
            raise ModelError(f"node {self.name!r}: selection probabilities sum to {total:.12g}")

    @property
    def n_functions(self) -> int:
        return len(self.functions)

    def parent_set(self) -> set[int]:
        out: set[int] = set()
        for f in self.functions:
            out.update(f.parents)
        return out


@dataclass(frozen=True)
class Model:
    """An independent synchronous PBN with perturbation rate ``p``."""

    nodes: tuple[Node, ...]
    perturbation_rate: float
    interest: frozenset[int] = field(default=None)  # None means every node

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        n = len(self.nodes)
        if n < 1:
            raise ModelError("model has no nodes")
        p = float(self.perturbation_rate)
        object.__setattr__(self, "perturbation_rate", p)
        if not (0.0 < p < 1.0):
            raise ModelError(f"perturbation rate {p!r} outside (0, 1)")
        interest = frozenset(range(n)) if self.interest is None else frozenset(int(i) for i in self.interest)
        if any(i < 0 or i >= n for i in interest):
            raise ModelError("interest set refers to a node that does not exist")
        object.__setattr__(self, "interest", interest)
        names = set()
        for node in self.nodes:
            if node.name in names:
                raise ModelError(f"duplicate node name {node.name!r}")
            names.add(node.name)
            for f in node.functions:
                for parent in f.parents:
                    if not 0 <= parent < n:
                        raise ModelError(f"node {node.name!r} references missing parent {parent}")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def names(self) -> list[str]:
        return [node.name for node in self.nodes]

    def index_of(self, name: str) -> int:
        for i, node in enumerate(self.nodes):
            if node.name == name:
                return i
        raise KeyError(name)

    def n_functions(self) -> list[int]:
        return [node.n_functions for node in self.nodes]


def density(m: Model) -> float:
    """Total parent count over all predictor functions, divided by n."""
    total = sum(f.arity for node in m.nodes for f in node.functions)
    return float(Fraction(total, m.n))


# -- text format ------------------------------------------------------------

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-\[\]]*$")


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_model(text: str) -> Model:
    """Parse the line-oriented PBN format.

    Node references may point forward, so names are resolved after the
    whole document is read.
    """
    lines = [(no, _strip(raw)) for no, raw in enumerate(text.splitlines(), start=1)]
    lines = [(no, line) for no, line in lines if line]
    if not lines:
        raise ModelError("empty document")

    it = iter(lines)
    no, line = next(it)
    parts = line.split()
    if len(parts) != 2 or parts[0] != "pbn":
        raise ModelError("expected 'pbn <n>'", no)
    try:
        n = int(parts[1])
    except ValueError:
        raise ModelError(f"bad node count {parts[1]!r}", no) from None
    if n < 1:
        raise ModelError("node count must be at least 1", no)

    try:
        no, line = next(it)
    except StopIteration:
        raise ModelError("missing 'perturbation <p>' line", no) from None
    parts = line.split()
    if len(parts) != 2 or parts[0] != "perturbation":
        raise ModelError("expected 'perturbation <p>'", no)
    try:
        p = float(parts[1])
    except ValueError:
        raise ModelError(f"bad perturbation rate {parts[1]!r}", no) from None
    if not (0.0 < p < 1.0):
        raise ModelError(f"perturbation rate {p!r} outside (0, 1)", no)

    # (name, line, [(prob, table_str, parent_names, line)])
    blocks: list[tuple[str, int, list[tuple[float, str, list[str], int]]]] = []
    interest_names: list[str] | None = None
    interest_line = 0
    for no, line in it:
        parts = line.split()
        key = parts[0]
        if interest_names is not None:
            raise ModelError("'interest' must be the final line", no)
        if key == "node":
            if len(parts) != 2 or not _NAME_RE.match(parts[1]):
                raise ModelError("expected 'node <name>'", no)
            blocks.append((parts[1], no, []))
        elif key == "f":
            if not blocks:
                raise ModelError("function line before any 'node' line", no)
            if len(parts) < 3:
                raise ModelError("expected 'f <prob> <table> [parents...]'", no)
            try:
                prob = float(parts[1])
            except ValueError:
                raise ModelError(f"bad selection probability {parts[1]!r}", no) from None
            blocks[-1][2].append((prob, parts[2], parts[3:], no))
        elif key == "interest":
            interest_names = parts[1:]
            interest_line = no
        else:
            raise ModelError(f"unexpected keyword {key!r}", no)

    if len(blocks) != n:
        raise ModelError(f"header declares {n} nodes but {len(blocks)} node blocks follow")
    index: dict[str, int] = {}
    for i, (name, no, _) in enumerate(blocks):
        if name in index:
            raise ModelError(f"duplicate node name {name!r}", no)
        index[name] = i

    nodes = []
    for name, no, fns in blocks:
        if not fns:
            raise ModelError(f"node {name!r} has no predictor functions", no)
        functions = []
        for prob, table_str, parent_names, fno in fns:
            parents = []
            for pname in parent_names:
                if pname not in index:
                    raise ModelError(f"unknown parent {pname!r}", fno)
                parents.append(index[pname])
            if len(parents) > MAX_PARENTS:
                raise ModelError(f"{len(parents)} parents exceeds the limit of {MAX_PARENTS}", fno)
            if len(set(parents)) != len(parents):
                raise ModelError("parent listed twice", fno)
            if len(table_str) != 1 << len(parents) or set(table_str) - {"0", "1"}:
                raise ModelError(f"truth table must be a binary string of length {1 << len(parents)}", fno)
            functions.append(BooleanFunction(tuple(parents), int(table_str, 2)))
        try:
            probs = normalize_probs([prob for prob, *_ in fns])
        except ModelError as exc:
            raise ModelError(f"node {name!r}: {exc}", no) from None
        nodes.append(Node(name, tuple(functions), probs))

    interest = None
    if interest_names is not None:
        interest = set()
        for name in interest_names:
            if name not in index:
                raise ModelError(f"unknown node {name!r} in interest list", interest_line)
            interest.add(index[name])
    return Model(tuple(nodes), p, None if interest is None else frozenset(interest))


def serialize_model(m: Model) -> str:
    lines = [f"pbn {m.n}", f"perturbation {m.perturbation_rate:.12g}"]
    for node in m.nodes:
        lines.append(f"node {node.name}")
        for f, c in zip(node.functions, node.probs):
            table = format(f.table, f"0{f.size}b")
            parents = " ".join(m.nodes[p].name for p in f.parents)
            lines.append(f"  f {c:.12g} {table} {parents}".rstrip())
    if m.interest != frozenset(range(m.n)):
        names = " ".join(m.nodes[i].name for i in sorted(m.interest))
        lines.append(f"interest {names}".rstrip())
    return "\n".join(lines) + "\n"


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def save_model(m: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_model(m))
