import numpy as np
import pytest
from hypothesis import strategies as st

from pbnsim.model import BooleanFunction, Model, Node


def random_small_model(seed, n, p, max_functions=3, max_parents=3, interest=None):
    """Unrestricted wiring: self-loops, cycles and constants all allowed."""
    rng = np.random.default_rng(seed)
    nodes = []
    for i in range(n):
        ell = int(rng.integers(1, max_functions + 1))
        funcs = []
        for _ in range(ell):
            k = int(rng.integers(0, min(max_parents, n) + 1))
            parents = [int(x) for x in rng.choice(n, size=k, replace=False)]
            funcs.append(BooleanFunction.from_outputs(parents, rng.integers(0, 2, size=1 << k)))
        w = rng.uniform(0.1, 1.0, size=ell)
        nodes.append(Node(f"n{i}", tuple(funcs), tuple(w / w.sum())))
    return Model(tuple(nodes), p, interest)


@st.composite
def small_models(draw, max_n=5, max_functions=3, max_parents=3):
    n = draw(st.integers(1, max_n))
    nodes = []
    for i in range(n):
        ell = draw(st.integers(1, max_functions))
        funcs = []
        for _ in range(ell):
            k = draw(st.integers(0, min(max_parents, n)))
            parents = draw(st.permutations(range(n)))[:k]
            table = draw(st.integers(0, (1 << (1 << k)) - 1))
            funcs.append(BooleanFunction(tuple(parents), table))
        w = draw(st.lists(st.integers(1, 1000), min_size=ell, max_size=ell))
        nodes.append(Node(f"v{i}", tuple(funcs), tuple(x / sum(w) for x in w)))
    p = draw(st.sampled_from([0.001, 0.01, 0.1, 0.25, 0.5]))
    return Model(tuple(nodes), p)


def identity_model(p):
    return Model((Node("x", (BooleanFunction((0,), 0b10),), (1.0,)),), p)


def constant_model(p, value=1):
    return Model((Node("x", (BooleanFunction((), value),), (1.0,)),), p)


@pytest.fixture
def tiny_model_file(tmp_path):
    text = (
        "pbn 3\n"
        "perturbation 0.01\n"
        "node a\n"
        "  f 0.6 10 b\n"
        "  f 0.4 01 c\n"
        "node b\n"
        "  f 1 1000 a c\n"
        "node c\n"
        "  f 1 0110 a b\n"
    )
    path = tmp_path / "tiny.pbn"
    path.write_text(text)
    return path


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
