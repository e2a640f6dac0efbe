"""Benchmark harness: generate a corpus, time each method, collect records.

Each (model, method) run is timed in two parts: preparation (building the
simulator, which includes reduction and grouping for the new methods) and
simulation. JIT compilation happens in an untimed warmup run. Every run is
repeated and the median of each part is kept.
"""

from __future__ import annotations

import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .engine import METHODS, Simulator, prepare
from .generate import generate_random
from .grouping import DEFAULT_MAX_GROUP_PARENTS, DEFAULT_THETA
from .model import Model, density
from .reduction import reduce
from .sampling import DEFAULT_K

__all__ = ["BenchmarkConfig", "BenchmarkRecord", "read_corpus", "run_benchmark", "time_method"]


@dataclass
class BenchmarkConfig:
    corpus: list[tuple[int, float, float, int]]  # (n, density, leaf_pct, seed)
    steps: int = 10 ** 7
    methods: tuple[str, ...] = METHODS
    warmup: int = 1000
    repeats: int = 3
    output: str | None = None
    perturbation_rate: float = 0.001
    theta: int = DEFAULT_THETA
    k: int = DEFAULT_K
    max_group_parents: int = DEFAULT_MAX_GROUP_PARENTS
    max_functions: int = 3
    max_parents: int = 5
    sim_seed: int = 0
    workers: int = 1  # >1 runs distinct models on distinct threads

    def __post_init__(self):
        if not self.methods:
            raise ValueError("benchmark needs at least one method")
        for method in self.methods:
            if method not in METHODS:
                raise ValueError(f"unknown method {method!r}")
        if self.steps < self.warmup:
            raise ValueError("steps must be at least the warmup length")
        if self.repeats < 1:
            raise ValueError("repeats must be positive")


@dataclass
class BenchmarkRecord:
    n: int
    target_density: float
    target_leaf_pct: float
    seed: int
    density: float
    leaf_fraction: float
    n_kept: int
    steps: int
    prep_time: dict[str, float] = field(default_factory=dict)
    sim_time: dict[str, float] = field(default_factory=dict)
    one_count_total: dict[str, int] = field(default_factory=dict)

    def _ratio(self, slow: str, fast: str, with_prep: bool = False) -> float:
        if slow not in self.sim_time or fast not in self.sim_time:
            return math.nan
        a = self.sim_time[slow] + (self.prep_time[slow] if with_prep else 0.0)
        b = self.sim_time[fast] + (self.prep_time[fast] if with_prep else 0.0)
        return a / b if b > 0 else math.inf

    @property
    def speedup_reduced_old(self) -> float:
        return self._ratio("old", "reduced")

    @property
    def speedup_new_reduced(self) -> float:
        return self._ratio("reduced", "grouped")

    @property
    def speedup_new_old(self) -> float:
        return self._ratio("old", "grouped")

    @property
    def speedup_new_old_with_prep(self) -> float:
        return self._ratio("old", "grouped", with_prep=True)


def read_corpus(path) -> list[tuple[int, float, float, int]]:
    """Corpus file: one ``n density leaf_pct seed`` entry per line, '#' comments."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: expected 'n density leaf_pct seed'")
            try:
                entries.append((int(parts[0]), float(parts[1]), float(parts[2]), int(parts[3])))
            except ValueError:
                raise ValueError(f"line {lineno}: cannot parse {line!r}") from None
    return entries


def _build(method: str, model: Model, cfg: BenchmarkConfig) -> Simulator:
    if method == "old":
        target = model
    elif method == "reduced":
        target = reduce(model)
    else:
        target = prepare(model, cfg.theta, cfg.k, cfg.max_group_parents)
    return Simulator(method, target, seed=cfg.sim_seed)


def time_method(method: str, model: Model, cfg: BenchmarkConfig) -> tuple[float, float, int]:
    """Median (prep seconds, simulation seconds) over ``cfg.repeats`` runs, plus the one-count total."""
    warm = _build(method, model, cfg)
    warm.advance(cfg.warmup)
    preps, sims = [], []
    total = 0
    for _ in range(cfg.repeats):
        t0 = time.perf_counter()
        sim = _build(method, model, cfg)
        t1 = time.perf_counter()
        sim.advance(cfg.steps)
        t2 = time.perf_counter()
        preps.append(t1 - t0)
        sims.append(t2 - t1)
        total = int(sim.one_counts().sum())
    return statistics.median(preps), statistics.median(sims), total


def _run_entry(entry, cfg: BenchmarkConfig) -> BenchmarkRecord:
    n, dens, leaf_pct, seed = entry
    model = generate_random(n, dens, leaf_pct, cfg.max_functions, cfg.max_parents, seed=seed,
                            perturbation_rate=cfg.perturbation_rate)
    rm = reduce(model)
    rec = BenchmarkRecord(n, dens, leaf_pct, seed, density(model), rm.n_leaves / n, rm.model.n, cfg.steps)
    for method in cfg.methods:
        prep, sim, total = time_method(method, model, cfg)
        rec.prep_time[method] = prep
        rec.sim_time[method] = sim
        rec.one_count_total[method] = total
    return rec


def run_benchmark(cfg: BenchmarkConfig) -> list[BenchmarkRecord]:
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(lambda e: _run_entry(e, cfg), cfg.corpus))
    else:
        records = [_run_entry(e, cfg) for e in cfg.corpus]
    if cfg.output:
        from .report import write_csv
        write_csv(records, cfg.output)
    return records
