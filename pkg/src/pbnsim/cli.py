"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 model error, 3 resource limit.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time

from .engine import METHODS, Simulator, prepare
from .grouping import DEFAULT_MAX_GROUP_PARENTS, DEFAULT_THETA, ResourceLimitError, partition
from .model import ModelError, load_model, serialize_model
from .reduction import reduce
from .sampling import DEFAULT_K

EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_RESOURCE = 3

GLOBAL_DEFAULTS = {"seed": 0, "theta": DEFAULT_THETA, "k": DEFAULT_K,
                   "max_group_parents": DEFAULT_MAX_GROUP_PARENTS}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(parser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="RNG seed (default 0)")
    parser.add_argument("--theta", type=int, default=default,
                        help=f"budget of combined functions (default {DEFAULT_THETA})")
    parser.add_argument("--k", type=int, default=default,
                        help=f"max nodes per perturbation group (default {DEFAULT_K})")
    parser.add_argument("--max-group-parents", type=int, default=default,
                        help=f"max parent union of a group (default {DEFAULT_MAX_GROUP_PARENTS})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pbnsim", description="Structure-based simulation of probabilistic Boolean networks")
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="write a random model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--leaves", type=float, default=0.0, help="leaf fraction in [0, 1)")
    p.add_argument("--max-functions", type=int, default=3)
    p.add_argument("--max-parents", type=int, default=5)
    p.add_argument("--perturbation", type=float, default=0.001)
    p.add_argument("--output", "-o", help="output file (default stdout)")

    p = sub.add_parser("reduce", parents=[common], help="report leaves, kept nodes and t")
    p.add_argument("--model", required=True)

    p = sub.add_parser("plan", parents=[common], help="show the node grouping")
    p.add_argument("--model", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate and print per-node statistics")
    p.add_argument("--model", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--method", choices=METHODS, default="grouped")
    p.add_argument("--report-csv", help="also write the CSV to this path")

    p = sub.add_parser("estimate", parents=[common], help="estimate a steady-state probability")
    p.add_argument("--model", required=True)
    p.add_argument("--predicate", required=True, help='e.g. "a=1&b=0"')
    p.add_argument("--precision", type=float, default=1e-5)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--method", choices=METHODS, default="grouped")
    p.add_argument("--pilot", type=int, default=10_000)

    p = sub.add_parser("predict", parents=[common], help="evaluate the speedup regression")
    p.add_argument("--leaves", type=float, required=True, help="leaf fraction in [0, 1]")
    p.add_argument("--density", type=float, required=True)

    p = sub.add_parser("benchmark", parents=[common], help="time the methods on a corpus")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--corpus", help="file with lines 'n density leaf_pct seed'")
    src.add_argument("--entry", action="append", help="inline entry 'n,density,leaf_pct,seed'")
    p.add_argument("--steps", type=int, default=10 ** 7)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--perturbation", type=float, default=0.001)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output-dir", default="bench_out")
    p.add_argument("--no-plots", action="store_true")
    return parser


def _settings(args) -> None:
    for key, value in GLOBAL_DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _cmd_generate(args, out) -> None:
    from .generate import generate_random
    m = generate_random(args.n, args.density, args.leaves, args.max_functions, args.max_parents,
                        seed=args.seed, perturbation_rate=args.perturbation)
    text = serialize_model(m)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)


def _cmd_reduce(args, out) -> None:
    rm = reduce(load_model(args.model))
    out.write(f"leaves {rm.n_leaves}\n")
    out.write(f"kept {rm.model.n}\n")
    out.write(f"t {rm.leaf_no_perturb_prob:.12g}\n")


def _cmd_plan(args, out) -> None:
    rm = reduce(load_model(args.model))
    plan = partition(rm, args.theta, args.max_group_parents)
    multi = plan.groups[: plan.n_multi]
    out.write(f"m {plan.n_multi}\n")
    out.write(f"groups {plan.m}\n")
    out.write("multi_group_sizes " + " ".join(str(g.width) for g in multi) + "\n")
    out.write("single_group_sizes " + " ".join(str(g.width) for g in plan.groups[plan.n_multi:]) + "\n")
    out.write(f"sum_products {plan.budget_sum()}\n")
    cells = plan.table_cells()
    width = max((g.width for g in plan.groups), default=1)
    nbytes = 1 if width <= 8 else 2 if width <= 16 else 4
    out.write(f"table_cells {cells}\n")
    out.write(f"memory_bytes {cells * nbytes}\n")


def _build_target(method, model, args):
    if method == "old":
        return model
    if method == "reduced":
        return reduce(model)
    return prepare(model, args.theta, args.k, args.max_group_parents)


def _cmd_simulate(args, out) -> None:
    if args.steps < 0:
        raise UsageError("--steps must be non-negative")
    model = load_model(args.model)
    sim = Simulator(args.method, _build_target(args.method, model, args), seed=args.seed)
    sim.advance(args.steps)
    traj = sim.trajectory()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("node", "name", "one_count", "steps", "frequency"))
    for node, name, count, freq in zip(traj.nodes, traj.names, traj.one_counts, traj.frequencies()):
        writer.writerow((node, name, int(count), traj.steps, f"{freq:.12g}"))
    text = buf.getvalue()
    out.write(text)
    if args.report_csv:
        with open(args.report_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _cmd_estimate(args, out) -> None:
    from .estimator import estimate_steady_state, parse_predicate
    model = load_model(args.model)
    try:
        predicate = parse_predicate(model, args.predicate)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    t0 = time.perf_counter()
    target = _build_target(args.method, model, args)
    prep = time.perf_counter() - t0
    res = estimate_steady_state(args.method, target, predicate, precision=args.precision,
                                confidence=args.confidence, seed=args.seed, pilot=args.pilot)
    out.write(f"estimate {res.estimate:.12g}\n")
    out.write(f"sample_size {res.sample_size}\n")
    out.write(f"burn_in {res.burn_in}\n")
    out.write(f"thinning {res.thinning}\n")
    out.write(f"preprocessing_time {prep:.6f}\n")
    out.write(f"simulation_time {res.wall_time:.6f}\n")
    if res.degenerate:
        out.write("degenerate 1\n")


def _cmd_predict(args, out) -> None:
    from .estimator import predict_speedup
    if not 0.0 <= args.leaves <= 1.0:
        raise UsageError("--leaves is a fraction in [0, 1]")
    if args.density <= 0:
        raise UsageError("--density must be positive")
    out.write(f"{predict_speedup(args.leaves, args.density):.12g}\n")


def _cmd_benchmark(args, out) -> None:
    from .bench import BenchmarkConfig, read_corpus, run_benchmark
    from .report import plot_speedups, write_csv, write_gnuplot
    import os

    if args.corpus:
        corpus = read_corpus(args.corpus)
    else:
        corpus = []
        for item in args.entry:
            parts = item.split(",")
            if len(parts) != 4:
                raise UsageError(f"bad --entry {item!r}; expected n,density,leaf_pct,seed")
            corpus.append((int(parts[0]), float(parts[1]), float(parts[2]), int(parts[3])))
    if not corpus:
        raise UsageError("empty corpus")
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    cfg = BenchmarkConfig(corpus=corpus, steps=args.steps, methods=methods, warmup=args.warmup,
                          repeats=args.repeats, perturbation_rate=args.perturbation, theta=args.theta,
                          k=args.k, max_group_parents=args.max_group_parents, sim_seed=args.seed,
                          workers=args.workers)
    records = run_benchmark(cfg)
    os.makedirs(args.output_dir, exist_ok=True)
    csv_path = os.path.join(args.output_dir, "benchmark.csv")
    write_csv(records, csv_path)
    written = [csv_path] + [str(p) for p in write_gnuplot(records, args.output_dir)]
    if not args.no_plots:
        written += [str(p) for p in plot_speedups(records, args.output_dir)]
    for rec in records:
        out.write(f"n={rec.n} density={rec.density:.3f} leaves={100 * rec.leaf_fraction:.1f}% "
                  f"new/old={rec.speedup_new_old:.3g} red/old={rec.speedup_reduced_old:.3g} "
                  f"new/red={rec.speedup_new_reduced:.3g}\n")
    for path in written:
        out.write(f"wrote {path}\n")


COMMANDS = {
    "generate": _cmd_generate, "reduce": _cmd_reduce, "plan": _cmd_plan, "simulate": _cmd_simulate,
    "estimate": _cmd_estimate, "predict": _cmd_predict, "benchmark": _cmd_benchmark,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _settings(args)
    try:
        COMMANDS[args.command](args, sys.stdout)
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
