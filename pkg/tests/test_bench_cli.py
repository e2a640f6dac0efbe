import math

import pytest

from pbnsim import generate_random, load_model, save_model
from pbnsim.bench import BenchmarkConfig, BenchmarkRecord, read_corpus, run_benchmark
from pbnsim.cli import main
from pbnsim.report import COLUMNS, read_csv, report, write_csv


def _record(i):
    rec = BenchmarkRecord(20 + i, 1.5, 0.5, i, 1.5, 0.5, 10, 1000)
    rec.prep_time = {"old": 0.001, "grouped": 0.0123456789012345}
    rec.sim_time = {"old": 0.5 + i, "grouped": 0.1 / 3}
    rec.one_count_total = {"old": 100, "grouped": 100}
    return rec


def test_tiny_benchmark_consistent(tmp_path):
    cfg = BenchmarkConfig(corpus=[(12, 1.5, 0.4, 1)], steps=10_000, warmup=100, repeats=3,
                          output=str(tmp_path / "b.csv"))
    (rec,) = run_benchmark(cfg)
    assert all(t > 0 for t in rec.sim_time.values())
    assert all(t > 0 for t in rec.prep_time.values())
    assert rec.speedup_new_old == pytest.approx(rec.sim_time["old"] / rec.sim_time["grouped"])
    assert rec.speedup_reduced_old * rec.speedup_new_reduced == pytest.approx(rec.speedup_new_old)
    assert len(read_csv(tmp_path / "b.csv")) == 3


def test_benchmark_statistics_deterministic():
    cfg = BenchmarkConfig(corpus=[(15, 2.0, 0.3, 7)], steps=5000, warmup=10, repeats=1)
    a, b = run_benchmark(cfg)[0], run_benchmark(cfg)[0]
    assert a.one_count_total == b.one_count_total
    assert (a.density, a.leaf_fraction, a.n_kept) == (b.density, b.leaf_fraction, b.n_kept)


def test_parallel_mode_matches_serial():
    corpus = [(10, 1.5, 0.2, s) for s in range(3)]
    serial = run_benchmark(BenchmarkConfig(corpus=corpus, steps=2000, warmup=10, repeats=1))
    par = run_benchmark(BenchmarkConfig(corpus=corpus, steps=2000, warmup=10, repeats=1, workers=3))
    assert [r.one_count_total for r in serial] == [r.one_count_total for r in par]


def test_config_validation():
    with pytest.raises(ValueError):
        BenchmarkConfig(corpus=[], methods=())
    with pytest.raises(ValueError):
        BenchmarkConfig(corpus=[], steps=10, warmup=100)
    with pytest.raises(ValueError):
        BenchmarkConfig(corpus=[], methods=("fast",))


def test_read_corpus(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("# n density leaf seed\n20 1.5 0.5 1\n\n450 1.6 0.9 2  # sparse\n")
    assert read_corpus(path) == [(20, 1.5, 0.5, 1), (450, 1.6, 0.9, 2)]
    path.write_text("20 1.5\n")
    with pytest.raises(ValueError, match="line 1"):
        read_corpus(path)


def test_report_rows_and_round_trip(tmp_path):
    records = [_record(i) for i in range(3)]
    assert write_csv(records, tmp_path / "r.csv") == 6
    rows = read_csv(tmp_path / "r.csv")
    assert len(rows) == 6
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == ",".join(COLUMNS)
    for row, (rec, method) in zip(rows, [(r, m) for r in records for m in r.sim_time]):
        assert row["method"] == method
        assert row["sim_time"] == float(f"{rec.sim_time[method]:.12g}")
        assert row["prep_time"] == float(f"{rec.prep_time[method]:.12g}")
        assert row["speedup_new_old"] == float(f"{rec.speedup_new_old:.12g}")
        assert math.isnan(row["speedup_reduced_old"])


def test_report_empty_is_error(tmp_path):
    with pytest.raises(ValueError):
        write_csv([], tmp_path / "x.csv")
    with pytest.raises(ValueError):
        report([], tmp_path)


def test_report_writes_figures(tmp_path):
    out = report([_record(i) for i in range(3)], tmp_path)
    assert out["csv"][0].exists()
    assert {p.name for p in out["gnuplot"]} == {"speedup.dat", "time_old.dat", "time_grouped.dat"}
    assert [p.name for p in out["figures"]] == ["speedup_new_old.png"]
    assert out["figures"][0].read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    blocks = (tmp_path / "speedup.dat").read_text().strip().split("\n\n")
    assert len(blocks) == 1


# -- CLI -----------------------------------------------------------------------

@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "m.pbn"
    save_model(generate_random(16, 2.0, 0.25, seed=5, perturbation_rate=0.01), path)
    return path


def test_simulate_csv_is_byte_identical(model_file, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["simulate", "--model", str(model_file), "--steps", "20000", "--seed", "42",
                     "--report-csv", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "node,name,one_count,steps,frequency"
    assert len(lines) == 1 + 12


def test_global_flags_before_subcommand(model_file, capsys):
    assert main(["--seed", "42", "simulate", "--model", str(model_file), "--steps", "1000"]) == 0
    first = capsys.readouterr().out
    assert main(["simulate", "--model", str(model_file), "--steps", "1000", "--seed", "42"]) == 0
    assert capsys.readouterr().out == first


def test_generate_reduce_plan(tmp_path, capsys):
    path = tmp_path / "g.pbn"
    assert main(["--seed", "3", "generate", "--n", "20", "--density", "2", "--leaves", "0.5",
                 "-o", str(path)]) == 0
    assert main(["reduce", "--model", str(path)]) == 0
    out = capsys.readouterr().out.split()
    assert out[:4] == ["leaves", "10", "kept", "10"]
    assert float(out[5]) == pytest.approx(0.999 ** 10)
    assert main(["plan", "--model", str(path), "--theta", "64", "--max-group-parents", "8"]) == 0
    fields = dict(line.split(" ", 1) for line in capsys.readouterr().out.splitlines())
    assert int(fields["sum_products"]) <= 64


def test_predict_output(capsys):
    assert main(["predict", "--leaves", "0.9", "--density", "1.6"]) == 0
    assert capsys.readouterr().out.strip() == "6.4506"


def test_estimate_output(model_file, capsys):
    m = load_model(model_file)
    kept = m.nodes[min(m.interest)].name
    assert main(["estimate", "--model", str(model_file), "--predicate", f"{kept}=1", "--precision", "0.02",
                 "--method", "old"]) == 0
    keys = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
    assert keys[:2] == ["estimate", "sample_size"]
    assert "preprocessing_time" in keys and "simulation_time" in keys
    leaf = next(m.nodes[i].name for i in range(m.n) if i not in m.interest)
    assert main(["estimate", "--model", str(model_file), "--predicate", f"{leaf}=1"]) == 1


def test_exit_codes(tmp_path, model_file):
    bad = tmp_path / "bad.pbn"
    bad.write_text("pbn 1\nperturbation 0.1\nnode a\n  f 0.5 1\n")
    assert main(["simulate", "--model", str(bad), "--steps", "10"]) == 2
    assert main(["simulate", "--model", str(model_file)]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["plan", "--model", str(model_file), "--theta", "1"]) == 3
    assert main(["predict", "--leaves", "2", "--density", "1"]) == 1


def test_benchmark_command(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["benchmark", "--entry", "12,1.5,0.5,1", "--steps", "2000", "--warmup", "10",
                 "--repeats", "1", "--output-dir", str(out)]) == 0
    assert (out / "benchmark.csv").exists() and (out / "speedup_new_old.png").exists()
