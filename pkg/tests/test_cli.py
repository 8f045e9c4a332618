import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from diffuse.cli import main
from diffuse.core import SparseMatrix
from diffuse.io import make_fixture, read_matrix_market, read_trace_csv, read_vector, write_matrix_market
from diffuse.solvers import dense_oracle_eigen, dense_oracle_solve


@pytest.fixture
def snake_path():
    with resources.as_file(resources.files("diffuse").joinpath("data/snake.edges")) as p:
        yield str(p)


def test_usage_error_exits_1(capsys):
    assert main(["solve"]) == 1
    assert main(["bogus"]) == 1


def test_solve_snake_damped(snake_path, tmp_path, capsys):
    out = tmp_path / "x.txt"
    trace = tmp_path / "t.csv"
    code = main(["solve", "--matrix", snake_path, "--format", "edges", "--damping", "0.85", "--b", "uniform",
                 "--out", str(out), "--trace", str(trace), "--check-invariant-every", "10"])
    assert code == 0
    x = read_vector(out, 5)
    m = make_fixture("snake")[0].scaled(0.85)
    b = np.full(5, 0.15 / 5)
    assert np.max(np.abs(x - m.to_dense() @ x - b)) <= 1e-8
    assert np.max(np.abs(x - dense_oracle_solve(m, b))) <= 1e-8
    assert len(read_trace_csv(trace)) > 0
    assert "backward residual" in capsys.readouterr().out


def test_solve_missing_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.mtx")
    assert main(["solve", "--matrix", missing]) == 1
    assert missing in capsys.readouterr().err


def test_solve_budget_exhaustion(capsys):
    assert main(["solve", "--matrix", "fixture:random_substochastic(50, 1)", "--max-steps", "1"]) == 2


@pytest.mark.parametrize("flags", [
    ["--scheduler", "greedy", "--schedule", "x.txt"],
    ["--b", "file:/does/not/exist"],
    ["--eps", "0"],
])
def test_solve_bad_flags(flags, capsys):
    assert main(["solve", "--matrix", "fixture:twonode"] + flags) == 1


def test_solve_fixture_b_and_seed_reproducible(tmp_path, capsys):
    outs = []
    for k in range(2):
        p = tmp_path / f"x{k}.txt"
        assert main(["solve", "--matrix", "fixture:twonode", "--b", "fixture", "--scheduler", "random",
                     "--seed", "5", "--eps", "1e-13", "--out", str(p)]) == 0
        outs.append(p.read_text())
    assert outs[0] == outs[1]
    np.testing.assert_allclose(read_vector(tmp_path / "x0.txt"), [4 / 3, 2 / 3], atol=1e-12)


def test_solve_scripted(tmp_path, capsys):
    sched = tmp_path / "s.txt"
    sched.write_text("0 1.0\n1 1.0\n")
    out = tmp_path / "x.txt"
    code = main(["solve", "--matrix", "fixture:twonode", "--b", "fixture", "--schedule", str(sched),
                 "--out", str(out)])
    assert code == 2  # two steps do not reach 1e-9
    assert read_vector(out).tolist() == [1.0, 0.5]


def test_eigen_rank1(tmp_path, capsys):
    out = tmp_path / "x.txt"
    assert main(["eigen", "--matrix", "fixture:rank1", "--out", str(out)]) == 0
    assert read_vector(out).tolist() == [0.5, 0.5]


def test_eigen_random_ergodic(tmp_path, capsys):
    out = tmp_path / "x.txt"
    assert main(["eigen", "--matrix", "fixture:random_ergodic(50,7)", "--out", str(out)]) == 0
    m, _ = make_fixture("random_ergodic(50, 7)")
    assert np.max(np.abs(read_vector(out) - dense_oracle_eigen(m))) <= 1e-8


def test_eigen_snake_negative(capsys):
    assert main(["eigen", "--matrix", "fixture:snake", "--scheduler", "negative"]) == 0


def test_eigen_positive_experimental_warns(capsys):
    main(["eigen", "--matrix", "fixture:random_ergodic(10,1)", "--scheduler", "positive-experimental"])
    assert "conjecture" in capsys.readouterr().err


def test_eigen_column_sum_report(tmp_path, capsys):
    p = tmp_path / "m.mtx"
    write_matrix_market(SparseMatrix.from_dense([[0.5, 0.5], [0.4, 0.5]]), p)
    assert main(["eigen", "--matrix", str(p)]) == 1
    err = capsys.readouterr().err
    assert "column 0" in err and "column 1" not in err


def test_emulate(capsys):
    assert main(["emulate", "--matrix", "fixture:rank1", "--cycles", "0"]) == 0
    assert "deviation 0.000e+00" in capsys.readouterr().out
    assert main(["emulate", "--matrix", "fixture:rank1", "--cycles", "5"]) == 0
    out = capsys.readouterr().out
    devs = [float(line.split("deviation")[1].split()[0]) for line in out.splitlines() if line.startswith("cycle")]
    assert len(devs) == 6 and max(devs) <= 1e-12


def test_emulate_cap(tmp_path, capsys):
    p = tmp_path / "big.mtx"
    write_matrix_market(SparseMatrix.zeros(600), p)
    assert main(["emulate", "--matrix", str(p), "--cycles", "1"]) == 1
    assert "512" in capsys.readouterr().err


def test_bench_single_method(tmp_path, capsys):
    csv = tmp_path / "b.csv"
    assert main(["bench", "--matrix", "fixture:random_substochastic(50,2)", "--methods", "power",
                 "--csv", str(csv)]) == 0
    out = capsys.readouterr().out
    assert "machine-dependent" in out
    assert len(csv.read_text().splitlines()) == 2


def test_bench_greedy_vs_power(tmp_path, capsys):
    csv = tmp_path / "b.csv"
    assert main(["bench", "--matrix", "fixture:random_substochastic(200,3)", "--methods",
                 "diffusion-greedy,diffusion-cyclic,power,jacobi", "--repeat", "3", "--parallel",
                 "--csv", str(csv)]) == 0
    rows = {line.split(",")[0]: line.split(",") for line in csv.read_text().splitlines()[1:]}
    assert set(rows) == {"diffusion-greedy", "diffusion-cyclic", "power", "jacobi"}
    assert int(rows["diffusion-greedy"][2]) <= int(rows["power"][2])


def test_bench_unknown_method(capsys):
    assert main(["bench", "--matrix", "fixture:rank1", "--methods", "magic"]) == 1


def test_snake_demo(tmp_path, capsys):
    assert main(["snake-demo", "--trace-dir", str(tmp_path)]) == 0
    mixed = read_trace_csv(tmp_path / "snake_mixed.csv")
    neg = read_trace_csv(tmp_path / "snake_negative.csv")
    assert len(mixed) > 0 and len(neg) == 4


def test_snake_demo_small_budget(tmp_path, capsys):
    assert main(["snake-demo", "--max-steps", "10", "--trace-dir", str(tmp_path)]) != 0
    assert "inconclusive" in capsys.readouterr().err


def test_convert_snake(snake_path, tmp_path, capsys):
    mtx = tmp_path / "snake.mtx"
    assert main(["convert", "--in", snake_path, "--out", str(mtx)]) == 0
    m = read_matrix_market(mtx)
    assert m.nnz == 6
    back = tmp_path / "back.edges"
    assert main(["convert", "--in", str(mtx), "--out", str(back)]) == 0
    again = tmp_path / "again.mtx"
    assert main(["convert", "--in", str(back), "--out", str(again)]) == 0
    assert mtx.read_text() == again.read_text()


def test_convert_stochastic(tmp_path, capsys):
    src = tmp_path / "g.edges"
    src.write_text("0 1 3\n0 2 1\n1 0 2\n2 0 7\n")
    before = src.read_text()
    out = tmp_path / "g.mtx"
    assert main(["convert", "--in", str(src), "--out", str(out), "--normalize", "stochastic"]) == 0
    np.testing.assert_allclose(read_matrix_market(out).col_sums, 1.0, rtol=1e-15)
    assert src.read_text() == before


def test_convert_unknown_format(tmp_path, capsys):
    src = tmp_path / "g.edges"
    src.write_text("0 1\n")
    assert main(["convert", "--in", str(src), "--out", str(tmp_path / "g.bin")]) == 1


def test_fixtures_list_and_export(tmp_path, capsys):
    assert main(["fixtures", "--list"]) == 0
    assert "snake" in capsys.readouterr().out
    out = tmp_path / "s.mtx"
    assert main(["fixtures", "--name", "snake", "--out", str(out)]) == 0
    assert read_matrix_market(out) == make_fixture("snake")[0]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "diffuse", "fixtures", "--list"], capture_output=True, text=True)
    assert r.returncode == 0 and "random_ergodic" in r.stdout
