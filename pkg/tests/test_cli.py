import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gslope import __version__
from gslope.cli import main, read_csv, read_groups

DATA = Path(__file__).parent / "data"
SOLVE_ARGS = [
    "solve",
    "--X", str(DATA / "fixture_X.csv"),
    "--y", str(DATA / "fixture_y.csv"),
    "--groups", str(DATA / "fixture_groups.csv"),
    "--lambda-kind", "mean",
    "--q", "0.2",
    "--sigma", "0.5",
    "--gap-tol", "1e-12",
    "--infeas-tol", "1e-12",
]  # fmt: skip


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_version(capsys):
    code, out, _ = run(["--version"], capsys)
    assert code == 0
    assert out.strip() == f"gslope {__version__} (interface 1.0)"


def test_lambda_csv(capsys):
    code, out, _ = run(["lambda", "--kind", "mean", "--q", "0.1", "--m", "100", "--ranks", "5", "--weights", "sqrt_size"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["index", "lambda"]
    vals = np.array([float(r[1]) for r in rows[1:]])
    assert vals.size == 100
    assert np.all(np.diff(vals) <= 0)
    assert [int(r[0]) for r in rows[1:]] == list(range(1, 101))


def test_lambda_explicit_lists(capsys, tmp_path):
    out_file = tmp_path / "lam.csv"
    code, _, _ = run(
        ["lambda", "--kind", "corrected", "--q", "0.1", "--m", "3", "--n", "50", "--ranks", "1,2,3", "--weights", "1,1,2", "--out", str(out_file)],
        capsys,
    )
    assert code == 0
    assert len(out_file.read_text().splitlines()) == 4


@pytest.mark.parametrize(
    "argv",
    [
        ["lambda", "--kind", "mean", "--q", "0.1", "--m", "3", "--ranks", "1,2"],
        ["lambda", "--kind", "corrected", "--q", "0.1", "--m", "3", "--ranks", "2"],
        ["lambda", "--kind", "mean", "--q", "1.5", "--m", "3", "--ranks", "2"],
        ["lambda", "--kind", "mean", "--q", "0.1", "--m", "3", "--ranks", "2", "--weights", "bogus"],
        ["lambda", "--kind", "median", "--q", "0.1", "--m", "3", "--ranks", "2"],
        ["solve", "--unknown-flag"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors_exit_one(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert err


def test_solve_matches_golden(capsys):
    code, out, _ = run(SOLVE_ARGS, capsys)
    assert code == 0
    got = json.loads(out)
    gold = json.loads((DATA / "fixture_solve_golden.json").read_text())
    assert got["selected"] == gold["selected"]
    assert np.allclose(got["beta"], gold["beta"], atol=1e-8, rtol=0)
    assert np.allclose(got["effects"], gold["effects"], atol=1e-8, rtol=0)
    assert got["diagnostics"]["objective"] == pytest.approx(gold["diagnostics"]["objective"], abs=1e-8)
    assert got["lambda"] == gold["lambda"]


def test_golden_agrees_with_conic_oracle():
    cp = pytest.importorskip("cvxpy")

    gold = json.loads((DATA / "fixture_solve_golden.json").read_text())
    _, X = read_csv(DATA / "fixture_X.csv")
    _, y = read_csv(DATA / "fixture_y.csv")
    part = read_groups(DATA / "fixture_groups.csv", X.shape[1])
    lam = np.array(gold["lambda"]["values"])
    b = cp.Variable(X.shape[1])
    eff = cp.hstack([cp.norm(X[:, g] @ b[g]) for g in part.groups])
    w = cp.multiply(np.array(gold["weights"]), eff)
    diffs = lam - np.append(lam[1:], 0.0)
    pen = sum(d * cp.sum_largest(w, k + 1) for k, d in enumerate(diffs) if d > 0)
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(y[:, 0] - X @ b) + 0.5 * pen))
    prob.solve(solver="CLARABEL")
    assert prob.value == pytest.approx(gold["diagnostics"]["objective"], rel=1e-7)
    effects = np.array([np.linalg.norm(X[:, g] @ b.value[g]) for g in part.groups])
    assert np.allclose(effects, gold["effects"], atol=1e-5)


def test_solve_is_byte_identical(capsys):
    _, a, _ = run(SOLVE_ARGS, capsys)
    _, b, _ = run(SOLVE_ARGS, capsys)
    assert a == b


def test_solve_orthogonal_method_rejects_general_design(capsys):
    code, _, err = run(SOLVE_ARGS + ["--method", "orthogonal"], capsys)
    assert code == 1 and "orthogonal" in err


def test_solve_nonconvergence_exit_two(capsys):
    code, out, _ = run(SOLVE_ARGS + ["--max-iter", "2"], capsys)
    assert code == 2
    assert json.loads(out)["diagnostics"]["converged"] is False


def test_solve_with_sigma_estimation(capsys):
    argv = list(SOLVE_ARGS)
    argv[argv.index("--sigma") + 1] = "estimate"
    code, out, _ = run(argv + ["--lambda-kind", "corrected"], capsys)
    res = json.loads(out)
    assert code in (0, 2)
    assert res["diagnostics"]["sigma"] > 0
    assert "sigma_trace" in res["diagnostics"]


def test_solve_bad_groups_file(capsys, tmp_path):
    bad = tmp_path / "groups.csv"
    bad.write_text("variable,group\n0,0\n0,1\n")
    argv = list(SOLVE_ARGS)
    argv[argv.index("--groups") + 1] = str(bad)
    code, _, err = run(argv, capsys)
    assert code == 1 and "variable indices" in err


def write_config(tmp_path, **cfg):
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_simulate_zero_replications_is_usage_error(capsys, tmp_path):
    path = write_config(tmp_path, m=10, n=50, replications=0)
    code, _, err = run(["simulate", "--config", path], capsys)
    assert code == 1 and "replications" in err


def test_simulate_grid_csv(capsys, tmp_path):
    path = write_config(tmp_path, m=20, n=100, group_size_spec=5, q=[0.1, 0.2], k=[0, 4], replications=10)
    out_file = tmp_path / "out.csv"
    code, _, _ = run(["simulate", "--config", path, "--out", str(out_file), "--seed", "3"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out_file.read_text())))
    assert [(r["q"], r["k"]) for r in rows] == [("0.1", "0"), ("0.1", "4"), ("0.2", "0"), ("0.2", "4")]
    assert all(0 <= float(r["gfdr_hat"]) <= 1 for r in rows)


def test_simulate_byte_identical_and_thread_stable(capsys, tmp_path):
    path = write_config(tmp_path, m=20, n=100, group_size_spec=5, q=0.1, k=3, replications=12)
    outs = []
    for threads in ("1", "1", "4"):
        code, out, _ = run(["simulate", "--config", path, "--seed", "9", "--threads", threads], capsys)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1] == outs[2]


def test_simulate_bad_config_key(capsys, tmp_path):
    path = write_config(tmp_path, m=10, n=50, colour="red")
    code, _, err = run(["simulate", "--config", path], capsys)
    assert code == 1 and "colour" in err


def test_gwas_command(capsys, tmp_path):
    rng = np.random.default_rng(0)
    G = rng.binomial(2, 0.3, size=(200, 25))
    y = 0.8 * G[:, 4] + rng.standard_normal(200)
    geno = tmp_path / "geno.csv"
    pheno = tmp_path / "pheno.csv"
    with open(geno, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"rs{j}" for j in range(25)])
        w.writerows(G.tolist())
    with open(pheno, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trait"])
        w.writerows([[v] for v in y])
    code, out, _ = run(["gwas", "--geno", str(geno), "--pheno", str(pheno), "--pi", "0.05", "--r", "0.3", "--q", "0.1"], capsys)
    assert code == 0
    res = json.loads(out)
    assert "rs4" in res["selected_snps"]
    assert res["lambda"]["m"] == 25
    assert set(res) >= {"clusters", "selected", "effects", "sigma_hat", "lambda"}


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gslope", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("gslope ")
