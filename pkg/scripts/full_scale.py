"""Opt-in full-scale simulation grids (m=1000 groups, p around 5000).

Each preset writes one CSV per lambda kind through ``gslope simulate``.
Expect hours of CPU time; use ``--threads`` and ``--reps`` to trade off.

    python3 scripts/full_scale.py identity --out results/
    python3 scripts/full_scale.py mixed --reps 100 --threads 8
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from gslope.cli import main as cli_main

KS = [0, 10, 25, 50, 100, 150, 200]
QS = [0.05, 0.1, 0.2]

PRESETS = {
    "identity": [
        ("identity_max", dict(m=1000, n=5000, group_size_spec=5, design="identity", lambda_kind="max")),
        ("identity_mean", dict(m=1000, n=5000, group_size_spec=5, design="identity", lambda_kind="mean")),
    ],
    "mixed": [
        ("mixed_max", dict(m=1000, n=5000, group_size_spec={"repeat": [3, 4, 5, 6, 7]}, design="identity", lambda_kind="max")),
        ("mixed_mean", dict(m=1000, n=5000, group_size_spec={"repeat": [3, 4, 5, 6, 7]}, design="identity", lambda_kind="mean")),
    ],
    "gaussian": [
        (
            "gaussian_corrected",
            dict(m=1000, n=5000, group_size_spec={"binomial": [1000, 0.004]}, design="gaussian", lambda_kind="corrected"),
        ),
    ],
}


def run(preset, out_dir, reps, threads, seed):
    out_dir.mkdir(parents=True, exist_ok=True)
    worst = 0
    for name, cfg in PRESETS[preset]:
        cfg = dict(cfg, q=QS, k=KS, replications=reps, seed=seed)
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            json.dump(cfg, fh)
        out = out_dir / f"{name}.csv"
        print(f"{name}: writing {out}", file=sys.stderr)
        code = cli_main(["simulate", "--config", fh.name, "--out", str(out), "--threads", str(threads)])
        Path(fh.name).unlink()
        worst = max(worst, code)
    return worst


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("preset", choices=sorted(PRESETS))
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--reps", type=int, default=300)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    return ap.parse_args(argv)


if __name__ == "__main__":
    a = parse_args()
    raise SystemExit(run(a.preset, a.out, a.reps, a.threads, a.seed))
