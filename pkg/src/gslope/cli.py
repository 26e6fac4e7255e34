"""Command-line interface: ``gslope {lambda,solve,simulate,gwas}``.

Exit status is 0 on success, 1 on usage or input errors and 2 when a
numerical routine fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from . import __version__
from .groups import GroupPartition, build_grouped_design
from .lambdas import make_lambda, weights_from_rule
from .sorted_l1 import LambdaSequence
from .special import ConvergenceError

INTERFACE_VERSION = "1.0"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- I/O helpers -------------------------------------------------------------


def read_csv(path):
    """Header and numeric rows of a CSV file (``-`` reads stdin)."""
    fh = sys.stdin if path == "-" else open(path, newline="")
    try:
        rows = list(csv.reader(fh))
    finally:
        if fh is not sys.stdin:
            fh.close()
    rows = [r for r in rows if r]
    if not rows:
        raise UsageError(f"{path}: empty file (a header row is required)")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise UsageError(f"{path}: non-numeric entry ({exc})") from None
    if body and any(len(r) != len(header) for r in body):
        raise UsageError(f"{path}: rows and header differ in length")
    return header, data.reshape(len(body), len(header))


def read_vector(path):
    _, data = read_csv(path)
    if data.shape[1] != 1:
        raise UsageError(f"{path}: expected a single column")
    return data[:, 0]


def write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def to_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def read_groups(path, p):
    """Partition from a ``variable,group`` CSV (0-based indices)."""
    _, data = read_csv(path)
    if data.shape[1] != 2:
        raise UsageError(f"{path}: expected two columns, variable index and group index")
    var = data[:, 0].astype(int)
    grp = data[:, 1].astype(int)
    if np.any(data != np.round(data)):
        raise UsageError(f"{path}: indices must be integers")
    if sorted(var.tolist()) != list(range(p)):
        raise UsageError(f"{path}: variable indices must list 0..{p - 1} exactly once")
    labels = np.empty(p, dtype=int)
    labels[var] = grp
    return GroupPartition.from_labels(labels)


def _int_list(text, m, what):
    vals = [v for v in text.split(",") if v.strip()]
    try:
        nums = [int(v) for v in vals]
    except ValueError:
        raise UsageError(f"--{what} must be an integer or a comma-separated list") from None
    if len(nums) == 1:
        nums = nums * m
    if len(nums) != m:
        raise UsageError(f"--{what} needs 1 or m={m} values, got {len(nums)}")
    return np.array(nums)


def _weights(text, sizes, ranks):
    try:
        return weights_from_rule(text, sizes, ranks)
    except ValueError:
        pass
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"unknown weight rule {text!r}") from None
    if len(vals) == 1:
        vals = vals * len(sizes)
    if len(vals) != len(sizes):
        raise UsageError(f"--weights needs 1 or {len(sizes)} values")
    return np.array(vals)


# -- subcommands -------------------------------------------------------------


def cmd_lambda(args):
    if args.m < 1:
        raise UsageError("--m must be positive")
    ranks = _int_list(args.ranks, args.m, "ranks")
    sizes = ranks if args.sizes is None else _int_list(args.sizes, args.m, "sizes")
    w = _weights(args.weights, sizes, ranks)
    lam = make_lambda(args.kind, args.q, w, ranks, args.m, args.n)
    write_text(args.out, to_csv(["index", "lambda"], [(i + 1, _fmt(v)) for i, v in enumerate(lam.values)]))
    return EXIT_OK


def _lambda_for_solve(args, design):
    if args.lambda_file:
        vals = read_vector(args.lambda_file)
        if vals.size != design.m:
            raise UsageError(f"lambda file has {vals.size} entries, need {design.m}")
        return LambdaSequence(vals)
    return make_lambda(args.lambda_kind, args.q, design.weights, design.ranks, design.m, design.n)


def cmd_solve(args):
    from .sigma import solve_with_sigma_estimation
    from .solver import SolveOptions, solve_gslope, solve_orthogonal

    _, X = read_csv(args.X)
    y = read_vector(args.y)
    if X.shape[0] != y.size:
        raise UsageError("X and y have different numbers of rows")
    part = read_groups(args.groups, X.shape[1])
    design = build_grouped_design(X, part)
    design = design.with_weights(_weights(args.weights, part.sizes, design.ranks))
    lam = _lambda_for_solve(args, design)
    estimate = args.sigma == "estimate"
    try:
        sigma = 1.0 if estimate else float(args.sigma)
    except ValueError:
        raise UsageError("--sigma must be a positive number or 'estimate'") from None
    opts = SolveOptions(args.gap_tol, args.infeas_tol, args.max_iter, sigma)
    solver = solve_orthogonal if args.method == "orthogonal" else solve_gslope
    if estimate:
        est = solve_with_sigma_estimation(design, lam, y, opts, solver=solver)
        res = est.result
        res.extra.update(sigma_converged=est.converged, sigma_cycle=est.cycle, sigma_trace=est.trace)
    else:
        res = solver(design, lam, y, opts)
    out = res.to_dict()
    out["lambda"] = {"kind": getattr(lam, "kind", "custom"), "values": [float(v) for v in np.asarray(lam)]}
    out["weights"] = design.weights.tolist()
    out["ranks"] = design.ranks.tolist()
    write_text(args.out, to_json(out))
    converged = res.converged and (not estimate or res.extra["sigma_converged"])
    return EXIT_OK if converged else EXIT_NUMERIC


SIM_COLUMNS = [
    "q",
    "k",
    "gfdr_hat",
    "se_gfdr",
    "power_hat",
    "se_power",
    "nominal_bound",
    "replications",
    "failures",
    "mean_discoveries",
]


def cmd_simulate(args):
    from .simulate import SimConfig, run_experiment

    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    qs = cfg.pop("q", 0.1)
    ks = cfg.pop("k", 0)
    qs = qs if isinstance(qs, list) else [qs]
    ks = ks if isinstance(ks, list) else [ks]
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg["threads"] = args.threads
    rows = []
    failures = 0
    for q in qs:
        for k in ks:
            try:
                config = SimConfig(q=q, k=k, **cfg)
            except TypeError as exc:
                raise UsageError(f"bad config: {exc}") from None
            rep = run_experiment(config).as_row()
            failures += rep["failures"]
            rows.append([_fmt(rep[c]) for c in SIM_COLUMNS])
    write_text(args.out, to_csv(SIM_COLUMNS, rows))
    return EXIT_OK if failures == 0 else EXIT_NUMERIC


def cmd_gwas(args):
    from .gwas import GenotypeMatrix, gene_gslope

    header, G = read_csv(args.geno)
    if np.any(G != np.round(G)):
        raise UsageError("genotypes must be integers 0, 1 or 2")
    y = read_vector(args.pheno)
    if y.size != G.shape[0]:
        raise UsageError("genotype and phenotype files have different numbers of rows")
    g = GenotypeMatrix(G.astype(int), tuple(header))
    rep = gene_gslope(g, y, args.pi, args.r, args.q)
    write_text(args.out, to_json(rep.to_dict()))
    return EXIT_OK if rep.converged else EXIT_NUMERIC


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gslope", description="Group SLOPE: penalties, solver, simulations and SNP pipeline.")
    parser.add_argument("--version", action="version", version=f"gslope {__version__} (interface {INTERFACE_VERSION})")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("lambda", help="print a penalty sequence as CSV")
    p.add_argument("--kind", choices=["max", "mean", "corrected"], required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, help="sample size (corrected kind only)")
    p.add_argument("--ranks", required=True, help="group rank, or a comma-separated list of m ranks")
    p.add_argument("--sizes", help="group sizes for size-based weights (default: the ranks)")
    p.add_argument("--weights", default="sqrt_rank", help="sqrt_size, sqrt_rank, size, one, or explicit values")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("solve", help="fit group SLOPE to CSV data")
    p.add_argument("--X", required=True, help="design CSV with a header row")
    p.add_argument("--y", required=True, help="response CSV, one column with a header")
    p.add_argument("--groups", required=True, help="CSV of variable_index,group_index (0-based)")
    p.add_argument("--lambda-kind", choices=["max", "mean", "corrected"], default="mean")
    p.add_argument("--lambda-file", help="explicit penalty sequence, one column")
    p.add_argument("--q", type=float, default=0.1)
    p.add_argument("--weights", default="sqrt_rank")
    p.add_argument("--sigma", default="1.0", help="noise level, or 'estimate'")
    p.add_argument("--method", choices=["fista", "orthogonal"], default="fista")
    p.add_argument("--gap-tol", type=float, default=1e-6)
    p.add_argument("--infeas-tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=20_000)
    p.add_argument("--out", help="output JSON (default: stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="estimate group FDR and power")
    p.add_argument("--config", required=True, help="JSON object with SimConfig fields; q and k may be lists")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--seed", type=int, help="overrides the seed in the config")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gwas", help="screen, clump and select SNPs")
    p.add_argument("--geno", required=True, help="CSV of 0/1/2 genotypes with a header row of SNP ids")
    p.add_argument("--pheno", required=True, help="CSV with a single phenotype column")
    p.add_argument("--pi", type=float, default=0.05)
    p.add_argument("--r", type=float, default=0.3)
    p.add_argument("--q", type=float, default=0.1)
    p.add_argument("--out", help="output JSON (default: stdout)")
    p.set_defaults(func=cmd_gwas)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("gslope: error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"gslope: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"gslope: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
