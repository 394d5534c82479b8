"""Command-line front end: simulate, fit, path, roc.

File conventions (all plain text, diffable, atomically written):
  samples.csv   one row per replication, comma-separated, no header
  manifest.json layout + pointers: {"samples", "n", "sizes", "schemes", "truth", ...}
  edge lists    lines "i,j" with i < j, 1-based, sorted
  matrices      first line is K, then K comma-separated rows
  summary.csv / roc.csv   headered CSV, floats written as repr (lossless)

Exit codes: 0 success (including a reported non-converged fit), 1 usage or
configuration error, 2 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .blockmat import BlockLayout, NotPositiveDefinite, mass_matrix
from .estimate import (
    InsufficientSamples,
    SampleSet,
    SingularDiagonal,
    default_epsilon,
    empirical_covariance,
    regularized_correlation,
    solver_correlation,
)
from .graph import edge_list, extract_graph, from_edge_list, roc_from_graphs
from .simgen import InvalidConfig, SimConfig, simulate
from .solver import (
    InvalidInput,
    SolverConfig,
    admm_solve,
    default_lambda_grid,
    dual_feasibility_gap,
    lambda_path,
)

__all__ = [
    "DatasetManifest",
    "RunReport",
    "cmd_simulate",
    "cmd_fit",
    "cmd_path",
    "cmd_roc",
    "main",
]


class CliUsageError(Exception):
    """Bad flags or configuration: exit code 1."""


class CliIoError(Exception):
    """Unreadable/unparseable inputs or unwritable outputs: exit code 2."""


# ---------------------------------------------------------------- file layer


def _write_text(path, text):
    """Write via a temp file & atomic rename; never leaves partial output."""
    path = os.fspath(path)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    try:
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise CliIoError(f"cannot write {path}: {exc}") from exc


def _matrix_text(A):
    rows = "\n".join(",".join(repr(float(x)) for x in row) for row in A)
    return rows + "\n"


def _edges_text(pairs):
    return "".join(f"{i},{j}\n" for i, j in pairs)


def _read_edge_file(path, p):
    try:
        pairs = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                i, j = (int(tok) for tok in line.split(","))
                pairs.append((i, j))
        return from_edge_list(p, pairs)
    except (OSError, ValueError) as exc:
        raise CliIoError(f"cannot read edge list {path}: {exc}") from exc


@dataclass(frozen=True)
class DatasetManifest:
    """Pointer file tying a sample matrix to its layout and optional truth."""

    samples: str
    n: int
    sizes: tuple
    schemes: tuple
    truth: str | None = None
    meta: dict | None = None

    @property
    def layout(self):
        return BlockLayout(self.sizes, self.schemes)

    def save(self, path):
        doc = asdict(self)
        doc["sizes"] = list(self.sizes)
        doc["schemes"] = list(self.schemes)
        _write_text(path, json.dumps(doc, indent=2) + "\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
            return cls(
                samples=doc["samples"],
                n=int(doc["n"]),
                sizes=tuple(int(s) for s in doc["sizes"]),
                schemes=tuple(doc["schemes"]),
                truth=doc.get("truth"),
                meta=doc.get("meta"),
            )
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliIoError(f"cannot read manifest {path}: {exc}") from exc


def _load_samples(manifest, manifest_path):
    path = os.path.join(os.path.dirname(os.path.abspath(manifest_path)), manifest.samples)
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise CliIoError(f"cannot read samples {path}: {exc}") from exc
    try:
        return SampleSet(manifest.layout, data)
    except ValueError as exc:
        raise CliIoError(f"samples {path} do not match the declared layout: {exc}") from exc


@dataclass(frozen=True)
class RunReport:
    """Everything needed to audit a fit: config echo, per-penalty diagnostics, timing."""

    config: dict
    per_lambda: list
    timing_seconds: float
    version: str

    def save(self, path):
        _write_text(path, json.dumps(asdict(self), indent=2) + "\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
            return cls(**doc)
        except (OSError, ValueError, TypeError) as exc:
            raise CliIoError(f"cannot read report {path}: {exc}") from exc


# ------------------------------------------------------------ shared pieces


def _solution_row(sol, dual_gap, n_edges):
    return {
        "lambda": sol.config.lam,
        "edges": n_edges,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "objective": sol.objective,
        "kkt_gap": sol.kkt_gap,
        "dual_gap": dual_gap,
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
    }


def _prepare_problem(args):
    manifest = DatasetManifest.load(args.manifest)
    samples = _load_samples(manifest, args.manifest)
    C = empirical_covariance(samples)
    eps = args.epsilon if args.epsilon is not None else default_epsilon(C, samples.n)
    est = regularized_correlation(C, eps)
    return manifest, samples, eps, solver_correlation(est)


def _solver_config(args, lam):
    return SolverConfig(lam=lam, rho=args.rho, tol=args.tol, max_iter=args.max_iter)


SUMMARY_COLUMNS = (
    "lambda", "edges", "iterations", "converged", "objective",
    "kkt_gap", "dual_gap", "primal_residual", "dual_residual",
)


def _summary_text(rows):
    def cell(v):
        if isinstance(v, bool):
            return str(int(v))
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = [",".join(SUMMARY_COLUMNS)]
    lines += [",".join(cell(row[c]) for c in SUMMARY_COLUMNS) for row in rows]
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- commands


def cmd_simulate(args):
    try:
        config = SimConfig(setup=args.setup, n=args.n, p=args.p, K=args.grid,
                           seed=args.seed, noise_sd=args.noise_sd)
        draw = simulate(config)
    except InvalidConfig as exc:
        raise CliUsageError(str(exc)) from exc
    out = args.out
    samples_text = "\n".join(
        ",".join(repr(float(x)) for x in row) for row in draw.samples.data
    ) + "\n"
    _write_text(os.path.join(out, "samples.csv"), samples_text)
    _write_text(os.path.join(out, "truth.csv"), _edges_text(edge_list(draw.truth)))
    manifest = DatasetManifest(
        samples="samples.csv",
        n=config.n,
        sizes=draw.samples.layout.sizes,
        schemes=draw.samples.layout.schemes,
        truth="truth.csv",
        meta={"setup": config.setup, "seed": config.seed, "noise_sd": config.noise_sd},
    )
    manifest.save(os.path.join(out, "manifest.json"))
    print(f"wrote {out}/samples.csv ({config.n}x{draw.samples.layout.K}), "
          f"truth with {draw.truth.n_edges} edges, manifest.json")
    return 0


def cmd_fit(args):
    t0 = time.perf_counter()
    manifest, samples, eps, R = _prepare_problem(args)
    sol = admm_solve(R, _solver_config(args, args.lam))
    graph = extract_graph(sol, R.layout)
    dual_gap = dual_feasibility_gap(sol, R, args.lam)
    elapsed = time.perf_counter() - t0

    out = args.out
    _write_text(os.path.join(out, "edges.csv"), _edges_text(edge_list(graph)))
    mass = mass_matrix(R.layout)
    K = R.layout.K
    _write_text(os.path.join(out, "q.csv"), f"{K}\n" + _matrix_text(sol.Q.entries))
    _write_text(os.path.join(out, "h.csv"),
                f"{K}\n" + _matrix_text(sol.precision_matrix(mass, "q").entries))
    report = RunReport(
        config={"command": "fit", "manifest": args.manifest, "lambda": args.lam,
                "epsilon": eps, "rho": args.rho, "tol": args.tol,
                "max_iter": args.max_iter},
        per_lambda=[_solution_row(sol, dual_gap, graph.n_edges)],
        timing_seconds=elapsed,
        version=__version__,
    )
    report.save(os.path.join(out, "report.json"))
    state = "converged" if sol.converged else "NOT CONVERGED"
    print(f"{state} in {sol.iterations} iterations: {graph.n_edges} edges, "
          f"kkt_gap={sol.kkt_gap:.2e}, dual_gap={dual_gap:.2e}")
    return 0


def cmd_path(args):
    t0 = time.perf_counter()
    manifest, samples, eps, R = _prepare_problem(args)
    try:
        grid = default_lambda_grid(R, args.n_lambdas, args.lambda_min_ratio)
    except InvalidInput as exc:
        raise CliUsageError(str(exc)) from exc
    sols = lambda_path(R, grid, _solver_config(args, float(grid[0])))
    elapsed = time.perf_counter() - t0

    out = args.out
    rows = []
    for k, sol in enumerate(sols, start=1):
        graph = extract_graph(sol, R.layout)
        _write_text(os.path.join(out, f"edges_{k:03d}.csv"),
                    _edges_text(edge_list(graph)))
        rows.append(_solution_row(sol, dual_feasibility_gap(sol, R, sol.config.lam),
                                  graph.n_edges))
    _write_text(os.path.join(out, "summary.csv"), _summary_text(rows))
    report = RunReport(
        config={"command": "path", "manifest": args.manifest,
                "n_lambdas": args.n_lambdas, "lambda_min_ratio": args.lambda_min_ratio,
                "epsilon": eps, "rho": args.rho, "tol": args.tol,
                "max_iter": args.max_iter},
        per_lambda=rows,
        timing_seconds=elapsed,
        version=__version__,
    )
    report.save(os.path.join(out, "report.json"))
    print(f"path of {len(sols)} penalties: lambda in [{grid[-1]:.4g}, {grid[0]:.4g}], "
          f"edges from {rows[0]['edges']} to {rows[-1]['edges']}")
    return 0


def _staircase(points):
    """Envelope vertices (fpr, tpr) incl endpoints, FPR-sorted, TPR cummax'd."""
    f = np.array([0.0] + [pt.fpr for pt in points] + [1.0])
    t = np.array([0.0] + [pt.tpr for pt in points] + [1.0])
    order = np.lexsort((t, f))
    return f[order], np.maximum.accumulate(t[order])


def _roc_svg(points, auc):
    W, H, L, B, T, Rm = 560, 420, 64, 48, 18, 18

    def sx(v):
        return L + v * (W - L - Rm)

    def sy(v):
        return (H - B) - v * (H - B - T)

    f, t = _staircase(points)
    verts = [(sx(0.0), sy(0.0))]
    for k in range(1, len(f)):
        verts.append((sx(f[k]), sy(t[k - 1])))  # run, then rise
        verts.append((sx(f[k]), sy(t[k])))
    path = " ".join(f"{x:.2f},{y:.2f}" for x, y in verts)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(1):.2f}" y2="{sy(1):.2f}" '
        'stroke="#999999" stroke-dasharray="5,4" stroke-width="1"/>',
        f'<polyline points="{path}" fill="none" stroke="#1f5fbf" stroke-width="2"/>',
    ]
    for pt in points:
        parts.append(f'<circle cx="{sx(pt.fpr):.2f}" cy="{sy(pt.tpr):.2f}" r="3" '
                     'fill="#1f5fbf"/>')
    for v in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts += [
            f'<line x1="{sx(v):.2f}" y1="{sy(0):.2f}" x2="{sx(v):.2f}" y2="{sy(0)+5:.2f}" '
            'stroke="black"/>',
            f'<text x="{sx(v):.2f}" y="{sy(0)+20:.2f}" font-size="12" '
            f'text-anchor="middle">{v:g}</text>',
            f'<line x1="{sx(0):.2f}" y1="{sy(v):.2f}" x2="{sx(0)-5:.2f}" y2="{sy(v):.2f}" '
            'stroke="black"/>',
            f'<text x="{sx(0)-8:.2f}" y="{sy(v)+4:.2f}" font-size="12" '
            f'text-anchor="end">{v:g}</text>',
        ]
    parts += [
        f'<line x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(1):.2f}" y2="{sy(0):.2f}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{sx(0):.2f}" y1="{sy(0):.2f}" x2="{sx(0):.2f}" y2="{sy(1):.2f}" '
        'stroke="black" stroke-width="1"/>',
        f'<text x="{(sx(0)+sx(1))/2:.2f}" y="{H-10:.2f}" font-size="13" '
        'text-anchor="middle">false positive rate</text>',
        f'<text x="14" y="{(sy(0)+sy(1))/2:.2f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 14 {(sy(0)+sy(1))/2:.2f})">true positive rate</text>',
        f'<text x="{sx(0.04):.2f}" y="{sy(0.95):.2f}" font-size="14">'
        f'AUC = {auc:.4f}</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def cmd_roc(args):
    manifest = DatasetManifest.load(args.manifest)
    if not manifest.truth:
        raise CliIoError(f"manifest {args.manifest} declares no truth graph")
    p = len(manifest.sizes)
    truth_path = os.path.join(os.path.dirname(os.path.abspath(args.manifest)), manifest.truth)
    truth = _read_edge_file(truth_path, p)

    summary_path = os.path.join(args.path_output, "summary.csv")
    try:
        with open(summary_path) as fh:
            header = fh.readline().strip().split(",")
            rows = [dict(zip(header, line.strip().split(","))) for line in fh if line.strip()]
        lams = [float(row["lambda"]) for row in rows]
    except (OSError, ValueError, KeyError) as exc:
        raise CliIoError(f"cannot read path summary {summary_path}: {exc}") from exc
    graphs = [
        _read_edge_file(os.path.join(args.path_output, f"edges_{k:03d}.csv"), p)
        for k in range(1, len(lams) + 1)
    ]

    points, auc = roc_from_graphs(lams, graphs, truth)
    out = args.out
    lines = ["lambda,tpr,fpr,edges"]
    lines += [f"{repr(pt.lam)},{repr(pt.tpr)},{repr(pt.fpr)},{pt.edges}" for pt in points]
    _write_text(os.path.join(out, "roc.csv"), "\n".join(lines) + "\n")
    _write_text(os.path.join(out, "roc.svg"), _roc_svg(points, auc))
    print(f"AUC = {auc:.6f}")
    return 0


# ------------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract wants 1
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_solver_flags(sub):
    sub.add_argument("--epsilon", type=float, default=None,
                     help="ridge for the correlation step (default: rate-based rule)")
    sub.add_argument("--rho", type=float, default=1.0, help="ADMM step (default 1)")
    sub.add_argument("--tol", type=float, default=1e-4,
                     help="relative primal residual threshold (default 1e-4)")
    sub.add_argument("--max-iter", type=int, default=2000,
                     help="ADMM iteration cap (default 2000)")


def build_parser():
    parser = _Parser(prog="fglasso",
                     description="Conditional-independence graphs for random functions")
    parser.add_argument("--version", action="version", version=f"fglasso {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="draw one of the three simulation setups")
    sim.add_argument("--setup", type=int, required=True, choices=(1, 2, 3))
    sim.add_argument("--n", type=int, required=True, help="number of replications")
    sim.add_argument("--p", type=int, required=True, help="number of nodes")
    sim.add_argument("--grid", type=int, required=True, help="grid size K per node")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--noise-sd", type=float, default=None,
                     help="override setup 3's calibrated noise level")
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(func=cmd_simulate)

    fit = subs.add_parser("fit", help="estimate one graph at a fixed penalty")
    fit.add_argument("manifest", help="dataset manifest (see simulate)")
    fit.add_argument("--lambda", dest="lam", type=float, required=True,
                     help="group penalty level")
    _add_solver_flags(fit)
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=cmd_fit)

    path = subs.add_parser("path", help="trace a descending penalty path")
    path.add_argument("manifest")
    path.add_argument("--n-lambdas", type=int, default=30)
    path.add_argument("--lambda-min-ratio", type=float, default=0.01)
    _add_solver_flags(path)
    path.add_argument("--out", required=True)
    path.set_defaults(func=cmd_path)

    roc = subs.add_parser("roc", help="score a penalty path against the truth graph")
    roc.add_argument("manifest", help="manifest that declares a truth file")
    roc.add_argument("path_output", help="output directory of a previous `fglasso path`")
    roc.add_argument("--out", required=True)
    roc.set_defaults(func=cmd_roc)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliUsageError as exc:
        print(f"fglasso: error: {exc}", file=sys.stderr)
        return 1
    except (InvalidConfig, InvalidInput, InsufficientSamples, SingularDiagonal,
            NotPositiveDefinite) as exc:
        print(f"fglasso: error: {exc}", file=sys.stderr)
        return 1
    except CliIoError as exc:
        print(f"fglasso: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
