"""Batch front end: subcommands, JSON configs, report persistence, sweeps.

Exit codes: 0 success/converged, 2 numerical dichotomy (vanishing,
concentrating, or unconverged), 3 invalid input, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CaseMismatchError,
    ChoquardError,
    ConfigError,
    DegenerateFieldError,
    InvalidParameterError,
)
from .extremals import (
    THRESHOLD_CASES,
    asymptotic_suite,
    sharp_constants,
    threshold_check,
)
from .functionals import Params
from .grid import (
    RadialField,
    RadialGrid,
    build_grid,
    grid_from_nodes,
    lp_norm,
    read_profile_csv,
    write_profile_csv,
)
from .riesz import hls_bilinear, hls_constant
from .solver import (
    ContinuationSpec,
    SolveOptions,
    SolveReport,
    continue_exponent,
    default_initial_guess,
    detect_dichotomy,
    ground_state,
)
from .verify import run_verification

EXIT_OK = 0
EXIT_DICHOTOMY = 2
EXIT_INVALID = 3
EXIT_IO = 4

PARALLELISM_ENV = "CHOQUARD_PARALLELISM"


def _dump_json(obj, path: Path | None, stream=None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    if path is not None:
        path.write_text(text + "\n")
    if stream is not None:
        stream.write(text + "\n")


def _require_keys(section: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(section)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


@dataclass(frozen=True)
class RunConfig:
    params: Params
    grid_spec: dict
    solve: SolveOptions
    init: str
    output_dir: Path
    seed: int

    def build_grid(self) -> RadialGrid:
        gs = self.grid_spec
        return build_grid(
            self.params.N, gs["rmax"], gs["M"], scheme=gs["scheme"], gamma=gs["gamma"]
        )

    def initial_field(self, grid: RadialGrid) -> RadialField:
        if self.init == "zero":
            return RadialField(grid, np.zeros(grid.node_count))
        return default_initial_guess(grid)


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a run configuration document (strict keys)."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc

    _require_keys(doc, {"params", "grid", "solve", "output_dir", "seed", "sweep"}, {"params"}, "config")

    psec = doc["params"]
    _require_keys(psec, {"N", "alpha", "p", "q", "mu", "lambda"}, {"N", "alpha", "p", "q", "mu", "lambda"}, "params")
    params = Params(
        N=int(psec["N"]), alpha=float(psec["alpha"]), p=float(psec["p"]),
        q=float(psec["q"]), mu=float(psec["mu"]), lam=float(psec["lambda"]),
    )

    gsec = dict(doc.get("grid", {}))
    _require_keys(gsec, {"rmax", "M", "scheme", "gamma"}, set(), "grid")
    grid_spec = {
        "rmax": float(gsec.get("rmax", 30.0)),
        "M": int(gsec.get("M", 1024)),
        "scheme": gsec.get("scheme", "graded"),
        "gamma": float(gsec.get("gamma", 2.0)),
    }

    ssec = dict(doc.get("solve", {}))
    _require_keys(
        ssec,
        {"step", "backtrack", "tol_residual", "max_iter", "enforce_nonneg", "continuation", "init"},
        set(),
        "solve",
    )
    init = ssec.pop("init", "gaussian")
    if init not in ("gaussian", "zero"):
        raise ConfigError(f"unknown init kind {init!r}")
    cont = ssec.pop("continuation", None)
    spec = None
    if cont is not None:
        _require_keys(cont, {"target", "steps"}, {"target", "steps"}, "solve.continuation")
        spec = ContinuationSpec(cont["target"], int(cont["steps"]))
    try:
        opts = SolveOptions(continuation=spec, **ssec)
    except TypeError as exc:
        raise ConfigError(f"bad solve options: {exc}") from exc

    return RunConfig(
        params=params,
        grid_spec=grid_spec,
        solve=opts,
        init=init,
        output_dir=Path(doc.get("output_dir", ".")),
        seed=int(doc.get("seed", 0)),
    )


def _write_report(report: SolveReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "profile.csv"
    write_profile_csv(report.profile, csv_path)
    _dump_json(report.to_dict(profile_csv_path=csv_path.name), out_dir / "report.json")


def cmd_constants(args) -> int:
    sc = sharp_constants(args.N, args.alpha)
    _dump_json(sc.to_dict(), Path(args.out) if args.out else None, sys.stdout)
    return EXIT_OK


def cmd_solve(args) -> int:
    config = load_config(args.config)
    grid = config.build_grid()
    report = ground_state(config.params, config.initial_field(grid), config.solve)
    _write_report(report, config.output_dir)
    return EXIT_OK if report.status == "converged" else EXIT_DICHOTOMY


def cmd_continue(args) -> int:
    config = load_config(args.config)
    spec = config.solve.continuation
    target = args.target or (spec.target if spec else None)
    steps = args.steps if args.steps is not None else (spec.steps if spec else None)
    if target is None or steps is None:
        raise ConfigError("continuation target/steps missing (flag or config)")
    grid = config.build_grid()
    reports = continue_exponent(config.params, target, int(steps), config.solve, grid)
    verdict = detect_dichotomy(reports)

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "levels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "p", "q", "J", "P", "linf", "status"])
        for n, rep in enumerate(reports):
            status = rep.status
            if n == len(reports) - 1 and verdict != "converged":
                status = verdict
            writer.writerow(
                [n, repr(rep.params.p), repr(rep.params.q), repr(rep.J), repr(rep.P), repr(rep.linf), status]
            )
    _dump_json(
        {"classification": verdict, "levels": [rep.J for rep in reports]},
        out / "continue_summary.json",
    )
    return EXIT_OK if verdict == "converged" else EXIT_DICHOTOMY


def cmd_threshold(args) -> int:
    config = load_config(args.config)
    family = [float(tok) for tok in args.family.split(",") if tok]
    report = threshold_check(config.params, args.case, family, num_nodes=args.nodes)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    _dump_json(report.to_dict(), config.output_dir / "margins.json", sys.stdout)
    return EXIT_OK


def _sweep_cell(payload) -> dict:
    base_doc, cell, cell_dir = payload
    params = Params(
        N=base_doc["N"], alpha=base_doc["alpha"],
        p=cell["p"], q=cell["q"], mu=cell["mu"], lam=cell["lambda"],
    )
    grid = build_grid(
        params.N, base_doc["rmax"], base_doc["M"],
        scheme=base_doc["scheme"], gamma=base_doc["gamma"],
    )
    opts = SolveOptions(**base_doc["solve"])
    row = dict(cell)
    try:
        report = ground_state(params, default_initial_guess(grid), opts)
        _write_report(report, Path(cell_dir))
        row.update(J=report.J, status=report.status, residual=report.residual_norm)
    except ChoquardError as exc:
        row.update(J=math.nan, status=f"error: {exc}", residual=math.nan)
    return row


def cmd_sweep(args) -> int:
    config_doc = json.loads(Path(args.config).read_text())
    config = load_config(args.config)
    sweep = config_doc.get("sweep")
    if not sweep:
        raise ConfigError("sweep command needs a 'sweep' section")
    _require_keys(sweep, {"p", "q", "mu", "lambda", "parallelism"}, set(), "sweep")
    axes = {
        "p": sweep.get("p", [config.params.p]),
        "q": sweep.get("q", [config.params.q]),
        "mu": sweep.get("mu", [config.params.mu]),
        "lambda": sweep.get("lambda", [config.params.lam]),
    }
    cells = []
    seen = set()
    for p in axes["p"]:
        for q in axes["q"]:
            for mu in axes["mu"]:
                for lam in axes["lambda"]:
                    cell = {"p": float(p), "q": float(q), "mu": float(mu), "lambda": float(lam)}
                    digest = hashlib.sha256(
                        json.dumps(cell, sort_keys=True).encode()
                    ).hexdigest()[:16]
                    if digest in seen:
                        continue
                    seen.add(digest)
                    cells.append((cell, digest))
    if not cells:
        raise ConfigError("sweep grid is empty")

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    base_doc = {
        "N": config.params.N, "alpha": config.params.alpha,
        "rmax": config.grid_spec["rmax"], "M": config.grid_spec["M"],
        "scheme": config.grid_spec["scheme"], "gamma": config.grid_spec["gamma"],
        "solve": {
            "step": config.solve.step, "backtrack": config.solve.backtrack,
            "tol_residual": config.solve.tol_residual, "max_iter": config.solve.max_iter,
            "enforce_nonneg": config.solve.enforce_nonneg,
        },
    }
    payloads = [
        (base_doc, cell, str(out / f"cell_{digest}")) for cell, digest in cells
    ]
    workers = int(os.environ.get(PARALLELISM_ENV, 0)) or int(sweep.get("parallelism", 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, payloads))
    else:
        rows = [_sweep_cell(pl) for pl in payloads]

    rows.sort(key=lambda r: (r["p"], r["q"], r["mu"], r["lambda"]))
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "q", "mu", "lambda", "J", "status", "residual"])
        for row in rows:
            writer.writerow(
                [repr(row["p"]), repr(row["q"]), repr(row["mu"]), repr(row["lambda"]),
                 repr(row["J"]), row["status"], repr(row["residual"])]
            )
    failures = [r for r in rows if not str(r["status"]).startswith(("converged",))]
    return EXIT_OK if not failures else EXIT_DICHOTOMY


def cmd_verify(args) -> int:
    try:
        doc = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report: {exc}") from exc
    report_dir = Path(args.report).parent
    profile_path = report_dir / doc["profile_csv_path"]
    r, u = read_profile_csv(profile_path)
    psec = doc["params"]
    params = Params(
        N=int(psec["N"]), alpha=psec["alpha"], p=psec["p"], q=psec["q"],
        mu=psec["mu"], lam=psec["lambda"],
    )
    grid = grid_from_nodes(params.N, r)
    field = RadialField(grid, u)

    from .functionals import breakdown, energy_of, nehari_of, pohozaev_of
    from .solver import half_mass_radius

    bd = breakdown(field, params)
    report = SolveReport(
        profile=field, params=params, breakdown=bd,
        J=energy_of(bd, params), P=pohozaev_of(bd, params), nehari=nehari_of(bd, params),
        residual_norm=doc["residual_norm"], iterations=doc["iterations"],
        linf=float(np.max(np.abs(u))), half_mass_radius=half_mass_radius(field),
        status=doc["status"],
    )
    verification = run_verification(report)
    _dump_json(verification.to_dict(), report_dir / "verification.json", sys.stdout)
    return EXIT_OK if verification.overall else EXIT_DICHOTOMY


def cmd_bubble(args) -> int:
    eps_list = [float(tok) for tok in args.eps.split(",") if tok]
    table = asymptotic_suite(args.N, args.alpha, args.p, args.q, eps_list, num_nodes=args.nodes)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eps", "a", "b", "c", "d", "resolved"])
        for (eps, a, b, c, d), res in zip(table.rows(), table.resolved):
            writer.writerow([repr(eps), repr(a), repr(b), repr(c), repr(d), res])
        fh.write(f"# fits: {json.dumps(table.fits, sort_keys=True)}\n")
    print(json.dumps(table.fits, sort_keys=True, indent=2))
    return EXIT_OK


def _random_smooth_field(grid: RadialGrid, rng: np.random.Generator) -> RadialField:
    width = rng.uniform(0.3, 2.0, size=3)
    center = rng.uniform(0.0, 3.0, size=3)
    weight = rng.uniform(0.1, 1.0, size=3)
    r = grid.nodes
    vals = sum(w * np.exp(-((r - c) ** 2) / (2 * s**2)) for w, c, s in zip(weight, center, width))
    return RadialField(grid, vals)


def cmd_hls_check(args) -> int:
    grid = build_grid(args.N, 20.0, args.nodes, scheme="graded")
    c_alpha = hls_constant(args.N, args.alpha)
    t = 2.0 * args.N / (args.N + args.alpha)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.pairs):
        u = _random_smooth_field(grid, rng)
        v = _random_smooth_field(grid, rng)
        ratio = hls_bilinear(u, v, args.alpha) / (lp_norm(u, t) * lp_norm(v, t))
        worst = max(worst, ratio / c_alpha)
    extremal = RadialField(grid, (1.0 + grid.nodes**2) ** (-(args.N + args.alpha) / 2.0))
    achieved = hls_bilinear(extremal, extremal, args.alpha) / (
        lp_norm(extremal, t) ** 2 * c_alpha
    )
    result = {
        "C_alpha": c_alpha,
        "worst_ratio_fraction": worst,
        "extremal_fraction": achieved,
        "bound_holds": worst <= 1.0 + 1e-3,
        "near_extremal": achieved >= 0.98,
    }
    _dump_json(result, Path(args.out) if args.out else None, sys.stdout)
    return EXIT_OK if result["bound_holds"] and result["near_extremal"] else EXIT_DICHOTOMY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choquard",
        description="Ground states and variational checks for Choquard equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="sharp constants for one (N, alpha)")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_constants)

    p = sub.add_parser("solve", help="one ground-state solve from a config")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("continue", help="subcritical continuation run")
    p.add_argument("--config", required=True)
    p.add_argument("--target", choices=["p-upper", "p-lower", "q-upper", "double"], default=None)
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(fn=cmd_continue)

    p = sub.add_parser("threshold", help="energy-threshold margins for a critical case")
    p.add_argument("--config", required=True)
    p.add_argument("--case", choices=list(THRESHOLD_CASES), required=True)
    p.add_argument("--family", required=True, help="comma-separated eps or delta values")
    p.add_argument("--nodes", type=int, default=2048)
    p.set_defaults(fn=cmd_threshold)

    p = sub.add_parser("sweep", help="parameter sweep over (p, q, mu, lambda)")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify", help="verification suite on a stored report")
    p.add_argument("--report", required=True)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bubble", help="bubble asymptotics table")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--eps", required=True, help="comma-separated dyadic eps list")
    p.add_argument("--nodes", type=int, default=1024)
    p.add_argument("--out", default="bubble_table.csv")
    p.set_defaults(fn=cmd_bubble)

    p = sub.add_parser("hls-check", help="randomized HLS bound check")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--pairs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=512)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_hls_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InvalidParameterError, DegenerateFieldError, CaseMismatchError) as exc:
        _dump_json({"error": str(exc), "kind": type(exc).__name__}, None, sys.stderr)
        return EXIT_INVALID
    except ChoquardError as exc:
        _dump_json({"error": str(exc), "kind": type(exc).__name__}, None, sys.stderr)
        return EXIT_DICHOTOMY
    except OSError as exc:
        _dump_json({"error": str(exc), "kind": "io"}, None, sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
