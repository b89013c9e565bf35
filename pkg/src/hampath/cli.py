"""Command-line front end: check, solve, sweep.

Exit codes are a contract: 0 success, 1 config fault, 2 hypothesis failure,
3 solver stall.  All file writes are whole-file atomic and rendered with 17
significant digits, so identical config and seed reproduce byte-identical
outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from hampath.conditions import run_checks
from hampath.config import ConfigError, ProblemConfig, load_config
from hampath.grid import interval_data
from hampath.regularize import InfConvolved, quad_perturb
from hampath.solver import SolveStatus, solve

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2
EXIT_STALLED = 3


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _trajectory_csv(path_grid) -> str:
    N = path_grid.N
    header = ",".join(["t"] + [f"p_{i+1}" for i in range(N)] + [f"q_{i+1}" for i in range(N)])
    rows = np.column_stack([path_grid.times, path_grid.p_nodes, path_grid.q_nodes])
    lines = [header] + [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _residual_csv(cert) -> str:
    lines = ["interval,fenchel_gap,inclusion_residual"]
    incl = cert.inclusion_residuals
    for k, gap in enumerate(cert.interior_residuals):
        iv = incl[k] if incl is not None else float("nan")
        lines.append(f"{k},{_fmt(gap)},{_fmt(iv)}")
    return "\n".join(lines) + "\n"


def _solve_report(result, cfg: ProblemConfig) -> str:
    spec = cfg.spec
    lines = ["hampath solve report", "=" * 20]
    lines.append(f"status: {result.status.value}")
    lines.append(f"mode: {type(spec.boundary).__name__}")
    lines.append(f"T: {_fmt(spec.T)}  N: {cfg.N}  M: {cfg.params.M}")
    lines.append(f"certified_hamiltonian: {result.certified_hamiltonian}")
    lines.append("")
    lines.append("certificate:")
    for ln in result.certificate.to_text().splitlines():
        lines.append("  " + ln)
    if result.certificate_true is not None and result.certificate_true is not result.certificate:
        lines.append("certificate_smoothing_removed:")
        for ln in result.certificate_true.to_text().splitlines():
            lines.append("  " + ln)
    elif result.certificate_true is None:
        lines.append("certificate_smoothing_removed: unavailable (conjugate has no closed form)")
    lines.append("")
    lines.append("stage_history:")
    for i, st in enumerate(result.stage_history):
        lines.append(
            f"  stage {i + 1}: eps={st.eps:g} lambda={st.lam:g} iters={st.iterations} "
            f"objective={_fmt(st.objective)} grad_norm={_fmt(st.grad_norm)} "
            f"action_true={_fmt(st.action_true)}"
        )
    lines.append("")
    lines.append("hypothesis_report:")
    if result.checks is None:
        lines.append("  skipped (no growth certificate in config)")
    else:
        for ln in result.checks.to_text().splitlines():
            lines.append("  " + ln)
    return "\n".join(lines) + "\n"


def cmd_check(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.spec.cert is None:
        print("config error: growth section required for check", file=sys.stderr)
        return EXIT_CONFIG
    report = run_checks(cfg.spec, seed=cfg.params.seed)
    print(report.to_text())
    return EXIT_OK if report.passed else EXIT_HYPOTHESIS


def _run_solve(cfg: ProblemConfig, seed=None, proceed=False):
    params = cfg.params if seed is None else replace(cfg.params, seed=seed)
    return solve(cfg.spec, params, proceed_on_check_failure=proceed, init=cfg.init_path)


def cmd_solve(args) -> int:
    if getattr(args, "verbose", False):
        import logging

        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    proceed = bool(cfg.output.get("proceed_on_check_failure", False))
    result = _run_solve(cfg, seed=args.seed, proceed=proceed)
    outdir = args.out or cfg.output.get("dir", ".")
    _atomic_write(os.path.join(outdir, "trajectory.csv"), _trajectory_csv(result.path))
    _atomic_write(os.path.join(outdir, "report.txt"), _solve_report(result, cfg))
    _atomic_write(os.path.join(outdir, "residuals.csv"), _residual_csv(result.certificate))
    print(_solve_report(result, cfg))
    if result.status is SolveStatus.HYPOTHESIS_FAILED:
        return EXIT_HYPOTHESIS
    if result.status is SolveStatus.STALLED:
        return EXIT_STALLED
    return EXIT_OK


def _sweep_value(cfg: ProblemConfig, param: str, value: float):
    """One sweep member; returns a row dict (never raises)."""
    try:
        spec, params = cfg.spec, cfg.params
        if param == "lambda":
            params = replace(params, lambda_schedule=(float(value),), eps_schedule=(),
                             polish=False)
        elif param == "eps":
            params = replace(params, eps_schedule=(float(value),), lambda_schedule=(),
                             polish=False)
        elif param == "M":
            params = replace(params, M=int(value))
        elif param == "T":
            spec = replace(spec, T=float(value))
        result = solve(spec, params)
        row = {
            "value": value,
            "status": result.status.value,
            "action": result.certificate.action_value,
            "max_fenchel_gap": float(np.max(result.certificate.interior_residuals)),
            "path": result.path,
        }
        iv = interval_data(result.path)
        row["max_slope_norm"] = float(
            np.max(np.linalg.norm(iv.dp, axis=1) + np.linalg.norm(iv.dq, axis=1)))
        if param == "lambda":
            row["max_prox_displacement"] = _max_displacement(spec, result.path, float(value),
                                                             params.r)
        return row
    except Exception as exc:  # sweep keeps going; the row records the failure
        return {"value": value, "status": f"error: {exc}", "action": float("nan")}


def _refinement_differences(rows):
    """Sup distance between consecutive solved paths, resampled in time.

    Successive differences of an order-2 discretization shrink at order 2,
    which is what an M sweep is meant to exhibit.
    """
    prev = None
    for row in rows:
        path = row.pop("path", None)
        row["refinement_sup_diff"] = float("nan")
        if path is None or not isinstance(row.get("status"), str) \
                or row["status"].startswith("error"):
            prev = None
            continue
        if prev is not None:
            t = path.times
            diffs = []
            for j in range(path.N):
                diffs.append(np.abs(path.p_nodes[:, j]
                                    - np.interp(t, prev.times, prev.p_nodes[:, j])).max())
                diffs.append(np.abs(path.q_nodes[:, j]
                                    - np.interp(t, prev.times, prev.q_nodes[:, j])).max())
            row["refinement_sup_diff"] = float(max(diffs))
        prev = path


def _max_displacement(spec, path, lam, r):
    """Largest |(p,q) - (i(p), j(q))| along the path midpoints."""
    H = spec.hamiltonian
    try:
        H.pair()
        hl = InfConvolved(H, lam, r)
    except Exception:
        hl = InfConvolved(quad_perturb(H, 1e-6), lam, r)
    iv = interval_data(path)
    worst = 0.0
    for k in range(iv.pbar.shape[0]):
        ip, jq = hl.attaining_points(iv.pbar[k], iv.qbar[k])
        disp = float(np.linalg.norm(iv.pbar[k] - ip) + np.linalg.norm(iv.qbar[k] - jq))
        worst = max(worst, disp)
    return worst


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.param not in ("lambda", "eps", "M", "T"):
        print(f"config error: unknown sweep parameter {args.param!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    except ValueError:
        print("config error: --values must be a comma-separated number list", file=sys.stderr)
        return EXIT_CONFIG
    if not values:
        print("config error: empty sweep value list", file=sys.stderr)
        return EXIT_CONFIG

    workers = int(os.environ.get("HAMPATH_WORKERS", "0")) or min(4, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda v: _sweep_value(cfg, args.param, v), values))
    _refinement_differences(rows)

    keys = ["value", "status", "action", "max_fenchel_gap", "max_slope_norm"]
    if args.param == "lambda":
        keys.append("max_prox_displacement")
    if args.param == "M":
        keys.append("refinement_sup_diff")
    lines = [",".join(keys)]
    for row in rows:
        cells = []
        for k in keys:
            v = row.get(k, "")
            cells.append(_fmt(v) if isinstance(v, (int, float)) and k != "status" else str(v))
        lines.append(",".join(cells))
    table = "\n".join(lines) + "\n"
    if args.out:
        _atomic_write(os.path.join(args.out, "sweep.csv"), table)
    print(table, end="")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hampath",
        description="check, solve and certify convex Hamiltonian boundary value problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="run the hypothesis checks from a config")
    p_check.add_argument("config")

    p_solve = sub.add_parser("solve", help="solve a problem and write artifacts")
    p_solve.add_argument("config")
    p_solve.add_argument("--out", default=None, help="output directory")
    p_solve.add_argument("--seed", type=int, default=None)
    p_solve.add_argument("-v", "--verbose", action="store_true",
                         help="log per-stage optimizer progress")

    p_sweep = sub.add_parser("sweep", help="re-solve across a parameter range")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, choices=["lambda", "eps", "M", "T"])
    p_sweep.add_argument("--values", required=True, help="comma-separated list")
    p_sweep.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    if args.command == "check":
        return cmd_check(args)
    if args.command == "solve":
        return cmd_solve(args)
    return cmd_sweep(args)


if __name__ == "__main__":
    sys.exit(main())
