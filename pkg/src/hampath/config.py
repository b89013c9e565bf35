"""Declarative problem configs: a single YAML file describes the whole run.

A config is a tree of key-value sections (problem, hamiltonian, boundary,
growth, solver, box, output).  Hamiltonians are sums of scalar multiples of
catalog primitives applied to p, to q, or to (p, q) jointly; schema faults
are reported with the path of the offending key.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from hampath.action import Cauchy, Connecting, ProblemSpec, SemiConvex
from hampath.conditions import GrowthCert
from hampath.convex import (
    Affine,
    Box,
    ConvexFn,
    GridSampled,
    Hamiltonian,
    PowerNorm,
    Quadratic,
    SeparableSum,
    simplify_sum,
    squared_norm,
)
from hampath.solver import SolveParams


class ConfigError(ValueError):
    """Schema fault; the message starts with the config path of the fault."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}", "missing required key")
    return d[key]


def _num(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(v).__name__}")
    return float(v)


def _posint(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
        raise ConfigError(path, f"expected a positive integer, got {v!r}")
    return v


def _vector(v, n: int, path: str) -> np.ndarray:
    if not isinstance(v, (list, tuple)) or len(v) != n:
        raise ConfigError(path, f"expected a list of {n} numbers")
    return np.array([_num(x, f"{path}[{i}]") for i, x in enumerate(v)])


@dataclass
class ProblemConfig:
    """Validated config with the objects it builds."""

    spec: ProblemSpec
    params: SolveParams
    N: int
    raw: dict = field(repr=False, default_factory=dict)
    output: dict = field(default_factory=dict)
    init_path: object = None


def load_config(path: str) -> ProblemConfig:
    if not os.path.exists(path):
        raise ConfigError(path, "config file does not exist")
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(path, f"not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(path, "top level must be a mapping")
    return build_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def build_config(raw: dict, base_dir: str = ".") -> ProblemConfig:
    prob = _req(raw, "problem", "")
    if not isinstance(prob, dict):
        raise ConfigError("problem", "must be a mapping")
    N = _posint(_req(prob, "N", "problem"), "problem.N")
    if N > 8:
        raise ConfigError("problem.N", "dimensions beyond 8 are out of scope")
    T = _num(_req(prob, "T", "problem"), "problem.T")
    if T <= 0:
        raise ConfigError("problem.T", "horizon must be positive")

    box_cfg = raw.get("box", {})
    halfwidth = _num(box_cfg.get("halfwidth", 10.0), "box.halfwidth")
    phase_box = Box.cube(2 * N, halfwidth)
    comp_box = Box.cube(N, halfwidth)

    ham = _build_hamiltonian(_req(raw, "hamiltonian", ""), N, phase_box, base_dir)
    boundary = _build_boundary(_req(raw, "boundary", ""), N, comp_box, base_dir)
    cert = _build_cert(raw.get("growth"), "growth")
    params = _build_params(raw.get("solver", {}), "solver")
    output = raw.get("output", {}) or {}
    init_path = None
    init_file = (raw.get("solver") or {}).get("init_file")
    if init_file is not None:
        from hampath.grid import PathGrid

        full = init_file if os.path.isabs(init_file) else os.path.join(base_dir, init_file)
        if not os.path.exists(full):
            raise ConfigError("solver.init_file", f"referenced file does not exist: {full}")
        init_path = PathGrid.from_csv(full)
    spec = ProblemSpec(ham, T, boundary, cert)
    return ProblemConfig(spec=spec, params=params, N=N, raw=raw, output=output,
                         init_path=init_path)


def _build_fn(cfg, dim: int, box: Box, path: str, base_dir: str) -> ConvexFn:
    if not isinstance(cfg, dict):
        raise ConfigError(path, "expected a mapping describing a convex function")
    kind = _req(cfg, "kind", path)
    if kind == "quadratic":
        if "matrix" in cfg:
            A = np.array(cfg["matrix"], dtype=float)
            if A.shape != (dim, dim):
                raise ConfigError(f"{path}.matrix", f"must be {dim}x{dim}")
            b = _vector(cfg["shift"], dim, f"{path}.shift") if "shift" in cfg else None
            return Quadratic(A, b, _num(cfg.get("offset", 0.0), f"{path}.offset"), box=box)
        scale = _num(cfg.get("scale", 0.5), f"{path}.scale")
        if scale <= 0:
            raise ConfigError(f"{path}.scale", "must be positive")
        center = _vector(cfg["center"], dim, f"{path}.center") if "center" in cfg else None
        return squared_norm(dim, scale, center, box=box)
    if kind == "power":
        r = _num(_req(cfg, "r", path), f"{path}.r")
        scale = _num(cfg.get("scale", 1.0), f"{path}.scale")
        if r <= 1:
            raise ConfigError(f"{path}.r", "exponent must exceed 1")
        if scale <= 0:
            raise ConfigError(f"{path}.scale", "must be positive")
        return PowerNorm(r, scale, dim=dim, box=box)
    if kind == "affine":
        slope = _vector(_req(cfg, "slope", path), dim, f"{path}.slope")
        return Affine(slope, _num(cfg.get("offset", 0.0), f"{path}.offset"), box=box)
    if kind == "grid":
        file = _req(cfg, "file", path)
        full = file if os.path.isabs(file) else os.path.join(base_dir, file)
        if not os.path.exists(full):
            raise ConfigError(f"{path}.file", f"referenced file does not exist: {full}")
        fn = GridSampled.from_csv(full)
        if fn.dim != dim:
            raise ConfigError(f"{path}.file", f"grid dimension {fn.dim} does not match {dim}")
        return fn
    raise ConfigError(f"{path}.kind", f"unknown kind {kind!r}")


def _build_hamiltonian(cfg, N: int, phase_box: Box, base_dir: str) -> Hamiltonian:
    if not isinstance(cfg, dict):
        raise ConfigError("hamiltonian", "must be a mapping")
    comp_box = Box(phase_box.lo[:N], phase_box.hi[:N])
    if "grid" in cfg:
        fn = _build_fn({"kind": "grid", **cfg["grid"]}, 2 * N, phase_box, "hamiltonian.grid", base_dir)
        return Hamiltonian(fn, N)
    terms = _req(cfg, "terms", "hamiltonian")
    if not isinstance(terms, list) or not terms:
        raise ConfigError("hamiltonian.terms", "need a nonempty list of terms")
    p_parts, q_parts, joint_parts = [], [], []
    for i, term in enumerate(terms):
        path = f"hamiltonian.terms[{i}]"
        if not isinstance(term, dict):
            raise ConfigError(path, "expected a mapping")
        apply_to = term.get("apply", "both")
        spec = {k: v for k, v in term.items() if k != "apply"}
        if apply_to == "p":
            p_parts.append(_build_fn(spec, N, comp_box, path, base_dir))
        elif apply_to == "q":
            q_parts.append(_build_fn(spec, N, comp_box, path, base_dir))
        elif apply_to == "both":
            joint_parts.append(_build_fn(spec, 2 * N, phase_box, path, base_dir))
        else:
            raise ConfigError(f"{path}.apply", "must be one of p, q, both")
    zero = lambda: Quadratic(np.zeros((N, N)), box=comp_box)  # noqa: E731
    if p_parts or q_parts:
        p_fn = simplify_sum(p_parts) if p_parts else zero()
        q_fn = simplify_sum(q_parts) if q_parts else zero()
        split = SeparableSum([p_fn, q_fn], box=phase_box)
        joint_parts.append(split)
    fn = simplify_sum(joint_parts, box=phase_box) if len(joint_parts) > 1 else joint_parts[0]
    return Hamiltonian(fn, N)


def _build_boundary(cfg, N: int, comp_box: Box, base_dir: str):
    if not isinstance(cfg, dict):
        raise ConfigError("boundary", "must be a mapping")
    mode = _req(cfg, "mode", "boundary")
    if mode == "cauchy":
        p0 = _vector(_req(cfg, "p0", "boundary"), N, "boundary.p0")
        q0 = _vector(_req(cfg, "q0", "boundary"), N, "boundary.q0")
        return Cauchy(p0, q0)
    if mode == "connecting":
        psi1 = _build_fn(_req(cfg, "psi1", "boundary"), N, comp_box, "boundary.psi1", base_dir)
        psi2 = _build_fn(_req(cfg, "psi2", "boundary"), N, comp_box, "boundary.psi2", base_dir)
        idx = cfg.get("coercivity_index")
        if idx not in (1, 2):
            raise ConfigError("boundary.coercivity_index",
                              "connecting mode requires choosing which potential "
                              "carries the quadratic growth condition (1 or 2)")
        return Connecting(psi1, psi2, idx)
    if mode == "semiconvex":
        psi1 = _build_fn(_req(cfg, "psi1", "boundary"), N, comp_box, "boundary.psi1", base_dir)
        psi2 = _build_fn(_req(cfg, "psi2", "boundary"), N, comp_box, "boundary.psi2", base_dir)
        d1 = _num(_req(cfg, "delta1", "boundary"), "boundary.delta1")
        d2 = _num(_req(cfg, "delta2", "boundary"), "boundary.delta2")
        return SemiConvex(psi1, psi2, d1, d2)
    raise ConfigError("boundary.mode", f"unknown mode {mode!r}")


def _build_cert(cfg, path: str) -> GrowthCert | None:
    if cfg is None:
        return None
    if not isinstance(cfg, dict):
        raise ConfigError(path, "must be a mapping")
    try:
        return GrowthCert(
            alpha=_num(_req(cfg, "alpha", path), f"{path}.alpha"),
            beta=_num(_req(cfg, "beta", path), f"{path}.beta"),
            gamma=_num(_req(cfg, "gamma", path), f"{path}.gamma"),
            r=_num(cfg.get("r", 2.0), f"{path}.r"),
        )
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _build_params(cfg, path: str) -> SolveParams:
    if not isinstance(cfg, dict):
        raise ConfigError(path, "must be a mapping")
    kwargs = {}
    if "M" in cfg:
        kwargs["M"] = _posint(cfg["M"], f"{path}.M")
    for key in ("eps_schedule", "lambda_schedule"):
        if key in cfg:
            v = cfg[key]
            if v is None:
                v = []
            if not isinstance(v, list):
                raise ConfigError(f"{path}.{key}", "expected a list")
            kwargs[key] = tuple(_num(x, f"{path}.{key}[{i}]") for i, x in enumerate(v))
    for key in ("r", "tol_zero", "gtol"):
        if key in cfg:
            kwargs[key] = _num(cfg[key], f"{path}.{key}")
    if "max_iters" in cfg:
        kwargs["max_iters"] = _posint(cfg["max_iters"], f"{path}.max_iters")
    if "seed" in cfg:
        s = cfg["seed"]
        if isinstance(s, bool) or not isinstance(s, int):
            raise ConfigError(f"{path}.seed", "expected an integer")
        kwargs["seed"] = s
    try:
        return SolveParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc
