"""Closed convex functions with conjugates, subgradients and proximal maps.

Every function carries a bounded working box: closed-form kinds evaluate
anywhere, but numerical conjugation, sampling checks and generic proximal
maps are confined to the box.  Conjugation of a non-coercive function is
refused; apply a quadratic perturbation first.

When a conjugate is only available numerically, ``conjugate_pair`` returns a
consistent primal/dual pair in which the primal is re-read through the same
piecewise-linear samples.  This keeps the Fenchel-Young inequality exact for
the pair, which downstream action assembly relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hampath.legendre import GridFn, discrete_conjugate
from hampath.rootfind import bracket_root, newton_bisect

AUTO_GRID_1D = 4001
AUTO_GRID_2D = 201


class NotCoerciveError(ValueError):
    """Conjugation refused: the function does not grow superlinearly."""


class ConjugateUnavailableError(ValueError):
    """No closed form and no feasible numerical fallback."""


class DomainError(ValueError):
    """Point outside the function's support (grid-backed kinds)."""


class ProxError(RuntimeError):
    """Inner minimization of a proximal map did not converge."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned working box."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or not np.all(hi > lo):
            raise ValueError("invalid box corners")

    @staticmethod
    def cube(dim: int, halfwidth: float = 10.0, center: float = 0.0) -> "Box":
        c = np.full(dim, float(center))
        w = np.full(dim, float(halfwidth))
        return Box(c - w, c + w)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(m, self.dim))

    def shell_sample(self, rng: np.random.Generator, m: int, inner: float = 0.8) -> np.ndarray:
        """Uniform samples on the outer shell (outside ``inner`` times the box)."""
        out = np.empty((m, self.dim))
        c = 0.5 * (self.lo + self.hi)
        k = 0
        while k < m:
            cand = rng.uniform(self.lo, self.hi, size=(4 * (m - k), self.dim))
            rel = np.max(np.abs(cand - c) / (0.5 * (self.hi - self.lo)), axis=1)
            keep = cand[rel >= inner]
            take = min(len(keep), m - k)
            out[k : k + take] = keep[:take]
            k += take
        return out


@dataclass(frozen=True)
class SubgradientResult:
    """An element of the subdifferential; minimal-norm at kinks."""

    value: np.ndarray
    is_unique: bool


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != dim:
        raise ValueError(f"expected last axis of size {dim}, got shape {x.shape}")
    lead = x.shape[:-1]
    return x.reshape(-1, dim), lead


class ConvexFn:
    """Base class; subclasses implement batched _value / _grad / _prox."""

    smooth = False
    coercive = False

    def __init__(self, dim: int, box: Box | None = None):
        self.dim = int(dim)
        self.box = box if box is not None else Box.cube(self.dim)
        self._conj_cache = None
        self._pair_cache = None

    # -- evaluation ----------------------------------------------------
    def value(self, x):
        pts, lead = _as_points(x, self.dim)
        v = self._value(pts)
        return float(v[0]) if lead == () else v.reshape(lead)

    __call__ = value

    def grad(self, x):
        if not self.smooth:
            raise ValueError(f"{type(self).__name__} is not smooth; use subgradient")
        pts, lead = _as_points(x, self.dim)
        g = self._grad(pts)
        return g[0] if lead == () else g.reshape(lead + (self.dim,))

    def subgradient(self, x) -> SubgradientResult:
        if self.smooth:
            return SubgradientResult(self.grad(np.asarray(x, dtype=float).reshape(self.dim)), True)
        raise NotImplementedError

    # -- conjugation ---------------------------------------------------
    def closed_conjugate(self):
        """Closed-form conjugate, or None when only numerics can produce one."""
        return None

    def conjugate(self) -> "ConvexFn":
        if self._conj_cache is None:
            c = self.closed_conjugate()
            if c is None:
                c = self._numeric_pair()[1]
            self._conj_cache = c
        return self._conj_cache

    def conjugate_pair(self):
        """Consistent (primal, dual) pair whose Fenchel-Young gap is exactly >= 0."""
        if self._pair_cache is None:
            c = self.closed_conjugate()
            self._pair_cache = (self, c) if c is not None else self._numeric_pair()
        return self._pair_cache

    def _numeric_pair(self):
        if not self.coercive:
            raise NotCoerciveError(
                f"{type(self).__name__} is not coercive, so its conjugate is infinite "
                "somewhere; add a quadratic perturbation before conjugating"
            )
        return _sampled_pair(self)

    # -- proximal map ----------------------------------------------------
    def prox(self, x, step):
        if step <= 0:
            raise ValueError("step must be positive")
        pts, lead = _as_points(x, self.dim)
        u = self._prox(pts, float(step))
        return u[0] if lead == () else u.reshape(lead + (self.dim,))

    def _prox(self, pts, step):
        return _prox_numeric(self, pts, step)

    # -- structure hooks ------------------------------------------------
    def scalar_pieces(self):
        """Per-coordinate 1-D functions when the kind is coordinatewise separable."""
        return None

    def d1(self, t):
        raise NotImplementedError

    def d2(self, t):
        raise NotImplementedError

    def _value(self, pts):
        raise NotImplementedError

    def _grad(self, pts):
        raise NotImplementedError


def _prox_numeric(f, pts, step, tol=1e-12, maxiter=500):
    from scipy.optimize import minimize

    out = np.empty_like(pts)
    bounds = list(zip(f.box.lo, f.box.hi))
    for i, x in enumerate(pts):
        def obj(u, x=x):
            return f.value(u) + np.sum((u - x) ** 2) / (2 * step)

        x0 = np.clip(x, f.box.lo, f.box.hi)
        res = minimize(obj, x0, method="L-BFGS-B", bounds=bounds,
                       options={"ftol": tol, "gtol": 1e-10, "maxiter": maxiter})
        if not res.success and res.fun > obj(x0):
            raise ProxError(f"prox inner minimization failed: {res.message}")
        out[i] = res.x
    return out


class Quadratic(ConvexFn):
    """f(x) = x' A x / 2 + b . x + c with A symmetric positive semidefinite."""

    smooth = True

    def __init__(self, A, b=None, c: float = 0.0, box: Box | None = None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        dim = A.shape[0]
        super().__init__(dim, box)
        if A.shape != (dim, dim) or not np.allclose(A, A.T, atol=1e-10):
            raise ValueError("A must be square symmetric")
        self.A = 0.5 * (A + A.T)
        self.b = np.zeros(dim) if b is None else np.asarray(b, dtype=float).reshape(dim)
        self.c = float(c)
        self._eigs = np.linalg.eigvalsh(self.A)
        if self._eigs.min() < -1e-10 * max(1.0, self._eigs.max()):
            raise ValueError("A must be positive semidefinite")

    @property
    def coercive(self):
        return bool(self._eigs.min() > 1e-12 * max(1.0, self._eigs.max()))

    def _value(self, pts):
        return 0.5 * np.einsum("mi,ij,mj->m", pts, self.A, pts) + pts @ self.b + self.c

    def _grad(self, pts):
        return pts @ self.A + self.b

    def closed_conjugate(self):
        if not self.coercive:
            return None
        Ainv = np.linalg.inv(self.A)
        bstar = -Ainv @ self.b
        cstar = 0.5 * self.b @ Ainv @ self.b - self.c
        return Quadratic(Ainv, bstar, cstar, box=self.box)

    def _numeric_pair(self):
        raise NotCoerciveError(
            "quadratic with singular curvature is not coercive; "
            "add a quadratic perturbation before conjugating"
        )

    def _prox(self, pts, step):
        M = np.eye(self.dim) + step * self.A
        return np.linalg.solve(M, (pts - step * self.b).T).T

    def scalar_pieces(self):
        if self.dim == 1:
            return [self]
        if not np.allclose(self.A, np.diag(np.diag(self.A)), atol=0.0):
            return None
        pieces = []
        for i in range(self.dim):
            c = self.c if i == 0 else 0.0
            pieces.append(Quadratic([[self.A[i, i]]], [self.b[i]], c,
                                    box=Box([self.box.lo[i]], [self.box.hi[i]])))
        return pieces

    def d1(self, t):
        assert self.dim == 1
        return self.A[0, 0] * t + self.b[0]

    def d2(self, t):
        assert self.dim == 1
        return np.full_like(np.asarray(t, dtype=float), self.A[0, 0])


def squared_norm(dim: int, weight: float = 0.5, center=None, box: Box | None = None) -> Quadratic:
    """weight * |x - center|^2 as a Quadratic."""
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float).reshape(dim)
    A = 2.0 * weight * np.eye(dim)
    return Quadratic(A, -2.0 * weight * c, weight * float(c @ c), box=box)


class PowerNorm(ConvexFn):
    """f(x) = scale * sum_i |x_i|^r with r > 1."""

    smooth = True
    coercive = True

    def __init__(self, r: float, scale: float = 1.0, dim: int = 1, box: Box | None = None):
        super().__init__(dim, box)
        if r <= 1:
            raise ValueError("exponent must exceed 1")
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.r = float(r)
        self.scale = float(scale)

    def _value(self, pts):
        return self.scale * np.sum(np.abs(pts) ** self.r, axis=-1)

    def _grad(self, pts):
        return self.scale * self.r * np.sign(pts) * np.abs(pts) ** (self.r - 1.0)

    def closed_conjugate(self):
        r, a = self.r, self.scale
        s = r / (r - 1.0)
        astar = (a * r) ** (1.0 - s) / s
        return PowerNorm(s, astar, dim=self.dim, box=self.box)

    def _prox(self, pts, step):
        a, r = self.scale, self.r
        flat = pts.ravel()

        def rho(u):
            return u - flat + step * a * r * np.sign(u) * np.abs(u) ** (r - 1.0)

        def rho_drho(u):
            with np.errstate(divide="ignore"):
                return rho(u), 1.0 + step * a * r * (r - 1.0) * np.abs(u) ** (r - 2.0)

        lo, hi = bracket_root(rho, np.zeros_like(flat), init_width=1.0 + np.abs(flat).max(initial=0.0))
        u = newton_bisect(rho_drho, lo, hi, scale=1.0 + np.abs(flat))
        return u.reshape(pts.shape)

    def scalar_pieces(self):
        if self.dim == 1:
            return [self]
        return [PowerNorm(self.r, self.scale, dim=1,
                          box=Box([self.box.lo[i]], [self.box.hi[i]]))
                for i in range(self.dim)]

    def d1(self, t):
        assert self.dim == 1
        t = np.asarray(t, dtype=float)
        return self.scale * self.r * np.sign(t) * np.abs(t) ** (self.r - 1.0)

    def d2(self, t):
        assert self.dim == 1
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return self.scale * self.r * (self.r - 1.0) * np.abs(t) ** (self.r - 2.0)


class Affine(ConvexFn):
    """f(x) = slope . x + offset."""

    smooth = True
    coercive = False

    def __init__(self, slope, offset: float = 0.0, box: Box | None = None):
        slope = np.atleast_1d(np.asarray(slope, dtype=float))
        super().__init__(slope.size, box)
        self.slope = slope
        self.offset = float(offset)

    def _value(self, pts):
        return pts @ self.slope + self.offset

    def _grad(self, pts):
        return np.broadcast_to(self.slope, pts.shape).copy()

    def _numeric_pair(self):
        raise NotCoerciveError(
            "an affine function conjugates to an indicator; "
            "add a quadratic perturbation before conjugating"
        )

    def _prox(self, pts, step):
        return pts - step * self.slope

    def scalar_pieces(self):
        if self.dim == 1:
            return [self]
        return [Affine([self.slope[i]], self.offset if i == 0 else 0.0,
                       box=Box([self.box.lo[i]], [self.box.hi[i]]))
                for i in range(self.dim)]

    def d1(self, t):
        assert self.dim == 1
        return np.full_like(np.asarray(t, dtype=float), self.slope[0])

    def d2(self, t):
        assert self.dim == 1
        return np.zeros_like(np.asarray(t, dtype=float))


class SeparableSum(ConvexFn):
    """f(x) = sum over blocks f_b(x_b) for a partition of the coordinates."""

    def __init__(self, parts, box: Box | None = None):
        parts = list(parts)
        if not parts:
            raise ValueError("need at least one part")
        dims = [p.dim for p in parts]
        if box is None:
            box = Box(np.concatenate([p.box.lo for p in parts]),
                      np.concatenate([p.box.hi for p in parts]))
        super().__init__(sum(dims), box)
        self.parts = parts
        ends = np.cumsum(dims)
        self.slices = [slice(e - d, e) for d, e in zip(dims, ends)]

    @property
    def smooth(self):
        return all(p.smooth for p in self.parts)

    @property
    def coercive(self):
        return all(p.coercive for p in self.parts)

    def _value(self, pts):
        return sum(p._value(pts[:, sl]) for p, sl in zip(self.parts, self.slices))

    def _grad(self, pts):
        g = np.empty_like(pts)
        for p, sl in zip(self.parts, self.slices):
            g[:, sl] = p._grad(pts[:, sl])
        return g

    def subgradient(self, x):
        x = np.asarray(x, dtype=float).reshape(self.dim)
        vals, uniq = [], True
        for p, sl in zip(self.parts, self.slices):
            res = p.subgradient(x[sl])
            vals.append(np.atleast_1d(res.value))
            uniq = uniq and res.is_unique
        return SubgradientResult(np.concatenate(vals), uniq)

    def closed_conjugate(self):
        conjs = [p.closed_conjugate() for p in self.parts]
        if any(c is None for c in conjs):
            return None
        return SeparableSum(conjs)

    def _numeric_pair(self):
        primals, duals = [], []
        for p in self.parts:
            pp, dd = p.conjugate_pair()
            primals.append(pp)
            duals.append(dd)
        return SeparableSum(primals), SeparableSum(duals)

    def _prox(self, pts, step):
        u = np.empty_like(pts)
        for p, sl in zip(self.parts, self.slices):
            u[:, sl] = p._prox(pts[:, sl], step)
        return u

    def scalar_pieces(self):
        pieces = []
        for p in self.parts:
            sp = p.scalar_pieces()
            if sp is None:
                return None
            pieces.extend(sp)
        return pieces


class Sum(ConvexFn):
    """Pointwise sum of convex functions on the same space."""

    def __init__(self, parts, box: Box | None = None):
        parts = list(parts)
        if not parts:
            raise ValueError("need at least one part")
        dim = parts[0].dim
        if any(p.dim != dim for p in parts):
            raise ValueError("all parts must share the same dimension")
        super().__init__(dim, box if box is not None else parts[0].box)
        self.parts = parts

    @property
    def smooth(self):
        return all(p.smooth for p in self.parts)

    @property
    def coercive(self):
        return any(p.coercive for p in self.parts)

    def _value(self, pts):
        return sum(p._value(pts) for p in self.parts)

    def _grad(self, pts):
        return sum(p._grad(pts) for p in self.parts)

    def subgradient(self, x):
        x = np.asarray(x, dtype=float).reshape(self.dim)
        total = np.zeros(self.dim)
        uniq = True
        for p in self.parts:
            res = p.subgradient(x)
            total += res.value
            uniq = uniq and res.is_unique
        return SubgradientResult(total, uniq)

    def closed_conjugate(self):
        merged = simplify_sum(self.parts, self.box)
        if isinstance(merged, Sum):
            return None
        return merged.closed_conjugate()

    def _numeric_pair(self):
        merged = simplify_sum(self.parts, self.box)
        if not isinstance(merged, Sum):
            return merged.conjugate_pair()
        if not merged.coercive:
            raise NotCoerciveError(
                "sum is not coercive; add a quadratic perturbation before conjugating"
            )
        pieces = merged.scalar_pieces()
        if pieces is not None:
            if all(p.smooth and _strictly_increasing_d1(p) for p in pieces):
                return merged, SeparableSum([ScalarConjugate(p) for p in pieces])
            pairs = [_sampled_pair_1d(piece) for piece in pieces]
            return (SeparableSum([p for p, _ in pairs]),
                    SeparableSum([d for _, d in pairs]))
        return _sampled_pair(merged)

    def _prox(self, pts, step):
        pieces = self.scalar_pieces()
        if pieces is None:
            return _prox_numeric(self, pts, step)
        u = np.empty_like(pts)
        for i, piece in enumerate(pieces):
            x = pts[:, i]

            def rho(v, piece=piece, x=x):
                return v - x + step * piece.d1(v)

            def rho_drho(v, piece=piece, x=x):
                return v - x + step * piece.d1(v), 1.0 + step * piece.d2(v)

            lo, hi = bracket_root(rho, x, init_width=1.0 + np.abs(x).max(initial=0.0))
            u[:, i] = newton_bisect(rho_drho, lo, hi, scale=1.0 + np.abs(x))
        return u

    def scalar_pieces(self):
        per_part = [p.scalar_pieces() for p in self.parts]
        if any(sp is None for sp in per_part):
            return None
        return [Sum([sp[i] for sp in per_part]) for i in range(self.dim)]

    def d1(self, t):
        assert self.dim == 1
        return sum(p.d1(t) for p in self.parts)

    def d2(self, t):
        assert self.dim == 1
        return sum(p.d2(t) for p in self.parts)


def simplify_sum(parts, box=None):
    """Fold quadratic and affine summands together; returns a single fn or a Sum."""
    flat = []
    for p in parts:
        if isinstance(p, Sum):
            flat.extend(p.parts)
        else:
            flat.append(p)
    dim = flat[0].dim
    A = np.zeros((dim, dim))
    b = np.zeros(dim)
    c = 0.0
    rest = []
    hit = False
    for p in flat:
        if isinstance(p, Quadratic):
            A += p.A
            b += p.b
            c += p.c
            hit = True
        elif isinstance(p, Affine):
            b += p.slope
            c += p.offset
            hit = True
        else:
            rest.append(p)
    box = box if box is not None else flat[0].box
    if hit:
        rest = [Quadratic(A, b, c, box=box)] + rest
    if len(rest) == 1:
        return rest[0]
    return Sum(rest, box=box)


class GridSampled(ConvexFn):
    """Function tabulated on a uniform grid, read by multilinear interpolation.

    Conjugation is always available and is exact for the piecewise-linear
    interpolant restricted to the grid box.
    """

    smooth = False
    coercive = True

    def __init__(self, grid: GridFn):
        super().__init__(grid.d, Box(grid.lo, grid.hi))
        self.grid = grid
        self._dual_of = None

    @classmethod
    def from_samples(cls, fn, lo, hi, counts):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.size == 1:
            x = np.linspace(lo[0], hi[0], counts if np.isscalar(counts) else counts[0])
            vals = np.array([fn(np.array([t])) for t in x]) if not _vectorizable(fn) else fn(x[:, None])
            return cls(GridFn(lo, hi, np.asarray(vals, dtype=float)))
        n1, n2 = (counts, counts) if np.isscalar(counts) else counts
        x1 = np.linspace(lo[0], hi[0], n1)
        x2 = np.linspace(lo[1], hi[1], n2)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        pts = np.column_stack([X1.ravel(), X2.ravel()])
        vals = fn(pts)
        return cls(GridFn(lo, hi, np.asarray(vals, dtype=float).reshape(n1, n2)))

    def to_csv(self, path) -> None:
        """Write a two-column CSV (1-D) or header+matrix CSV (2-D)."""
        g = self.grid
        with open(path, "w") as fh:
            if self.dim == 1:
                for x, v in zip(g.axis_nodes(0), g.values):
                    fh.write(f"{x:.17g},{v:.17g}\n")
                return
            fh.write("x," + ",".join(f"{y:.17g}" for y in g.axis_nodes(1)) + "\n")
            for i, x in enumerate(g.axis_nodes(0)):
                fh.write(",".join([f"{x:.17g}"]
                                  + [f"{v:.17g}" for v in g.values[i]]) + "\n")

    @classmethod
    def from_csv(cls, path):
        """Load a two-column CSV (1-D) or header+matrix CSV (2-D)."""
        with open(path) as fh:
            first = fh.readline()
        cells = [c.strip() for c in first.strip().split(",")]

        def _is_num(s):
            try:
                float(s)
                return True
            except ValueError:
                return False

        raw = np.genfromtxt(path, delimiter=",", dtype=float)
        if raw.ndim == 2 and raw.shape[1] == 2 and (_is_num(cells[0]) or len(cells) == 2):
            data = raw[~np.isnan(raw[:, 0])]
            x, v = data[:, 0], data[:, 1]
            dx = np.diff(x)
            if not np.allclose(dx, dx[0], rtol=1e-8, atol=1e-12):
                raise ValueError(f"{path}: grid nodes are not uniform")
            return cls(GridFn([x[0]], [x[-1]], v))
        # header row carries the second-axis nodes; each row starts with a first-axis node
        y = raw[0, 1:]
        x = raw[1:, 0]
        vals = raw[1:, 1:]
        for nodes in (x, y):
            d = np.diff(nodes)
            if not np.allclose(d, d[0], rtol=1e-8, atol=1e-12):
                raise ValueError(f"{path}: grid nodes are not uniform")
        return cls(GridFn([x[0], y[0]], [x[-1], y[-1]], vals))

    def _locate(self, pts):
        lo, hi = self.box.lo, self.box.hi
        eps = 1e-9 * (hi - lo)
        if np.any(pts < lo - eps) or np.any(pts > hi + eps):
            bad = pts[np.any((pts < lo - eps) | (pts > hi + eps), axis=1)][0]
            raise DomainError(f"point {bad} outside grid support [{lo}, {hi}]")
        return np.clip(pts, lo, hi)

    def _value(self, pts):
        pts = self._locate(pts)
        if self.dim == 1:
            x = self.grid.axis_nodes(0)
            return np.interp(pts[:, 0], x, self.grid.values)
        x1 = self.grid.axis_nodes(0)
        x2 = self.grid.axis_nodes(1)
        h1, h2 = self.grid.spacing(0), self.grid.spacing(1)
        i = np.clip(((pts[:, 0] - x1[0]) / h1).astype(int), 0, x1.size - 2)
        j = np.clip(((pts[:, 1] - x2[0]) / h2).astype(int), 0, x2.size - 2)
        t = (pts[:, 0] - x1[i]) / h1
        u = (pts[:, 1] - x2[j]) / h2
        V = self.grid.values
        return ((1 - t) * (1 - u) * V[i, j] + t * (1 - u) * V[i + 1, j]
                + (1 - t) * u * V[i, j + 1] + t * u * V[i + 1, j + 1])

    def conjugate(self):
        # box-restricted semantics: boundary argmaxes are exact here, so the
        # dual-box diagnostic of the raw transform is disabled
        if self._conj_cache is None:
            if self._dual_of is not None:
                src = self._dual_of.grid
                gf = discrete_conjugate(self.grid, dual_lo=src.lo, dual_hi=src.hi,
                                        dual_counts=src.counts, boundary_frac=1.0)
            else:
                gf = discrete_conjugate(self.grid, boundary_frac=1.0)
            out = GridSampled(gf)
            out._dual_of = self
            self._conj_cache = out
        return self._conj_cache

    def _numeric_pair(self):
        return self, self.conjugate()

    def subgradient(self, x):
        x = np.asarray(x, dtype=float).reshape(self.dim)
        conj = self.conjugate()
        if self.dim == 1:
            y = conj.grid.axis_nodes(0)
            scores = x[0] * y - conj.grid.values
            m = scores.max()
            ties = y[scores >= m - 1e-9 * (1.0 + abs(m))]
            g = ties[np.argmin(np.abs(ties))]
            spread = ties.max() - ties.min()
            return SubgradientResult(np.array([g]), bool(spread <= 2.5 * conj.grid.spacing(0)))
        y1 = conj.grid.axis_nodes(0)
        y2 = conj.grid.axis_nodes(1)
        Y1, Y2 = np.meshgrid(y1, y2, indexing="ij")
        scores = x[0] * Y1 + x[1] * Y2 - conj.grid.values
        m = scores.max()
        mask = scores >= m - 1e-9 * (1.0 + abs(m))
        cand = np.column_stack([Y1[mask], Y2[mask]])
        g = cand[np.argmin(np.sum(cand**2, axis=1))]
        spread = np.max(cand.max(axis=0) - cand.min(axis=0))
        h = max(conj.grid.spacing(0), conj.grid.spacing(1))
        return SubgradientResult(g, bool(spread <= 2.5 * h))

    def _prox(self, pts, step):
        if self.dim == 1:
            return self._prox_1d(pts, step)
        return _prox_numeric(self, pts, step)

    def _prox_1d(self, pts, step):
        x = self.grid.axis_nodes(0)
        v = self.grid.values
        slopes = np.diff(v) / np.diff(x)
        out = np.empty_like(pts)
        for k, p in enumerate(pts[:, 0]):
            # on each linear segment the minimizer is p - step*slope clipped in
            cand = np.clip(p - step * slopes, x[:-1], x[1:])
            vals = np.interp(cand, x, v) + (cand - p) ** 2 / (2 * step)
            best = np.argmin(vals)
            out[k, 0] = cand[best]
        return out


class ScalarConjugate(ConvexFn):
    """Exact conjugate of a smooth 1-D piece with strictly increasing derivative.

    Evaluated by inverting the derivative: at y the supremum is attained at
    u with piece.d1(u) = y, giving value u y - piece(u) and gradient u.  Any
    approximate u underestimates the sup, so paired Fenchel gaps stay
    nonnegative up to the root-finder tolerance.
    """

    smooth = True
    coercive = True

    def __init__(self, piece: ConvexFn):
        if piece.dim != 1:
            raise ValueError("scalar conjugates take 1-D pieces")
        super().__init__(1, piece.box)
        self.piece = piece

    def _argsup(self, y):
        piece = self.piece

        def rho(u):
            return piece.d1(u) - y

        def rho_drho(u):
            return piece.d1(u) - y, piece.d2(u)

        lo, hi = bracket_root(rho, np.zeros_like(y), init_width=1.0 + np.abs(y).max(initial=0.0))
        return newton_bisect(rho_drho, lo, hi, scale=1.0 + np.abs(y))

    def _value(self, pts):
        y = pts[:, 0]
        u = self._argsup(y)
        return u * y - self.piece.value(u[:, None])

    def _grad(self, pts):
        return self._argsup(pts[:, 0])[:, None]

    def closed_conjugate(self):
        return self.piece

    def _prox(self, pts, step):
        # Moreau decomposition through the piece's own proximal map
        inner = self.piece._prox(pts / step, 1.0 / step)
        return pts - step * inner


def _strictly_increasing_d1(piece: ConvexFn) -> bool:
    if isinstance(piece, Quadratic):
        return piece.dim == 1 and piece.A[0, 0] > 0
    if isinstance(piece, PowerNorm):
        return piece.dim == 1
    if isinstance(piece, Affine):
        return False
    if isinstance(piece, Sum):
        return piece.dim == 1 and all(
            isinstance(p, (Quadratic, PowerNorm, Affine)) for p in piece.parts
        ) and any(_strictly_increasing_d1(p) for p in piece.parts)
    return False


class MoreauEnvelope(ConvexFn):
    """Smoothed reading of ``inner``: min_u inner(u) + |u - x|^2 / (2 step).

    Always differentiable with a 1/step-Lipschitz gradient.
    """

    smooth = True

    def __init__(self, inner: ConvexFn, step: float):
        if step <= 0:
            raise ValueError("step must be positive")
        super().__init__(inner.dim, inner.box)
        self.inner = inner
        self.step = float(step)
        self._memo_key = None
        self._memo_val = None

    @property
    def coercive(self):
        return self.inner.coercive

    def _prox_memo(self, pts):
        key = pts.tobytes()
        if key != self._memo_key:
            self._memo_val = self.inner._prox(pts, self.step)
            self._memo_key = key
        return self._memo_val

    def _value(self, pts):
        p = self._prox_memo(pts)
        return self.inner._value(p) + np.sum((pts - p) ** 2, axis=-1) / (2 * self.step)

    def _grad(self, pts):
        p = self._prox_memo(pts)
        return (pts - p) / self.step

    def closed_conjugate(self):
        ic = self.inner.closed_conjugate()
        if ic is None:
            return None
        return simplify_sum([ic, Quadratic(self.step * np.eye(self.dim), box=ic.box)])

    def _numeric_pair(self):
        ip, idual = self.inner.conjugate_pair()
        dual = simplify_sum([idual, Quadratic(self.step * np.eye(self.dim), box=idual.box)])
        return MoreauEnvelope(ip, self.step), dual

    def _prox(self, pts, step):
        inner_p = self.inner._prox(pts, step + self.step)
        return pts + (step / (step + self.step)) * (inner_p - pts)


def _vectorizable(fn):
    return isinstance(fn, ConvexFn) or getattr(fn, "batched", False)


def _sampled_pair_1d(piece: ConvexFn):
    lo, hi = piece.box.lo[0], piece.box.hi[0]
    x = np.linspace(lo, hi, AUTO_GRID_1D)
    vals = piece.value(x[:, None])
    primal = GridSampled(GridFn([lo], [hi], vals))
    return primal, primal.conjugate()


def _sampled_pair(fn: ConvexFn):
    if fn.dim == 1:
        return _sampled_pair_1d(fn)
    if fn.dim > 2:
        raise ConjugateUnavailableError(
            f"no closed-form conjugate and grid fallback is limited to 2 dimensions "
            f"(got {fn.dim}); restructure the function as a separable sum"
        )
    primal = GridSampled.from_samples(fn, fn.box.lo, fn.box.hi, AUTO_GRID_2D)
    return primal, primal.conjugate()


def convexity_violation(fn: ConvexFn, rng: np.random.Generator, samples: int = 200) -> float:
    """Worst violation of the convexity inequality on random box segments."""
    x = fn.box.sample(rng, samples)
    y = fn.box.sample(rng, samples)
    t = rng.uniform(0.0, 1.0, size=samples)[:, None]
    mid = t * x + (1 - t) * y
    lhs = fn.value(mid)
    rhs = t[:, 0] * fn.value(x) + (1 - t[:, 0]) * fn.value(y)
    return float(np.max(lhs - rhs))


class Hamiltonian:
    """Convex function on phase space R^N x R^N, stored on stacked (p, q)."""

    def __init__(self, fn: ConvexFn, N: int):
        if fn.dim != 2 * N:
            raise ValueError(f"function dimension {fn.dim} does not match 2N = {2 * N}")
        self.fn = fn
        self.N = int(N)
        self._pair = None

    @property
    def dim(self):
        return 2 * self.N

    @staticmethod
    def join(p, q):
        return np.concatenate([np.atleast_1d(p), np.atleast_1d(q)], axis=-1)

    def split(self, xy):
        xy = np.asarray(xy, dtype=float)
        return xy[..., : self.N], xy[..., self.N :]

    def pair(self):
        """Consistent (primal, dual) Fenchel pair used by action assembly."""
        if self._pair is None:
            self._pair = self.fn.conjugate_pair()
        return self._pair

    def conjugate(self) -> ConvexFn:
        return self.pair()[1]

    def value(self, xy):
        return self.fn.value(xy)

    def grad(self, xy):
        return self.fn.grad(xy)

    def subgradient(self, xy) -> SubgradientResult:
        return self.fn.subgradient(xy)

    @property
    def smooth(self):
        return self.fn.smooth
