"""Two smoothing continuations for Hamiltonians.

``quad_perturb`` adds (eps/2)|x|^2, which makes the conjugate finite and
1/eps-Lipschitz-smooth (it becomes the Moreau envelope of the original
conjugate).  ``infconv`` replaces H by an infimal convolution with the
penalty |.|_s^s / (s lambda^s), s = r/(r-1) in (1, 2), whose conjugate has
the exact closed form  H* + (lambda^r / r) * sum |.|^r.
"""

from __future__ import annotations

import numpy as np

from hampath.convex import (
    ConjugateUnavailableError,
    ConvexFn,
    Hamiltonian,
    MoreauEnvelope,
    NotCoerciveError,
    PowerNorm,
    Quadratic,
    SubgradientResult,
    Sum,
    simplify_sum,
)
from hampath.rootfind import bracket_root, newton_bisect


class EpsPerturbed(Hamiltonian):
    """Hamiltonian plus (eps/2)|x|^2 on phase space."""

    def __init__(self, base: Hamiltonian, eps: float):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.base = base
        self.eps = float(eps)
        bump = Quadratic(eps * np.eye(base.dim), box=base.fn.box)
        fn = simplify_sum([base.fn, bump])
        super().__init__(fn, base.N)

    def pair(self):
        if self._pair is None:
            self._pair = self._build_pair()
        return self._pair

    def _build_pair(self):
        closed = self.fn.closed_conjugate()
        if closed is not None:
            return self.fn, closed
        fn_exc = None
        try:
            pp, dd = self.fn.conjugate_pair()
            if pp.smooth and dd.smooth:
                return pp, dd
        except (NotCoerciveError, ConjugateUnavailableError) as exc:
            fn_exc = exc
        # smooth the dual side instead: (f + eps/2 |.|^2)* is the Moreau
        # envelope of f*, which is differentiable even for sampled bases
        try:
            bp, bd = self.base.pair()
        except (NotCoerciveError, ConjugateUnavailableError):
            if fn_exc is not None:
                raise fn_exc from None
            raise
        bump = Quadratic(self.eps * np.eye(self.dim), box=bp.box)
        return simplify_sum([bp, bump]), MoreauEnvelope(bd, self.eps)

    def subgradient(self, xy) -> SubgradientResult:
        res = self.base.subgradient(xy)
        return SubgradientResult(res.value + self.eps * np.asarray(xy, dtype=float), res.is_unique)


def quad_perturb(H: Hamiltonian, eps: float) -> EpsPerturbed:
    return EpsPerturbed(H, eps)


class _InfConvFn(ConvexFn):
    """Primal side of the inf-convolution; evaluated by inner minimization."""

    smooth = True
    coercive = True

    def __init__(self, base_primal: ConvexFn, base_dual: ConvexFn, lam: float, r: float):
        super().__init__(base_primal.dim, base_primal.box)
        self.base_primal = base_primal
        self.base_dual = base_dual
        self.lam = float(lam)
        self.r = float(r)
        self.s = r / (r - 1.0)
        self.pieces = base_primal.scalar_pieces()
        self._memo_key = None
        self._memo_val = None

    def penalty(self, w):
        return np.sum(np.abs(w) ** self.s, axis=-1) / (self.s * self.lam**self.s)

    def penalty_d1(self, w):
        return np.sign(w) * np.abs(w) ** (self.s - 1.0) / self.lam**self.s

    def penalty_d2(self, w):
        with np.errstate(divide="ignore"):
            return (self.s - 1.0) * np.abs(w) ** (self.s - 2.0) / self.lam**self.s

    def minimizers(self, pts):
        """Attaining points u*(x) of the inner minimization, shape like pts."""
        key = pts.tobytes()
        if key == self._memo_key:
            return self._memo_val
        u = self._minimizers_separable(pts) if self.pieces is not None else self._minimizers_generic(pts)
        self._memo_key = key
        self._memo_val = u
        return u

    def _minimizers_separable(self, pts):
        u = np.empty_like(pts)
        for i, piece in enumerate(self.pieces):
            x = pts[:, i]

            def rho(v, piece=piece, x=x):
                return piece.d1(v) + self.penalty_d1(v - x)

            def rho_drho(v, piece=piece, x=x):
                return (piece.d1(v) + self.penalty_d1(v - x),
                        piece.d2(v) + self.penalty_d2(v - x))

            lo, hi = bracket_root(rho, x, init_width=1.0 + np.abs(x).max(initial=0.0))
            u[:, i] = newton_bisect(rho_drho, lo, hi, scale=1.0 + np.abs(piece.d1(x)))
        return u

    def _minimizers_generic(self, pts):
        from scipy.optimize import minimize

        out = np.empty_like(pts)
        lo = self.box.lo - 10.0 * self.lam
        hi = self.box.hi + 10.0 * self.lam
        bounds = list(zip(lo, hi))
        use_jac = self.base_primal.smooth
        for i, x in enumerate(pts):
            if use_jac:
                def obj(u, x=x):
                    w = u - x
                    val = self.base_primal.value(u) + self.penalty(w)
                    return val, self.base_primal.grad(u) + self.penalty_d1(w)
            else:
                def obj(u, x=x):
                    return self.base_primal.value(u) + self.penalty(u - x)
            res = minimize(obj, np.clip(x, lo, hi), jac=use_jac, method="L-BFGS-B",
                           bounds=bounds, options={"ftol": 1e-14, "gtol": 1e-11, "maxiter": 200})
            out[i] = res.x
        return out

    def _value(self, pts):
        u = self.minimizers(pts)
        return self.base_primal._value(u) + self.penalty(pts - u)

    def _grad(self, pts):
        u = self.minimizers(pts)
        return self.penalty_d1(pts - u)

    def closed_conjugate(self):
        power = PowerNorm(self.r, self.lam**self.r / self.r, dim=self.dim, box=self.base_dual.box)
        return Sum([self.base_dual, power])


class InfConvolved(Hamiltonian):
    """Inf-convolution of a coercive Hamiltonian with a power penalty."""

    def __init__(self, base: Hamiltonian, lam: float, r: float = 4.0):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        if r <= 2:
            raise ValueError("inf-convolution exponent must exceed 2")
        self.base = base
        self.lam = float(lam)
        self.r = float(r)
        self.s = r / (r - 1.0)
        bp, bd = base.pair()  # raises for non-coercive bases
        fn = _InfConvFn(bp, bd, lam, r)
        super().__init__(fn, base.N)

    def attaining_points(self, p, q):
        """Unique minimizers realizing the inf-convolution at (p, q)."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        q = np.atleast_1d(np.asarray(q, dtype=float))
        xy = np.concatenate([p, q])[None, :]
        u = self.fn.minimizers(xy)[0]
        return u[: self.N], u[self.N:]

    def attainment_residual(self, p, q) -> float:
        """|H_lam(p,q) - H(i_p,j_q) - penalty|; zero when the inner solve is exact."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        q = np.atleast_1d(np.asarray(q, dtype=float))
        xy = np.concatenate([p, q])
        ip, jq = self.attaining_points(p, q)
        u = np.concatenate([ip, jq])
        lhs = self.value(xy)
        rhs = self.fn.base_primal.value(u) + float(self.fn.penalty(xy - u))
        return abs(lhs - rhs)

    def subgradient(self, xy) -> SubgradientResult:
        return SubgradientResult(self.fn.grad(np.asarray(xy, dtype=float)), True)


def infconv(H: Hamiltonian, lam: float, r: float = 4.0) -> InfConvolved:
    return InfConvolved(H, lam, r)


def prox_points(Hl: InfConvolved, p, q):
    """The pair (i(p), j(q)) attaining the inf-convolution at (p, q)."""
    return Hl.attaining_points(p, q)
