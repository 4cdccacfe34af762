"""KKT solvers for convex quadratic programs with one quadratic constraint.

Problem form::

    minimize    x^H Q x - 2 Re{q^H x} + q_s
    subject to  x^H Qc x - 2 Re{qc^H x} + qc_s <= 0

with ``Q`` positive definite and ``Qc`` positive semidefinite. Either the
unconstrained minimizer ``Q^{-1} q`` is feasible, or the optimum is
``(Q + s Qc)^{-1} (q + s qc)`` for the unique multiplier ``s > 0`` that puts
the constraint on its boundary.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .validation import hermitian_part


class InfeasibleError(ValueError):
    """Raised when a constraint set is empty (no point satisfies it)."""


@dataclass(frozen=True)
class QcqpProblem:
    q_matrix: np.ndarray
    q_vector: np.ndarray
    cons_matrix: np.ndarray
    cons_vector: np.ndarray
    cons_scalar: float
    q_scalar: float = 0.0

    def __post_init__(self):
        Q = np.asarray(self.q_matrix, complex)
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise ValueError("q_matrix must be square")
        for name, shape in (("q_vector", (n,)), ("cons_matrix", (n, n)), ("cons_vector", (n,))):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} must have shape {shape}")
        object.__setattr__(self, "q_matrix", hermitian_part(Q))
        object.__setattr__(self, "cons_matrix", hermitian_part(np.asarray(self.cons_matrix, complex)))
        object.__setattr__(self, "q_vector", np.asarray(self.q_vector, complex))
        object.__setattr__(self, "cons_vector", np.asarray(self.cons_vector, complex))
        object.__setattr__(self, "cons_scalar", float(self.cons_scalar))
        object.__setattr__(self, "q_scalar", float(self.q_scalar))

    @property
    def dim(self):
        return self.q_vector.shape[0]

    def objective(self, x):
        return float(np.real(np.vdot(x, self.q_matrix @ x)) - 2.0 * np.real(np.vdot(self.q_vector, x))
                     + self.q_scalar)

    def constraint(self, x):
        return float(np.real(np.vdot(x, self.cons_matrix @ x)) - 2.0 * np.real(np.vdot(self.cons_vector, x))
                     + self.cons_scalar)

    def constraint_scale(self):
        s = abs(self.cons_scalar) + float(np.linalg.norm(self.cons_vector))
        return s if s > 0 else 1.0

    @classmethod
    def ball(cls, D, d, radius_sq):
        n = len(d)
        return cls(D, d, np.eye(n), np.zeros(n), -float(radius_sq))


@dataclass(frozen=True)
class QcqpSolution:
    x: np.ndarray
    multiplier: float
    case: int
    iterations: int


def find_root_monotone(g, bracket, tol=1e-12, dg=None, xtol=1e-15, max_iter=500):
    """Root of a monotone scalar function by safeguarded Newton-bisection.

    A Newton step is kept only when it lands inside the current bracket and
    at least halves ``|g|``; otherwise the bracket is bisected.

    Parameters
    ----------
    g : callable
        Continuous, monotone on `bracket`.
    bracket : (float, float)
    tol : float
        Absolute tolerance on ``|g|``.
    dg : callable, optional
        Derivative of `g`, enables Newton steps.
    xtol : float
        Relative bracket width at which iteration stops.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    glo, ghi = g(lo), g(hi)
    if abs(glo) <= tol:
        return lo
    if abs(ghi) <= tol:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise ValueError(f"no sign change on [{lo:g}, {hi:g}]: g(lo)={glo:.6g}, g(hi)={ghi:.6g}")
    neg_at_lo = glo < 0
    x, gx = (lo, glo) if abs(glo) < abs(ghi) else (hi, ghi)
    for _ in range(max_iter):
        cand = None
        if dg is not None:
            d = dg(x)
            if d != 0 and np.isfinite(d):
                xn = x - gx / d
                if lo < xn < hi:
                    gn = g(xn)
                    if abs(gn) <= 0.5 * abs(gx):
                        cand = (xn, gn)
        if cand is None:
            xn = 0.5 * (lo + hi)
            cand = (xn, g(xn))
        x, gx = cand
        if abs(gx) <= tol:
            return x
        if (gx < 0) == neg_at_lo:
            lo = x
        else:
            hi = x
        if hi - lo <= xtol * max(1.0, abs(hi)):
            return x
    return x


def _cholesky(Q):
    try:
        return sla.cholesky(Q, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("q_matrix must be positive definite") from exc


class QcqpKernel:
    """Factorization of a fixed pair ``(Q, Qc)`` reused across right-hand sides.

    With ``Q = L L^H`` and ``L^{-1} Qc L^{-H} = V diag(lam) V^H`` the map
    ``x = T y``, ``T = L^{-H} V`` turns the objective into ``||y||^2`` and the
    constraint into ``sum lam |y|^2``. Building the kernel costs one Cholesky
    and one eigendecomposition; a solve is two matrix-vector products plus
    O(n) work per trial multiplier.
    """

    def __init__(self, q_matrix, cons_matrix):
        Q = hermitian_part(np.asarray(q_matrix, complex))
        Qc = hermitian_part(np.asarray(cons_matrix, complex))
        L = _cholesky(Q)
        self.affine = not np.any(Qc)
        if self.affine:
            self.lam = np.zeros(Q.shape[0])
            self.T = sla.solve_triangular(L, np.eye(Q.shape[0]), lower=True, trans="C")
        else:
            Y = sla.solve_triangular(L, Qc, lower=True)
            A = hermitian_part(sla.solve_triangular(L, Y.conj().T, lower=True))
            lam, V = np.linalg.eigh(A)
            self.lam = np.clip(lam, 0.0, None)
            self.T = sla.solve_triangular(L, V, lower=True, trans="C")
        self.TH = self.T.conj().T

    def solve(self, p, tol=1e-10, full_output=False):
        """Solve `p`, whose matrices must be the ones this kernel was built from."""
        return self.solve_vectors(p.q_vector, p.cons_vector, p.cons_scalar, tol, full_output)

    def solve_vectors(self, q, qc, qs, tol=1e-10, full_output=False):
        """Solve for the linear terms ``q``, ``qc`` and constant ``qs``."""
        lam = self.lam
        z = self.TH @ q
        zb = self.TH @ qc
        gscale = abs(qs) + float(np.linalg.norm(qc))
        gscale = gscale if gscale > 0 else 1.0

        def cons(y):
            return float(lam @ (y.real ** 2 + y.imag ** 2)) - 2.0 * float(np.real(np.vdot(zb, y))) + qs

        g0 = cons(z)
        if g0 <= tol * gscale:
            x = self.T @ z
            return QcqpSolution(x, 0.0, 1, 0) if full_output else x

        if self.affine:
            # Affine constraint: the boundary multiplier solves a linear equation.
            slope = 2.0 * float(np.real(np.vdot(zb, zb)))
            if slope <= 0.0:
                raise InfeasibleError(f"constant constraint {g0:.6g} > 0 cannot be satisfied")
            s = g0 / slope
            x = self.T @ (z + s * zb)
            return QcqpSolution(x, s, 2, 1) if full_output else x

        lmax = float(lam[-1]) if lam.size else 0.0
        if lmax <= 0.0:
            raise InfeasibleError("constraint has no curvature relative to the objective; "
                                  "cannot satisfy it")

        def y_of(s):
            return (z + s * zb) / (1.0 + s * lam)

        def g(sig):
            return cons(y_of(sig / lmax)) / gscale

        def dg(sig):
            s = sig / lmax
            r = zb - lam * y_of(s)
            return -2.0 * float(np.sum((r.real ** 2 + r.imag ** 2) / (1.0 + s * lam))) / (lmax * gscale)

        hi, n_double = 1.0, 0
        while g(hi) > 0:
            hi *= 2.0
            n_double += 1
            if hi > 1e12:
                raise InfeasibleError(
                    f"constraint stays positive for all multipliers (g={g(hi) * gscale:.6g} at s={hi / lmax:.3g})")
        sig = find_root_monotone(g, (0.0, hi), tol=tol, dg=dg)
        if g(sig) > tol:
            sig = hi
        s = sig / lmax
        x = self.T @ y_of(s)
        return QcqpSolution(x, s, 2, n_double) if full_output else x


def solve_qcqp(p, tol=1e-10, full_output=False):
    """Solve a :class:`QcqpProblem` through its KKT conditions.

    The multiplier search runs in the basis that diagonalizes ``Qc``
    relative to ``Q``, so each trial multiplier costs O(n).

    Returns
    -------
    x : ndarray, or :class:`QcqpSolution` when ``full_output`` is set.

    Raises
    ------
    InfeasibleError
        When no point satisfies the constraint.
    ValueError
        When ``Q`` is not positive definite.
    """
    return QcqpKernel(p.q_matrix, p.cons_matrix).solve(p, tol, full_output)


class BallQpKernel:
    """Eigendecomposition of a fixed ``D`` for repeated ball-constrained solves."""

    def __init__(self, D):
        D = hermitian_part(np.asarray(D, complex))
        self.lam, self.V = np.linalg.eigh(D)
        if self.lam[0] <= 0:
            raise ValueError("D must be positive definite")

    def solve(self, d, radius_sq, tol=1e-10, full_output=False):
        if radius_sq <= 0:
            raise ValueError("radius_sq must be positive")
        lam, V = self.lam, self.V
        c = V.conj().T @ np.asarray(d, complex)
        c2 = np.abs(c) ** 2
        if float(np.sum(c2 / lam ** 2)) <= radius_sq:
            x = V @ (c / lam)
            return QcqpSolution(x, 0.0, 1, 0) if full_output else x

        def g(k):
            return float(np.sum(c2 / (lam + k) ** 2)) / radius_sq - 1.0

        def dg(k):
            return -2.0 * float(np.sum(c2 / (lam + k) ** 3)) / radius_sq

        hi = float(np.sqrt(np.sum(c2) / radius_sq))
        kappa = find_root_monotone(g, (0.0, hi), tol=tol, dg=dg)
        x = V @ (c / (lam + kappa))
        nx = float(np.real(np.vdot(x, x)))
        if nx > radius_sq:
            x *= np.sqrt(radius_sq / nx)
        return QcqpSolution(x, kappa, 2, 0) if full_output else x


def solve_ball_qp(D, d, radius_sq, tol=1e-10, full_output=False):
    """Minimize ``x^H D x - 2Re{d^H x}`` over ``||x||^2 <= radius_sq``.

    ``D`` must be Hermitian positive definite.
    """
    if radius_sq <= 0:
        raise ValueError("radius_sq must be positive")
    return BallQpKernel(D).solve(d, radius_sq, tol, full_output)
