"""RIS phase optimization by penalty dual decomposition.

Two copies ``psi1`` (the echo's receive-side phases) and ``psi2`` (a
unit-modulus copy) are split off from ``phi``. The inner loop cycles
phi -> psi1 -> psi2 on the augmented Lagrangian

    f(phi, psi1) + ||phi - psi1||^2 / (2 rho) + ||phi - psi2||^2 / (2 rho)
                 + Re{l1^H (phi - psi1)} + Re{l2^H (phi - psi2)}

and the outer loop either ascends the duals or shrinks ``rho``.
The objective ``f`` is divided by its curvature at the start so that
``rho`` is dimensionless.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .coeffs import _quad, build_p2_coeffs, build_p5_coeffs, build_p7_coeffs, eval_p2_objective
from .metrics import sinr_radar
from .qcqp import InfeasibleError, QcqpKernel, find_root_monotone
from .validation import hermitian_part

# Relative shortfall of the radar SINR tolerated when accepting a new phi.
RADAR_SLACK = 1e-8


@dataclass(frozen=True)
class PddConfig:
    rho0: float = 1.0
    penalty_shrink_c: float = 0.85
    eta0: float = 0.1
    eta_decay: float = 0.7
    inner_tol: float = 1e-6
    inner_max_iters: int = 50
    outer_tol: float = 1e-6
    outer_max_iters: int = 120

    def __post_init__(self):
        if not self.rho0 > 0 or not self.eta0 > 0:
            raise ValueError("rho0 and eta0 must be positive")
        if not 0 < self.penalty_shrink_c < 1 or not 0 < self.eta_decay < 1:
            raise ValueError("penalty_shrink_c and eta_decay must lie in (0, 1)")
        if self.inner_max_iters < 1 or self.outer_max_iters < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class PddState:
    phi: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    rho: float
    eta: float

    @classmethod
    def start(cls, phi, cfg):
        phi = np.asarray(phi, complex)
        z = np.zeros_like(phi)
        return cls(phi.copy(), phi.copy(), phi.copy(), z, z.copy(), cfg.rho0, cfg.eta0)

    def residuals(self):
        return (float(np.max(np.abs(self.phi - self.psi1), initial=0.0)),
                float(np.max(np.abs(self.phi - self.psi2), initial=0.0)))


@dataclass
class PddResult:
    phi: np.ndarray
    state: PddState
    converged: bool
    outer_iters: int
    accepted: bool = True
    radar_filter: np.ndarray = None
    trace: list = field(default_factory=list)


def augmented_lagrangian(cs, state, scale=1.0):
    """AL value for the coefficient set `cs` at `state` (objective divided by `scale`)."""
    s = state
    val = eval_p2_objective(cs, s.phi, s.psi1) / scale
    d1, d2 = s.phi - s.psi1, s.phi - s.psi2
    val += (np.vdot(d1, d1).real + np.vdot(d2, d2).real) / (2 * s.rho)
    val += np.real(np.vdot(s.lambda1, d1) + np.vdot(s.lambda2, d2))
    return float(val)


def update_phi(c5, state, scale=1.0, tol=1e-10):
    """Minimize the AL over phi with the constraint majorized at ``c5.phi_anchor``."""
    s = state
    M = s.phi.size
    Q = c5.T1_hat / scale + np.eye(M) / s.rho
    q = c5.t1_hat / scale + (s.psi1 + s.psi2) / (2 * s.rho) - (s.lambda1 + s.lambda2) / 2
    return QcqpKernel(Q, c5.T0).solve_vectors(q, c5.t0_acute, c5.c2_acute, tol=tol)


def update_psi1(c7, state, scale=1.0, tol=1e-10):
    """Minimize the AL over psi1; the linearized constraint is affine."""
    s = state
    M = s.phi.size
    Q = c7.T1_10 / scale + np.eye(M) / (2 * s.rho)
    q = c7.t1_4 / scale + s.phi / (2 * s.rho) + s.lambda1 / 2
    return QcqpKernel(Q, np.zeros((M, M))).solve_vectors(q, c7.t0_acute, c7.c2_acute, tol=tol)


def update_psi2(phi, lambda2, rho):
    """Unit-modulus copy: entry-wise phase of ``phi + rho * lambda2``."""
    return np.exp(1j * np.angle(np.asarray(phi) + rho * np.asarray(lambda2)))


class PhiKernel:
    """Fast solver for the phi-update at a fixed penalty ``rho``.

    The phi-objective matrix is ``A + c U U^H`` with ``A = T1_0/scale + I/rho``
    fixed for the whole inner loop, ``U = conj(B)`` of rank ``Nt`` and
    ``c = s1/scale`` changing with psi1. One generalized eigendecomposition
    of ``(A, T0)`` per penalty value makes every inner solve O(M Nt^2) per
    trial multiplier via the Woodbury identity.
    """

    def __init__(self, cs, scale, rho):
        M = cs.n_ris
        self.cs, self.scale = cs, scale
        A = hermitian_part(cs.T1_0 / scale + np.eye(M) / rho)
        L = sla.cholesky(A, lower=True)
        Y = sla.solve_triangular(L, cs.T0, lower=True)
        lam, V = np.linalg.eigh(hermitian_part(sla.solve_triangular(L, Y.conj().T, lower=True)))
        self.lam = np.clip(lam, 0.0, None)
        self.T = sla.solve_triangular(L, V, lower=True, trans="C")
        self.TH = self.T.conj().T
        self.U = cs.B.conj()
        self.Ut = self.TH @ self.U
        self.UtH = self.Ut.conj().T

    def _solver(self, c, mu):
        """Return ``v -> (D + c Ut Ut^H)^{-1} v`` with ``D = 1 + mu lam``."""
        d = 1.0 + mu * self.lam
        if c == 0.0:
            return lambda v: v / d
        DU = self.Ut / d[:, None]
        small = self.UtH @ DU
        small[np.diag_indices_from(small)] += 1.0 / c
        inv = np.linalg.inv(small)

        def apply(v):
            w = v / d
            return w - DU @ (inv @ (self.UtH @ w))
        return apply

    def solve(self, state, tol=1e-10):
        cs, s = self.cs, state
        psi1 = s.psi1
        s1 = float(np.sum(cs.c_t * np.abs(cs.alpha_users(psi1)) ** 2))
        s0 = float(cs.c_r * abs(cs.alpha_radar(psi1)) ** 2)
        c = s1 / self.scale
        q = ((cs.t1_0 - s1 * cs.Bb3c) / self.scale + (s.psi1 + s.psi2) / (2 * s.rho)
             - (s.lambda1 + s.lambda2) / 2)
        lin = s0 * (self.U @ (self.U.conj().T @ s.phi))
        qc = cs.t0_0 + s0 * cs.Bb3c + lin
        qs = cs.c2_0 - s0 * cs.b3sq + float(np.real(np.vdot(s.phi, lin)))
        lam = self.lam
        z, zb = self.TH @ q, self.TH @ qc
        gscale = abs(qs) + float(np.linalg.norm(qc)) or 1.0

        def y_of(mu):
            return self._solver(c, mu)(z + mu * zb)

        def g(mu):
            y = y_of(mu)
            return (float(lam @ (y.real ** 2 + y.imag ** 2)) - 2.0 * float(np.real(np.vdot(zb, y))) + qs) / gscale

        if g(0.0) <= tol:
            return self.T @ y_of(0.0)
        lmax = float(lam[-1])
        if lmax <= 0.0:
            raise InfeasibleError("radar constraint has no curvature in phi")

        def dg(mu):
            apply = self._solver(c, mu)
            e = lam * apply(z + mu * zb) - zb
            return -2.0 * float(np.real(np.vdot(e, apply(e)))) / gscale

        hi = 1.0 / lmax
        while g(hi) > 0:
            hi *= 2.0
            if hi * lmax > 1e12:
                raise InfeasibleError("radar constraint cannot be met in the phi-update")
        mu = find_root_monotone(g, (0.0, hi), tol=tol, dg=dg)
        if g(mu) > tol:
            mu = hi
        return self.T @ y_of(mu)


def fast_update_psi1(cs, state, scale=1.0):
    """psi1-update through Woodbury: the objective matrix is ``I/(2 rho)`` plus rank K."""
    s = state
    sb = cs.beta_sq(s.phi)
    P = cs.b2.T                                   # (M, K)
    gk = sb * cs.c_t / scale                      # objective = a I + P diag(gk) P^H
    a = 1.0 / (2 * s.rho)
    small = np.diag(np.full(len(gk), a)) + (P.conj().T @ P) * gk[None, :]

    def qinv(v):
        return (v - P @ (gk * np.linalg.solve(small, P.conj().T @ v))) / a

    q = -sb * (P @ (cs.c_t * cs.b1.conj())) / scale + s.phi / (2 * s.rho) + s.lambda1 / 2
    x0 = qinv(q)
    # Linearized radar constraint, affine in psi1: -2Re{a^H psi} + c <= 0.
    sr = cs.c_r * sb
    lin = sr * cs.b02 * np.vdot(cs.b02, s.psi1)
    qa = sr * np.conj(cs.b01) * cs.b02 + lin
    qs = (_quad(cs.T0, cs.t0_0, cs.c2_0, s.phi) - sr * abs(cs.b01) ** 2
          + float(np.real(np.vdot(s.psi1, lin))))
    g0 = qs - 2.0 * float(np.real(np.vdot(qa, x0)))
    if g0 <= 1e-10 * (abs(qs) + float(np.linalg.norm(qa))):
        return x0
    xb = qinv(qa)
    slope = 2.0 * float(np.real(np.vdot(qa, xb)))
    if slope <= 0.0:
        raise InfeasibleError("linearized radar constraint is constant in psi1")
    return x0 + (g0 / slope) * xb


def pdd_outer_step(state, cfg):
    """Dual ascent when consensus is within ``eta``, otherwise shrink ``rho``."""
    r1, r2 = state.residuals()
    if max(r1, r2) <= state.eta:
        return replace(
            state,
            lambda1=state.lambda1 + (state.phi - state.psi1) / state.rho,
            lambda2=state.lambda2 + (state.phi - state.psi2) / state.rho,
            eta=state.eta * cfg.eta_decay,
        )
    return replace(state, rho=state.rho * cfg.penalty_shrink_c)


def objective_scale(cs, phi):
    """Largest curvature of the phi-objective at ``psi1 = phi``."""
    c5 = build_p5_coeffs(cs, phi, phi)
    lam = float(np.linalg.eigvalsh(c5.T1_hat)[-1])
    return lam


def run_pdd(cs, phi0, cfg=PddConfig(), scale=None, log=None):
    """Run the two-layer PDD loop from a feasible unit-modulus `phi0`.

    Returns ``(state, converged, outer_iters)``; `log` (a list) receives one
    dict per outer iteration.
    """
    state = PddState.start(phi0, cfg)
    if scale is None:
        scale = objective_scale(cs, state.phi)
    if not scale > 0:
        return state, True, 0
    converged = False
    kernel, kernel_rho = None, None
    it = 0
    for it in range(1, cfg.outer_max_iters + 1):
        al = augmented_lagrangian(cs, state, scale)
        if kernel is None or kernel_rho != state.rho:
            kernel, kernel_rho = PhiKernel(cs, scale, state.rho), state.rho
        n_inner = 0
        for n_inner in range(1, cfg.inner_max_iters + 1):
            try:
                state.phi = kernel.solve(state)
            except InfeasibleError:
                pass
            try:
                state.psi1 = fast_update_psi1(cs, state, scale)
            except InfeasibleError:
                pass
            state.psi2 = update_psi2(state.phi, state.lambda2, state.rho)
            al_new = augmented_lagrangian(cs, state, scale)
            done = abs(al - al_new) <= cfg.inner_tol * max(1.0, abs(al_new))
            al = al_new
            if done:
                break
        r1, r2 = state.residuals()
        if log is not None:
            log.append({"outer": it, "inner_iters": n_inner, "res_psi1": r1, "res_psi2": r2,
                        "al": al, "rho": state.rho, "eta": state.eta})
        if max(r1, r2) < cfg.outer_tol:
            converged = True
            break
        state = pdd_outer_step(state, cfg)
    return state, converged, it


def pdd_optimize_phase(ch, dv, aux, cfg=PddConfig(), coeffs=None, radar_repair=None):
    """Optimize the RIS phases at fixed W, powers, filters and auxiliaries.

    The final phi is projected onto the unit circle and accepted only if the
    surrogate objective does not get worse and the radar constraint still
    holds. `radar_repair`, if given, maps a candidate phi to a refreshed
    radar filter that is tried before rejecting on the radar constraint.
    """
    cs = build_p2_coeffs(ch, dv, aux) if coeffs is None else coeffs
    log = []
    if sinr_radar(ch, dv) < ch.radar_threshold * (1 - RADAR_SLACK):
        # The majorization chain needs a radar-feasible starting point.
        state = PddState.start(dv.phi, cfg)
        return PddResult(phi=dv.phi, state=state, converged=False, outer_iters=0,
                         accepted=False, radar_filter=dv.radar_filter, trace=log)
    state, converged, n_outer = run_pdd(cs, dv.phi, cfg, log=log)
    phi_new = np.exp(1j * np.angle(state.phi))
    result = PddResult(phi=dv.phi, state=state, converged=converged, outer_iters=n_outer,
                       accepted=False, radar_filter=dv.radar_filter, trace=log)
    f_old = eval_p2_objective(cs, dv.phi)
    f_new = eval_p2_objective(cs, phi_new)
    if f_new > f_old + 1e-12 * max(1.0, abs(f_old)):
        return result
    u0 = dv.radar_filter
    floor = ch.radar_threshold * (1 - RADAR_SLACK)
    if sinr_radar(ch, dv.copy(phi=phi_new)) < floor:
        if radar_repair is None:
            return result
        u0 = radar_repair(phi_new)
        if sinr_radar(ch, dv.copy(phi=phi_new, radar_filter=u0)) < floor:
            return result
    result.phi, result.radar_filter, result.accepted = phi_new, u0, True
    return result
