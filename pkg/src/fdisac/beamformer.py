"""Beamformer update: majorization of the radar constraint plus ADMM.

With ``w = vec(W)`` the block reads

    minimize  w^H D1 w       s.t.  ||w||^2 <= P_BS,  w^H D2 w - 2Re{d3^H w} + c4_hat <= 0.

ADMM splits the two constraints over copies ``w`` (power ball) and ``f``
(radar set) tied by ``w = f`` with dual ``tau``.

Preconditioning
---------------
``D1`` is often badly conditioned (1e5 is common), and a fixed penalty
``upsilon`` then makes ADMM crawl along the flat directions. With
``precondition=True`` the iteration runs in ``y = S^{1/2} x`` where
``x = w / sqrt(P_BS)`` and ``S = (D1 + kappa_hat I) * metric_gain``, with
``kappa_hat`` a coarse estimate (times ``kappa_gain``) of the power-ball
multiplier. In ``y`` the Lagrangian Hessian is close to a multiple of the
identity. The ball turns into an ellipsoid, so both copy updates stay
single-constraint convex QCQPs.
"""

from dataclasses import dataclass, field

import numpy as np

from .coeffs import build_w_problem, unvec, vec
from .qcqp import BallQpKernel, InfeasibleError, QcqpKernel


@dataclass(frozen=True)
class AdmmConfig:
    upsilon: float = 1.0
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6
    max_iters: int = 200
    precondition: bool = True
    kappa_gain: float = 4.0
    metric_gain: float = 3.0
    mm_tol: float = 1e-6
    mm_max_iters: int = 30

    def __post_init__(self):
        if not self.upsilon > 0:
            raise ValueError("upsilon must be positive")
        if not (self.kappa_gain > 0 and self.metric_gain > 0):
            raise ValueError("kappa_gain and metric_gain must be positive")
        if self.max_iters < 1 or self.mm_max_iters < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass(frozen=True)
class ScaledWProblem:
    """Beamformer block in a linearly transformed variable ``y``.

    Original ``w = w_scale * (P @ y)``. Objective ``y^H D1 y``, radar
    constraint ``y^H D2 y - 2Re{d3^H y} + c4 <= 0``, power constraint
    ``y^H B y <= 1`` (``B = None`` means the plain ball ``||y||^2 <= radius``).
    """

    D1: np.ndarray
    D2: np.ndarray
    d3: np.ndarray
    c4: float
    w_scale: float
    obj_scale: float
    cons_scale: float
    P: np.ndarray = None
    P_inv: np.ndarray = None
    B: np.ndarray = None

    @classmethod
    def from_problem(cls, wp, precondition=True, kappa_gain=4.0, metric_gain=3.0):
        if not precondition:
            return cls(wp.D1, wp.D2, wp.d3, wp.c4_hat, 1.0, 1.0, 1.0)
        r = np.sqrt(wp.bs_power)
        s1 = float(np.linalg.eigvalsh(wp.D1)[-1]) * wp.bs_power
        s2 = float(np.linalg.eigvalsh(wp.D2)[-1]) * wp.bs_power
        if not s2 > 0:
            s2 = max(abs(wp.c4_hat), r * float(np.linalg.norm(wp.d3)))
        s1 = s1 if s1 > 0 else 1.0
        D1 = wp.bs_power * wp.D1 / s1
        D2 = wp.bs_power * wp.D2 / s2
        d3 = r * wp.d3 / s2
        c4 = wp.c4_hat / s2
        kappa = kappa_gain * ball_multiplier_estimate(D1, D2, d3, c4)
        lam, V = np.linalg.eigh(D1)
        d = metric_gain * (np.clip(lam, 0.0, None) + max(kappa, 1e-8 * max(lam[-1], 1e-300)))
        P = (V / np.sqrt(d)) @ V.conj().T
        P_inv = (V * np.sqrt(d)) @ V.conj().T
        B = P @ P
        return cls(P @ D1 @ P, P @ D2 @ P, P @ d3, c4, r, s1, s2, P, P_inv, 0.5 * (B + B.conj().T))

    @property
    def radius_sq(self):
        return 1.0 if self.w_scale != 1.0 else None

    def to_y(self, w):
        x = np.asarray(w, complex) / self.w_scale
        return x if self.P_inv is None else self.P_inv @ x

    def to_w(self, y):
        return self.w_scale * (y if self.P is None else self.P @ y)

    def objective(self, x):
        return float(np.real(np.vdot(x, self.D1 @ x)))

    def constraint(self, x):
        return float(np.real(np.vdot(x, self.D2 @ x)) - 2 * np.real(np.vdot(self.d3, x))) + self.c4

    def power(self, x):
        return float(np.real(np.vdot(x, x if self.B is None else self.B @ x)))


def ball_multiplier_estimate(D1, D2, d3, c4, radius_sq=1.0, steps=40):
    """Coarse power-ball multiplier of the beamformer block.

    For fixed ``kappa`` the minimizer of ``x^H (D1 + kappa I) x`` over the
    radar set has a norm that shrinks as ``kappa`` grows; a log-scale
    bisection finds where it meets the ball. Returns 0 when the ball is
    inactive or the estimate cannot be formed.
    """
    n = len(d3)
    top = float(np.linalg.eigvalsh(D1)[-1])
    floor = 1e-10 * max(top, 1e-300)
    zero = np.zeros(n)

    def norm_sq(kappa):
        x = QcqpKernel(D1 + kappa * np.eye(n), D2).solve_vectors(zero, d3, c4)
        return float(np.real(np.vdot(x, x)))

    try:
        if norm_sq(floor) <= radius_sq:
            return 0.0
        lo, hi = floor, max(top, floor)
        while norm_sq(hi) > radius_sq:
            lo, hi = hi, hi * 10.0
            if hi > 1e8 * max(top, 1e-300):
                return hi
        for _ in range(steps):
            mid = np.sqrt(lo * hi)
            if norm_sq(mid) > radius_sq:
                lo = mid
            else:
                hi = mid
            if hi <= lo * 1.01:
                break
        return hi
    except (InfeasibleError, ValueError, np.linalg.LinAlgError):
        return 0.0


def update_f(sp, w, tau, upsilon, tol=1e-10, kernel=None):
    """Radar-set copy: nearest point to ``w + tau/upsilon`` in the linearized set."""
    if kernel is None:
        kernel = QcqpKernel(np.eye(len(w)), sp.D2)
    return kernel.solve_vectors(tau / upsilon + w, sp.d3, sp.c4, tol=tol)


def update_w(sp, f, tau, upsilon, radius_sq, tol=1e-10, kernel=None):
    """Power copy: ridge step toward ``f`` restricted to the power set."""
    n = len(f)
    rhs = 0.5 * (upsilon * f - tau)
    if sp.B is not None:
        if kernel is None:
            kernel = QcqpKernel(sp.D1 + 0.5 * upsilon * np.eye(n), sp.B)
        return kernel.solve_vectors(rhs, np.zeros(n), -radius_sq, tol=tol)
    if kernel is None:
        kernel = BallQpKernel(sp.D1 + 0.5 * upsilon * np.eye(n))
    return kernel.solve(rhs, radius_sq, tol=tol)


def update_tau(tau, w, f, upsilon):
    return tau + upsilon * (w - f)


def _largest_step(a, b, c):
    """Largest t in [0, 1] with a t^2 + b t + c <= 0, given a >= 0 and c <= 0."""
    if a + b + c <= 0:
        return 1.0
    if a <= 0:
        return min(1.0, -c / b) if b > 0 else 1.0
    root = np.sqrt(max(b * b - 4 * a * c, 0.0))
    # Upper root without cancellation.
    r = 2 * c / (-b - root) if b >= 0 else (-b + root) / (2 * a)
    return float(np.clip(r, 0.0, 1.0))


def _pull_back(sp, x0, x, radius_sq):
    """Point ``x0 + t (x - x0)`` with the largest t keeping both constraints."""
    d = x - x0
    Bd = d if sp.B is None else sp.B @ d
    a = float(np.real(np.vdot(d, Bd)))
    b = 2 * float(np.real(np.vdot(x0, Bd)))
    t = _largest_step(a, b, min(sp.power(x0) - radius_sq, 0.0))
    Dd = sp.D2 @ d
    a = float(np.real(np.vdot(d, Dd)))
    b = 2 * float(np.real(np.vdot(x0, Dd))) - 2 * float(np.real(np.vdot(sp.d3, d)))
    t = min(t, _largest_step(a, b, min(sp.constraint(x0), 0.0)))
    # Back off by a hair so rounding cannot leave the point outside.
    return x0 + t * (1 - 1e-12) * d if t > 0 else None


@dataclass
class AdmmResult:
    w: np.ndarray
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)


def admm_solve(wp, w_init, cfg=AdmmConfig(), log=None):
    """Solve the linearized beamformer block by ADMM from `w_init`.

    Returns an :class:`AdmmResult` whose ``w`` is in original units. The
    power copy is returned when it also meets the radar surrogate.
    Otherwise both copies are pulled back toward `w_init` until feasible and
    the better one (or the best feasible iterate seen) is returned.
    """
    sp = ScaledWProblem.from_problem(wp, cfg.precondition, cfg.kappa_gain, cfg.metric_gain)
    radius_sq = 1.0 if cfg.precondition else wp.bs_power
    ups = cfg.upsilon
    x_init = sp.to_y(w_init)
    w = x_init.copy()
    f = w.copy()
    tau = np.zeros_like(w)
    # Stricter than the MM acceptance test; the pull-back supplies such points.
    feas_tol = 1e-10 * abs(sp.c4)
    n = len(w)
    f_kernel = QcqpKernel(np.eye(n), sp.D2)
    if sp.B is None:
        w_kernel = BallQpKernel(sp.D1 + 0.5 * ups * np.eye(n))
    else:
        w_kernel = QcqpKernel(sp.D1 + 0.5 * ups * np.eye(n), sp.B)

    def feasible(x):
        return sp.power(x) <= radius_sq * (1 + 1e-12) and sp.constraint(x) <= feas_tol

    best = x_init if feasible(x_init) else None
    best_val = sp.objective(x_init) if best is not None else np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        f_prev = f
        f = update_f(sp, w, tau, ups, kernel=f_kernel)
        w = update_w(sp, f, tau, ups, radius_sq, kernel=w_kernel)
        tau = update_tau(tau, w, f, ups)
        r_p = float(np.linalg.norm(w - f))
        r_d = float(np.linalg.norm(f - f_prev))
        if log is not None:
            log.append({"iter": it, "objective": sp.objective(w), "primal": r_p, "dual": r_d})
        for cand in (w, f):
            if feasible(cand):
                val = sp.objective(cand)
                if val < best_val:
                    best, best_val = cand.copy(), val
        if r_p <= cfg.tol_primal and r_d <= cfg.tol_dual:
            converged = True
            break
    if feasible(w):
        out = w
    else:
        out = best
        if best is not None:
            # Both sets are convex and contain the anchor, so the segment from
            # the anchor toward either copy stays feasible up to a computable step.
            for cand in (_pull_back(sp, x_init, w, radius_sq), _pull_back(sp, x_init, f, radius_sq)):
                if cand is not None and feasible(cand) and sp.objective(cand) < sp.objective(out):
                    out = cand
    if out is None:
        raise InfeasibleError("no feasible beamformer found from the anchor")
    return AdmmResult(sp.to_w(out), it, converged, log if log is not None else [])


@dataclass
class BeamformerResult:
    W: np.ndarray
    mm_iters: int
    admm_iters: list
    objective_trace: list


def optimize_beamformer(ch, dv, aux, cfg=AdmmConfig()):
    """MM loop over the radar-constraint linearization; each step solved by ADMM.

    A step is kept only if it lowers ``w^H D1 w`` and keeps the exact radar
    constraint; the loop stops on relative change ``cfg.mm_tol``.
    """
    w = vec(dv.w_beamformer)
    wp = build_w_problem(ch, dv, aux, w)
    nt = ch.n_tx
    if not np.any(wp.D1):
        return BeamformerResult(dv.w_beamformer.copy(), 0, [], [wp.objective(w)])
    obj = wp.objective(w)
    trace, admm_iters = [obj], []
    # Tighter than the caller's radar slack so accepted steps survive its guard.
    cons_tol = 1e-9 * (wp.c4 + float(np.real(np.vdot(w, wp.D3 @ w))))
    m = 0
    for m in range(1, cfg.mm_max_iters + 1):
        try:
            res = admm_solve(wp, w, cfg)
        except InfeasibleError:
            break
        admm_iters.append(res.iterations)
        w_new = res.w
        obj_new = wp.objective(w_new)
        if obj_new > obj or wp.constraint(w_new) > cons_tol:
            break
        change = abs(obj - obj_new) / max(abs(obj), 1e-300)
        w, obj = w_new, obj_new
        trace.append(obj)
        wp = wp.reanchor(w)
        if change < cfg.mm_tol:
            break
    return BeamformerResult(unvec(w, nt), m, admm_iters, trace)
