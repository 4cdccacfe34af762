"""Coefficient bundles for every block subproblem.

Each builder turns a design point into the quadratic (or quartic) data a
subproblem solver consumes. Each bundle also evaluates its own form, so the
algebra can be checked against :mod:`fdisac.metrics`.

Conventions
-----------
* ``vec`` stacks columns, so ``vec(a b^T) = b kron a``.
* Quadratic forms are written ``x^H T x - 2 Re{t^H x} + c``.
* For the phase vector the radar echo factors as
  ``u^H H(phi, psi) W = alpha(psi) * beta(phi)^H`` with
  ``alpha(psi) = conj(b1) + b2^H psi`` and ``beta(phi) = b3 + B^H conj(phi)``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .scenario import effective_radar_channel, effective_si_channel, user_channels
from .validation import hermitian_part, repair_psd

# Dense quartic blocks are M^2 x M^2; refuse to materialize them beyond this.
DENSE_BLOCK_MAX_M = 24


def _quad(T, t, c, x):
    return float(np.real(np.vdot(x, T @ x)) - 2.0 * np.real(np.vdot(t, x)) + c)


@dataclass(frozen=True)
class _UserFactors:
    """Per-user pieces that do not depend on phi (filters, W, channels only)."""

    x: np.ndarray      # (K, K, M): x[k, i] = P_i^H u_k
    y: np.ndarray      # (K, K): y[k, i] = u_k^H h_BU,i
    r: np.ndarray      # (K, M): G_r u_k
    v: np.ndarray      # (K, Nt): row u_k^H H_s^H W
    S: np.ndarray      # (K, Nt, M): W^H G_t^H diag(r_k)
    b1: np.ndarray     # (K,): g_r^H u_k
    b2: np.ndarray     # (K, M): diag(conj g_RT) G_r u_k
    unorm: np.ndarray  # (K,): ||u_k||^2


def _factors(ch, W, U):
    U = np.atleast_2d(U)
    Gt, Gr = ch.g_bs_tx_ris, ch.g_bs_rx_ris
    r = U @ Gr.T                                            # G_r u_k as rows
    x = r[:, None, :] * ch.h_ris_user.conj()[None, :, :]    # P_i^H u_k
    y = U.conj() @ ch.h_bs_user.T
    v = U.conj() @ ch.h_self_interference.conj().T @ W
    GtW = Gt @ W                                            # (M, Nt)
    S = GtW.conj().T[None, :, :] * r[:, None, :]
    b1 = ch.g_bs_rx_target.conj() @ U.T                     # g_r^H u_k
    b2 = r * ch.g_ris_target.conj()[None, :]
    unorm = np.real(np.sum(U.conj() * U, axis=1))
    return _UserFactors(x=x, y=y, r=r, v=v, S=S, b1=b1, b2=b2, unorm=unorm)


def _nonradar_quadratic(f, weights, q, noise):
    """Quadratic data of ``sum_k weights_k * (interference + SI + noise)`` in phi.

    Linear terms from the desired-signal cross product are added by callers.
    """
    K, _, M = f.x.shape
    T = np.zeros((M, M), complex)
    t = np.zeros(M, complex)
    c = 0.0
    for k in range(K):
        wk = weights[k]
        if wk == 0.0:
            continue
        X = f.x[k] * np.sqrt(q)[:, None]                     # rows sqrt(q_i) P_i^H u_k
        S = f.S[k]
        T += wk * (X.T @ X.conj() + S.T @ S.conj())          # sum q x x^H + S^T S^*
        t -= wk * (f.x[k].T @ (q * f.y[k]) + S.T @ f.v[k])
        c += wk * (float(np.sum(q * np.abs(f.y[k]) ** 2)) + float(np.sum(np.abs(f.v[k]) ** 2))
                   + noise * f.unorm[k])
    return T, t, c


@dataclass(frozen=True)
class P2CoeffSet:
    """Quartic data of the phase subproblem.

    Objective: ``-sum_k Rtilde_k`` as a function of phi.
    Constraint: ``(interference + SI + noise at u_0) - SINR-scaled echo <= 0``.

    Intermediates keep the names of the factored form (``B``, ``b3``,
    ``b1``, ``b2``, ...). The dense quartic blocks ``T1_k`` / ``T0_k`` for
    k = 5..8 are built on first access only.
    """

    c_t: np.ndarray       # (K,) omega |beta|^2 sigma_t^2
    c_r: float            # sigma_t^2 / Gamma_r
    B: np.ndarray         # (M, Nt) diag(g_RT) G_t W
    b3: np.ndarray        # (Nt,) W^H g_t
    b1: np.ndarray        # (K,)
    b2: np.ndarray        # (K, M)
    b01: complex
    b02: np.ndarray       # (M,)
    T1_0: np.ndarray
    t1_0: np.ndarray
    c1_0: float
    T0: np.ndarray
    t0_0: np.ndarray
    c2_0: float
    users: _UserFactors
    radar: _UserFactors

    @property
    def n_ris(self):
        return self.B.shape[0]

    # ---- phi-only pieces of the echo -------------------------------------
    @cached_property
    def BBt(self):
        """``B^* B^T`` (Hermitian PSD)."""
        return hermitian_part(self.B.conj() @ self.B.T)

    @cached_property
    def Bb3c(self):
        """``B^* b3^*``."""
        return self.B.conj() @ self.b3.conj()

    @cached_property
    def b3sq(self):
        return float(np.real(np.vdot(self.b3, self.b3)))

    def beta_sq(self, phi):
        """``||b3 + B^H conj(phi)||^2``."""
        return float(np.sum(np.abs(self.b3 + self.B.conj().T @ phi.conj()) ** 2))

    def alpha_users(self, psi):
        return self.b1.conj() + self.b2.conj() @ psi

    def alpha_radar(self, psi):
        return np.conj(self.b01) + np.vdot(self.b02, psi)

    # ---- named blocks ----------------------------------------------------
    def _terms(self, side):
        if side == "obj":
            return zip(self.c_t, self.b1, self.b2)
        return [(self.c_r, self.b01, self.b02)]

    def _sum(self, side, fn):
        return sum(c * fn(b1, b2) for c, b1, b2 in self._terms(side))

    def _c(self, side):
        return self._sum(side, lambda b1, b2: abs(b1) ** 2 * self.b3sq)

    def _t1(self, side):
        return self._sum(side, lambda b1, b2: abs(b1) ** 2 * self.Bb3c)

    def _T1(self, side):
        return self._sum(side, lambda b1, b2: abs(b1) ** 2 * self.BBt)

    def _t2(self, side):
        return self._sum(side, lambda b1, b2: self.b3sq * np.conj(b1) * b2)

    def _T2(self, side):
        Bb3 = self.B @ self.b3
        return self._sum(side, lambda b1, b2: np.conj(b1) * np.outer(b2, Bb3))

    def _T4(self, side):
        return self._sum(side, lambda b1, b2: self.b3sq * np.outer(b2, b2.conj()))

    def _T5(self, side):
        Bb3c = (self.B @ self.b3).conj()
        return self._sum(side, lambda b1, b2: np.conj(b1) * np.outer(b2, Bb3c))

    def _dense(self, side, which):
        M = self.n_ris
        if M > DENSE_BLOCK_MAX_M:
            raise ValueError(f"dense quartic blocks are limited to M <= {DENSE_BLOCK_MAX_M} (got {M})")
        if which == 6:
            return self._sum(side, lambda b1, b2: np.kron(self.BBt, (np.conj(b1) * b2)[:, None]))
        if which == 7:
            return self._sum(side, lambda b1, b2: np.kron(self.Bb3c[:, None], np.outer(b2, b2.conj())))
        return self._sum(side, lambda b1, b2: np.kron(self.BBt, np.outer(b2, b2.conj())))

    # Objective side. Linear terms enter as -2Re{t^H phi}.
    c1_1 = property(lambda self: float(self._c("obj")))
    t1_1 = property(lambda self: -self._t1("obj"))
    T1_1 = property(lambda self: self._T1("obj"))
    t1_2 = property(lambda self: -self._t2("obj"))
    T1_2 = property(lambda self: self._T2("obj"))
    T1_3 = property(lambda self: self._T2("obj").conj().T)
    T1_4 = property(lambda self: self._T4("obj"))
    T1_5 = property(lambda self: self._T5("obj"))
    T1_6 = cached_property(lambda self: self._dense("obj", 6))
    T1_7 = cached_property(lambda self: self._dense("obj", 7))
    T1_8 = cached_property(lambda self: self._dense("obj", 8))

    # Constraint side: the echo is subtracted, so constants and linear terms flip.
    c2_1 = property(lambda self: -float(self._c("cons")))
    t0_1 = property(lambda self: self._t1("cons"))
    T0_1 = property(lambda self: self._T1("cons"))
    t0_2 = property(lambda self: self._t2("cons"))
    T0_2 = property(lambda self: self._T2("cons"))
    T0_3 = property(lambda self: self._T2("cons").conj().T)
    T0_4 = property(lambda self: self._T4("cons"))
    T0_5 = property(lambda self: self._T5("cons"))
    T0_6 = cached_property(lambda self: self._dense("cons", 6))
    T0_7 = cached_property(lambda self: self._dense("cons", 7))
    T0_8 = cached_property(lambda self: self._dense("cons", 8))

    @property
    def T1(self):
        """Quadratic (phi^H . phi) part of the objective."""
        return hermitian_part(self.T1_0 + self.T1_1 + self.T1_2 + self.T1_3 + self.T1_4)

    @property
    def t1(self):
        return self.t1_0 + self.t1_1 + self.t1_2

    @property
    def c1(self):
        return self.c1_0 + self.c1_1

    @property
    def T1_67(self):
        return self.T1_6 + self.T1_7

    @property
    def T0_00(self):
        """Quadratic part of the (subtracted) echo in the constraint."""
        return hermitian_part(self.T0_1 + self.T0_2 + self.T0_3 + self.T0_4)

    @property
    def t0(self):
        return self.t0_0 + self.t0_1 + self.t0_2

    @property
    def c2(self):
        return self.c2_0 + self.c2_1

    @property
    def T0_67(self):
        return self.T0_6 + self.T0_7


def build_p2_coeffs(ch, dv, aux):
    """Assemble the phase-subproblem coefficients at the current design point."""
    W, U, u0, q = dv.w_beamformer, dv.user_filters, dv.radar_filter, dv.user_power
    wb = aux.omega * np.abs(aux.beta) ** 2
    f = _factors(ch, W, U)
    f0 = _factors(ch, W, u0[None, :])

    T1_0, t1_0, c_nr = _nonradar_quadratic(f, wb, q, ch.noise_power)
    sq = np.sqrt(q)
    for k in range(ch.n_users):
        coef = aux.omega[k] * aux.beta[k] * sq[k]
        t1_0 = t1_0 + coef * f.x[k, k]
    const = np.sum(np.log(aux.omega) - aux.omega + 1.0
                   + 2.0 * np.real(aux.omega * aux.beta.conj() * sq * np.diag(f.y)))
    c1_0 = c_nr - float(const)

    T0, t0_0, c2_0 = _nonradar_quadratic(f0, np.ones(1), q, ch.noise_power)

    Gt = ch.g_bs_tx_ris
    B = ch.g_ris_target[:, None] * (Gt @ W)
    b3 = W.conj().T @ ch.g_bs_tx_target
    return P2CoeffSet(
        c_t=wb * ch.rcs_variance,
        c_r=ch.rcs_variance / ch.radar_threshold,
        B=B, b3=b3, b1=f.b1, b2=f.b2, b01=complex(f0.b1[0]), b02=f0.b2[0],
        T1_0=hermitian_part(T1_0), t1_0=t1_0, c1_0=float(c1_0),
        T0=hermitian_part(T0), t0_0=t0_0, c2_0=float(c2_0),
        users=f, radar=f0,
    )


def _echo_terms(cs, phi, psi, which):
    """``sum c |alpha(psi)|^2 ||beta(phi)||^2`` for objective or constraint side."""
    bsq = cs.beta_sq(phi)
    if which == 1:
        return float(np.sum(cs.c_t * np.abs(cs.alpha_users(psi)) ** 2)) * bsq
    return cs.c_r * abs(cs.alpha_radar(psi)) ** 2 * bsq


def eval_p2_objective(cs, phi, psi1=None, dense=False):
    """Objective ``-sum_k Rtilde_k`` at phi (radar receive side at `psi1`, default phi).

    ``dense=True`` evaluates the expanded quartic form through the named
    blocks instead of the factored route (small M only).
    """
    phi = np.asarray(phi, complex)
    if dense:
        if psi1 is not None:
            raise ValueError("dense evaluation needs psi1 = phi")
        return _dense_quartic(cs, phi, 1)
    psi1 = phi if psi1 is None else np.asarray(psi1, complex)
    return _quad(cs.T1_0, cs.t1_0, cs.c1_0, phi) + _echo_terms(cs, phi, psi1, 1)


def eval_p2_constraint(cs, phi, psi1=None, dense=False):
    """Radar constraint value; ``<= 0`` iff the radar SINR meets its threshold."""
    phi = np.asarray(phi, complex)
    if dense:
        if psi1 is not None:
            raise ValueError("dense evaluation needs psi1 = phi")
        return _dense_quartic(cs, phi, 0)
    psi1 = phi if psi1 is None else np.asarray(psi1, complex)
    return _quad(cs.T0, cs.t0_0, cs.c2_0, phi) - _echo_terms(cs, phi, psi1, 0)


def _dense_quartic(cs, phi, which):
    kr = np.kron(phi, phi)
    if which == 1:
        T, t, c = cs.T1, cs.t1, cs.c1
        T5, T67, T8 = cs.T1_5, cs.T1_67, cs.T1_8
        sign = 1.0
    else:
        T, t, c = cs.T0 - cs.T0_00, cs.t0, cs.c2
        T5, T67, T8 = cs.T0_5, cs.T0_67, cs.T0_8
        sign = -1.0
    val = _quad(T, t, c, phi)
    val += sign * 2.0 * np.real(np.vdot(phi, T5 @ phi.conj()) + np.vdot(kr, T67 @ phi))
    val += sign * np.real(np.vdot(kr, T8 @ kr))
    return float(val)


def direct_split_objective(ch, dv, aux, phi, psi1):
    """``-sum_k Rtilde_k`` evaluated from raw channels with the echo's
    receive side at `psi1` and everything else at `phi`."""
    h = user_channels(ch, phi)
    hw = effective_radar_channel(ch, phi, psi1) @ dv.w_beamformer
    gw = effective_si_channel(ch, phi) @ dv.w_beamformer
    q = dv.user_power
    total = 0.0
    for k in range(ch.n_users):
        u = dv.user_filters[k]
        tot = (np.sum(q * np.abs(h.conj() @ u) ** 2)
               + ch.rcs_variance * np.sum(np.abs(u.conj() @ hw) ** 2)
               + np.sum(np.abs(u.conj() @ gw) ** 2) + ch.noise_power * np.vdot(u, u).real)
        b, w = aux.beta[k], aux.omega[k]
        e = 1.0 - 2.0 * np.real(np.conj(b) * np.sqrt(q[k]) * np.vdot(u, h[k])) + abs(b) ** 2 * tot
        total -= np.log(w) - w * e + 1.0
    return float(total)


def direct_split_constraint(ch, dv, phi, psi1):
    """Radar constraint from raw channels with the echo's receive side at `psi1`."""
    h = user_channels(ch, phi)
    hw = effective_radar_channel(ch, phi, psi1) @ dv.w_beamformer
    gw = effective_si_channel(ch, phi) @ dv.w_beamformer
    u = dv.radar_filter
    interf = (np.sum(dv.user_power * np.abs(h.conj() @ u) ** 2)
              + np.sum(np.abs(u.conj() @ gw) ** 2) + ch.noise_power * np.vdot(u, u).real)
    echo = ch.rcs_variance * np.sum(np.abs(u.conj() @ hw) ** 2)
    return float(interf - echo / ch.radar_threshold)


# ---------------------------------------------------------------------------
# Phase update with psi1 fixed


@dataclass(frozen=True)
class P5CoeffSet:
    """Quadratic data of the phi-block with the echo receive side frozen.

    Objective ``phi^H T1_hat phi - 2Re{t1_hat^H phi} + c1_hat``; constraint
    ``phi^H T0 phi - 2Re{t0_hat^H phi} + c2_hat - phi^H T0_9 phi <= 0`` and its
    majorizer linearized at ``phi_anchor`` (``t0_acute``, ``c2_acute``).
    """

    s1: float
    s0: float
    T1_9: np.ndarray
    t1_3: np.ndarray
    c1_2: float
    T0_9: np.ndarray
    t0_3: np.ndarray
    c2_2: float
    T1_hat: np.ndarray
    t1_hat: np.ndarray
    c1_hat: float
    T0: np.ndarray
    t0_hat: np.ndarray
    c2_hat: float
    t0_acute: np.ndarray
    c2_acute: float
    phi_anchor: np.ndarray

    def objective(self, phi):
        return _quad(self.T1_hat, self.t1_hat, self.c1_hat, phi)

    def constraint(self, phi):
        return _quad(self.T0, self.t0_hat, self.c2_hat, phi) - float(np.real(np.vdot(phi, self.T0_9 @ phi)))

    def constraint_linearized(self, phi):
        return _quad(self.T0, self.t0_acute, self.c2_acute, phi)


def build_p5_coeffs(cs, psi1, phi_anchor):
    """Reduce the phase quartic to a quadratic in phi at fixed `psi1`."""
    psi1 = np.asarray(psi1, complex)
    phi_anchor = np.asarray(phi_anchor, complex)
    s1 = float(np.sum(cs.c_t * np.abs(cs.alpha_users(psi1)) ** 2))
    s0 = float(cs.c_r * abs(cs.alpha_radar(psi1)) ** 2)
    T1_9 = s1 * cs.BBt
    t1_3 = -s1 * cs.Bb3c
    c1_2 = s1 * cs.b3sq
    T0_9 = s0 * cs.BBt
    t0_3 = s0 * cs.Bb3c
    c2_2 = -s0 * cs.b3sq
    t0_hat = cs.t0_0 + t0_3
    c2_hat = cs.c2_0 + c2_2
    lin = T0_9 @ phi_anchor
    return P5CoeffSet(
        s1=s1, s0=s0, T1_9=T1_9, t1_3=t1_3, c1_2=c1_2, T0_9=T0_9, t0_3=t0_3, c2_2=c2_2,
        T1_hat=hermitian_part(cs.T1_0 + T1_9), t1_hat=cs.t1_0 + t1_3, c1_hat=cs.c1_0 + c1_2,
        T0=cs.T0, t0_hat=t0_hat, c2_hat=c2_hat,
        t0_acute=t0_hat + lin, c2_acute=c2_hat + float(np.real(np.vdot(phi_anchor, lin))),
        phi_anchor=phi_anchor,
    )


# ---------------------------------------------------------------------------
# Echo receive-side update with phi fixed


@dataclass(frozen=True)
class P7CoeffSet:
    """Quadratic data of the psi1-block at fixed phi.

    The constraint is concave in psi1; its linearization at ``psi_anchor``
    is affine: ``-2Re{t0_acute^H psi} + c2_acute <= 0``.
    """

    s: float
    T1_10: np.ndarray
    t1_4: np.ndarray
    c1_tilde: float
    T0_10: np.ndarray
    t0_4: np.ndarray
    c2_tilde: float
    t0_acute: np.ndarray
    c2_acute: float
    psi_anchor: np.ndarray

    def objective(self, psi):
        return _quad(self.T1_10, self.t1_4, self.c1_tilde, psi)

    def constraint(self, psi):
        return -2.0 * float(np.real(np.vdot(self.t0_4, psi))) + self.c2_tilde - float(
            np.real(np.vdot(psi, self.T0_10 @ psi)))

    def constraint_linearized(self, psi):
        return -2.0 * float(np.real(np.vdot(self.t0_acute, psi))) + self.c2_acute


def build_p7_coeffs(cs, phi, psi_anchor):
    """Reduce the phase quartic to a quadratic in psi1 at fixed `phi`."""
    phi = np.asarray(phi, complex)
    psi_anchor = np.asarray(psi_anchor, complex)
    s = cs.beta_sq(phi)
    T1_10 = hermitian_part(s * (cs.b2.T * cs.c_t) @ cs.b2.conj())
    t1_4 = -s * (cs.b2.T @ (cs.c_t * cs.b1.conj()))
    nonradar_obj = _quad(cs.T1_0, cs.t1_0, cs.c1_0, phi)
    c1_tilde = nonradar_obj + s * float(np.sum(cs.c_t * np.abs(cs.b1) ** 2))
    T0_10 = hermitian_part(cs.c_r * s * np.outer(cs.b02, cs.b02.conj()))
    t0_4 = cs.c_r * s * np.conj(cs.b01) * cs.b02
    c2_tilde = _quad(cs.T0, cs.t0_0, cs.c2_0, phi) - cs.c_r * s * abs(cs.b01) ** 2
    lin = T0_10 @ psi_anchor
    return P7CoeffSet(
        s=s, T1_10=T1_10, t1_4=t1_4, c1_tilde=float(c1_tilde), T0_10=T0_10, t0_4=t0_4,
        c2_tilde=float(c2_tilde), t0_acute=t0_4 + lin,
        c2_acute=float(c2_tilde + np.real(np.vdot(psi_anchor, lin))), psi_anchor=psi_anchor,
    )


# ---------------------------------------------------------------------------
# Beamformer


@dataclass(frozen=True)
class WProblemData:
    """Quadratic data of the beamformer block in ``w = vec(W)``.

    Objective ``w^H D1 w - c3``; exact constraint ``w^H D2 w + c4 - w^H D3 w
    <= 0``; linearized ``w^H D2 w - 2Re{d3^H w} + c4_hat <= 0``.
    """

    D1: np.ndarray
    D2: np.ndarray
    D3: np.ndarray
    c3: float
    c4: float
    d3: np.ndarray
    c4_hat: float
    bs_power: float
    n_tx: int

    def objective(self, w):
        return float(np.real(np.vdot(w, self.D1 @ w))) - self.c3

    def constraint(self, w):
        return float(np.real(np.vdot(w, self.D2 @ w) - np.vdot(w, self.D3 @ w))) + self.c4

    def constraint_linearized(self, w):
        return _quad(self.D2, self.d3, self.c4_hat, w)

    def reanchor(self, w_anchor):
        d3 = self.D3 @ w_anchor
        return WProblemData(self.D1, self.D2, self.D3, self.c3, self.c4, d3,
                            self.c4 + float(np.real(np.vdot(w_anchor, d3))), self.bs_power, self.n_tx)


def vec(W):
    return np.asarray(W).reshape(-1, order="F")


def unvec(w, n):
    return np.asarray(w).reshape((n, -1), order="F")


def build_w_problem(ch, dv, aux, w_anchor=None):
    """Beamformer-block data; the constraint is linearized at `w_anchor`
    (default: the current beamformer)."""
    nt = ch.n_tx
    H = effective_radar_channel(ch, dv.phi)
    G = effective_si_channel(ch, dv.phi)
    h = user_channels(ch, dv.phi)
    q = dv.user_power
    wb = aux.omega * np.abs(aux.beta) ** 2
    A1 = np.zeros((nt, nt), complex)
    c3 = 0.0
    for k in range(ch.n_users):
        u = dv.user_filters[k]
        hu = H.conj().T @ u
        gu = G.conj().T @ u
        A1 += wb[k] * (ch.rcs_variance * np.outer(hu, hu.conj()) + np.outer(gu, gu.conj()))
        c3 += (np.log(aux.omega[k]) - aux.omega[k] + 1.0
               + 2.0 * np.real(aux.omega[k] * np.conj(aux.beta[k]) * np.sqrt(q[k]) * np.vdot(u, h[k]))
               - wb[k] * (np.sum(q * np.abs(h.conj() @ u) ** 2) + ch.noise_power * np.vdot(u, u).real))
    u0 = dv.radar_filter
    g0 = G.conj().T @ u0
    h0 = H.conj().T @ u0
    eye = np.eye(nt)
    D1 = hermitian_part(np.kron(eye, A1))
    D2 = hermitian_part(np.kron(eye, np.outer(g0, g0.conj())))
    D3 = hermitian_part(np.kron(eye, ch.rcs_variance / ch.radar_threshold * np.outer(h0, h0.conj())))
    c4 = float(np.sum(q * np.abs(h.conj() @ u0) ** 2) + ch.noise_power * np.vdot(u0, u0).real)
    w0 = vec(dv.w_beamformer) if w_anchor is None else np.asarray(w_anchor, complex)
    d3 = D3 @ w0
    return WProblemData(D1, D2, D3, float(c3), c4, d3, c4 + float(np.real(np.vdot(w0, d3))),
                        ch.bs_power, nt)


# ---------------------------------------------------------------------------
# Power


@dataclass(frozen=True)
class PowerProblemData:
    """Power block in amplitudes ``p_k = sqrt(q_k)``.

    Minimize ``sum a p^2 + b p - c5`` subject to ``sum d p^2 <= c5_hat`` and
    ``0 <= p_k <= p_max_k``.
    """

    a: np.ndarray
    b: np.ndarray
    d: np.ndarray
    c5: float
    c5_hat: float
    p_max: np.ndarray

    def objective(self, p):
        p = np.asarray(p, float)
        return float(np.sum(self.a * p ** 2 + self.b * p) - self.c5)

    def constraint(self, p):
        p = np.asarray(p, float)
        return float(np.sum(self.d * p ** 2) - self.c5_hat)


def build_power_problem(ch, dv, aux):
    h = user_channels(ch, dv.phi)
    HW = effective_radar_channel(ch, dv.phi) @ dv.w_beamformer
    GW = effective_si_channel(ch, dv.phi) @ dv.w_beamformer
    U = dv.user_filters
    wb = aux.omega * np.abs(aux.beta) ** 2
    proj = np.abs(U.conj() @ h.T) ** 2                       # proj[j, k] = |u_j^H h_k|^2
    a = wb @ proj
    b = -2.0 * aux.omega * np.real(aux.beta.conj() * np.einsum("kn,kn->k", U.conj(), h))
    c5 = 0.0
    for k in range(ch.n_users):
        u = U[k]
        rest = (ch.rcs_variance * np.sum(np.abs(u.conj() @ HW) ** 2)
                + np.sum(np.abs(u.conj() @ GW) ** 2) + ch.noise_power * np.vdot(u, u).real)
        c5 += np.log(aux.omega[k]) - aux.omega[k] + 1.0 - wb[k] * rest
    u0 = dv.radar_filter
    d = np.abs(h.conj() @ u0) ** 2
    c5_hat = (ch.rcs_variance * np.sum(np.abs(u0.conj() @ HW) ** 2) / ch.radar_threshold
              - np.sum(np.abs(u0.conj() @ GW) ** 2) - ch.noise_power * np.vdot(u0, u0).real)
    return PowerProblemData(a=a, b=b, d=d, c5=float(c5), c5_hat=float(c5_hat),
                            p_max=np.sqrt(ch.user_powers))


# ---------------------------------------------------------------------------
# Filters


@dataclass(frozen=True)
class FilterProblemData:
    """User-filter blocks ``u^H F_k u - 2Re{u^H h_tilde_k}`` (minus ``c6``) and
    the radar-filter pair ``u^H E1 u - u^H E2 u <= 0``."""

    F: np.ndarray        # (K, Nr, Nr)
    h_tilde: np.ndarray  # (K, Nr)
    c6: float
    E1: np.ndarray
    E2: np.ndarray
    R: np.ndarray        # total received covariance at the user filters
    weights: np.ndarray  # (K,) omega |beta|^2

    def user_objective(self, k, u):
        return _quad(self.F[k], self.h_tilde[k], 0.0, u)


def build_filter_problems(ch, dv, aux):
    h = user_channels(ch, dv.phi)
    HW = effective_radar_channel(ch, dv.phi) @ dv.w_beamformer
    GW = effective_si_channel(ch, dv.phi) @ dv.w_beamformer
    q = dv.user_power
    users = (h.T * q) @ h.conj()
    echo = HW @ HW.conj().T
    si = GW @ GW.conj().T
    noise = ch.noise_power * np.eye(ch.n_rx)
    R = hermitian_part(users + ch.rcs_variance * echo + si + noise)
    wb = aux.omega * np.abs(aux.beta) ** 2
    F = wb[:, None, None] * R[None, :, :]
    h_tilde = (aux.omega * aux.beta.conj() * np.sqrt(q))[:, None] * h
    c6 = float(np.sum(np.log(aux.omega) - aux.omega + 1.0))
    E1 = hermitian_part(users + si + noise)
    E2 = repair_psd(ch.rcs_variance * echo / ch.radar_threshold, name="E2")
    return FilterProblemData(F=F, h_tilde=h_tilde, c6=c6, E1=E1, E2=E2, R=R, weights=wb)
