"""Closed-form WMMSE auxiliaries and receive-filter updates."""

import numpy as np
import scipy.linalg as sla

from .coeffs import build_filter_problems
from .metrics import AuxState, received_powers, sinr_user
from .scenario import effective_radar_channel, effective_user_channel


def update_beta(ch, dv, k):
    """MMSE scaling of user `k` at its current filter."""
    users, radar, si, noise = received_powers(ch, dv, dv.user_filters[k])
    h = effective_user_channel(ch, dv.phi, k)
    total = users.sum() + radar + si + noise
    return complex(np.sqrt(dv.user_power[k]) * np.vdot(dv.user_filters[k], h) / total)


def update_omega(ch, dv, k):
    """MSE weight of user `k`: ``1 + SINR_k``."""
    return 1.0 + sinr_user(ch, dv, k)


def update_aux(ch, dv):
    beta = [update_beta(ch, dv, k) for k in range(ch.n_users)]
    omega = [update_omega(ch, dv, k) for k in range(ch.n_users)]
    return AuxState(np.array(beta), np.array(omega))


def update_user_filters(fp, previous=None):
    """Solve ``F_k u = h_tilde_k`` for each user.

    ``F_k`` is ``R`` times the weight ``omega |beta|^2``, so the solve runs on
    ``R`` (one factorization for all users) to stay well conditioned when a
    weight is tiny. A user with zero weight (no power) keeps `previous`.
    """
    K, nr = fp.h_tilde.shape
    out = np.empty((K, nr), complex)
    cho = sla.cho_factor(fp.R, lower=True)
    for k in range(K):
        if fp.weights[k] > 0:
            out[k] = sla.cho_solve(cho, fp.h_tilde[k]) / fp.weights[k]
        elif previous is not None and np.any(previous[k]):
            out[k] = previous[k]
        else:
            raise ValueError(f"user {k} has zero weight and no previous filter")
    return out


def mmse_filters(ch, dv):
    """Unweighted MMSE receivers ``R^{-1} h_k`` for every user."""
    aux = AuxState(np.ones(ch.n_users), np.ones(ch.n_users))
    R = build_filter_problems(ch, dv, aux).R
    H = np.array([effective_user_channel(ch, dv.phi, k) for k in range(ch.n_users)])
    return sla.solve(R, H.T, assume_a="pos").T


def radar_objective(fp, u):
    """Phase-I objective ``u^H E1 u - u^H E2 u`` (scale-dependent)."""
    return float(np.real(np.vdot(u, fp.E1 @ u) - np.vdot(u, fp.E2 @ u)))


def radar_ratio(fp, u):
    """``u^H E2 u / u^H E1 u``; at least one iff the radar constraint holds."""
    return float(np.real(np.vdot(u, fp.E2 @ u)) / np.real(np.vdot(u, fp.E1 @ u)))


def update_radar_filter(fp, u0_init, tol=1e-8, max_iters=100, full_output=False):
    """Majorization fixed point ``u <- E1^{-1} E2 u``, normalized each step.

    The iteration is a power method for the generalized pencil (E2, E1), so
    the ratio ``u^H E2 u / u^H E1 u`` (the radar SINR over its threshold)
    never decreases. The normalization is harmless: the SINR is invariant
    to the filter's scale.
    """
    u = np.asarray(u0_init, complex)
    nrm = np.linalg.norm(u)
    if nrm == 0:
        raise ValueError("u0_init must be nonzero")
    u = u / nrm
    cho = sla.cho_factor(fp.E1, lower=True)
    trace = [radar_ratio(fp, u)]
    for it in range(max_iters):
        v = sla.cho_solve(cho, fp.E2 @ u)
        nv = np.linalg.norm(v)
        if nv == 0:
            break
        v = v / nv
        # Align the global phase so the change measures direction only.
        ph = np.vdot(u, v)
        if ph != 0:
            v = v * np.conj(ph) / abs(ph)
        r = radar_ratio(fp, v)
        if r < trace[-1]:
            break
        change = np.linalg.norm(v - u)
        u = v
        trace.append(r)
        if change < tol:
            break
    return (u, trace) if full_output else u


def initial_radar_filter(ch, dv, fp):
    """``E1^{-1}`` applied to the dominant left singular vector of ``H W``."""
    HW = effective_radar_channel(ch, dv.phi) @ dv.w_beamformer
    if not np.any(HW):
        return sla.solve(fp.E1, ch.g_bs_rx_target + 0j, assume_a="pos")
    left = np.linalg.svd(HW)[0][:, 0]
    return sla.solve(fp.E1, left, assume_a="pos")
