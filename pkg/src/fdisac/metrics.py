"""SINR, rate and WMMSE surrogate evaluation for a design point."""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .scenario import effective_radar_channel, effective_si_channel, user_channels
from .validation import as_complex_matrix, as_complex_vector


@dataclass
class DesignVariables:
    """Optimization state.

    Attributes
    ----------
    w_beamformer : ndarray, shape (Nt, Nt)
        Probing beamformer W.
    phi : ndarray, shape (M,)
        RIS reflection coefficients.
    user_power : ndarray, shape (K,)
        Uplink transmit powers q_k.
    user_filters : ndarray, shape (K, Nr)
        Row k is the receive filter u_k.
    radar_filter : ndarray, shape (Nr,)
        Radar receive filter u_0.
    """

    w_beamformer: np.ndarray
    phi: np.ndarray
    user_power: np.ndarray
    user_filters: np.ndarray
    radar_filter: np.ndarray

    def __post_init__(self):
        self.w_beamformer = as_complex_matrix(self.w_beamformer, name="w_beamformer")
        nt = self.w_beamformer.shape[0]
        if self.w_beamformer.shape != (nt, nt):
            raise ValueError("w_beamformer must be square")
        self.phi = as_complex_vector(self.phi, name="phi")
        self.user_power = np.asarray(self.user_power, dtype=float).reshape(-1)
        if np.any(self.user_power < 0) or not np.all(np.isfinite(self.user_power)):
            raise ValueError("user_power must be finite and non-negative")
        self.user_filters = as_complex_matrix(self.user_filters, name="user_filters")
        if self.user_filters.shape[0] != self.user_power.shape[0]:
            raise ValueError("user_filters needs one row per user")
        self.radar_filter = as_complex_vector(self.radar_filter, self.user_filters.shape[1], "radar_filter")

    def copy(self, **changes):
        fields = {f.name: np.array(getattr(self, f.name), copy=True) for f in dataclasses.fields(self)}
        fields.update(changes)
        return DesignVariables(**fields)

    def check_shapes(self, ch):
        if self.w_beamformer.shape != (ch.n_tx, ch.n_tx):
            raise ValueError(f"w_beamformer must be {ch.n_tx}x{ch.n_tx}")
        if self.phi.shape != (ch.n_ris,):
            raise ValueError(f"phi must have length {ch.n_ris}")
        if self.user_filters.shape != (ch.n_users, ch.n_rx):
            raise ValueError(f"user_filters must be {ch.n_users}x{ch.n_rx}")


@dataclass
class AuxState:
    """WMMSE auxiliaries: MMSE scalings ``beta`` and weights ``omega``."""

    beta: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.beta = as_complex_vector(self.beta, name="beta")
        self.omega = np.asarray(self.omega, dtype=float).reshape(-1)
        if self.omega.shape != self.beta.shape:
            raise ValueError("beta and omega must have the same length")
        if np.any(self.omega <= 0):
            raise ValueError("omega must be positive")


def _components(ch, dv):
    dv.check_shapes(ch)
    h = user_channels(ch, dv.phi)
    hw = effective_radar_channel(ch, dv.phi) @ dv.w_beamformer
    gw = effective_si_channel(ch, dv.phi) @ dv.w_beamformer
    return h, hw, gw


def received_powers(ch, dv, u):
    """Per-term received powers at filter `u`.

    Returns ``(user_terms, radar, si, noise)`` where ``user_terms[i] =
    q_i |u^H h_i|^2`` and the other three are scalars.
    """
    h, hw, gw = _components(ch, dv)
    return _powers(ch, dv, h, hw, gw, u)


def _powers(ch, dv, h, hw, gw, u):
    u = np.asarray(u, complex)
    user_terms = dv.user_power * np.abs(h.conj() @ u) ** 2
    radar = ch.rcs_variance * np.sum(np.abs(u.conj() @ hw) ** 2)
    si = np.sum(np.abs(u.conj() @ gw) ** 2)
    noise = ch.noise_power * np.real(np.vdot(u, u))
    return user_terms, radar, si, noise


def _check_filter(u, name):
    if not np.any(u):
        raise ValueError(f"{name} is identically zero")


def sinr_user(ch, dv, k):
    """Uplink SINR of user `k` after its receive filter."""
    u = dv.user_filters[k]
    _check_filter(u, f"user filter {k}")
    h, hw, gw = _components(ch, dv)
    users, radar, si, noise = _powers(ch, dv, h, hw, gw, u)
    return float(users[k] / (users.sum() - users[k] + radar + si + noise))


def sinr_users(ch, dv):
    h, hw, gw = _components(ch, dv)
    out = np.empty(ch.n_users)
    for k in range(ch.n_users):
        u = dv.user_filters[k]
        _check_filter(u, f"user filter {k}")
        users, radar, si, noise = _powers(ch, dv, h, hw, gw, u)
        out[k] = users[k] / (users.sum() - users[k] + radar + si + noise)
    return out


def sinr_radar(ch, dv):
    """Output SINR of the radar filter u_0."""
    u = dv.radar_filter
    _check_filter(u, "radar filter")
    h, hw, gw = _components(ch, dv)
    users, radar, si, noise = _powers(ch, dv, h, hw, gw, u)
    return float(radar / (users.sum() + si + noise))


def user_rates(ch, dv):
    return np.log1p(sinr_users(ch, dv))


def sum_rate(ch, dv):
    """Sum of natural-log achievable rates (nats/s/Hz)."""
    return float(np.sum(user_rates(ch, dv)))


def mse(ch, dv, aux, k):
    """MSE ``e_k`` of user `k` for scaling ``aux.beta[k]``."""
    u = dv.user_filters[k]
    h, hw, gw = _components(ch, dv)
    users, radar, si, noise = _powers(ch, dv, h, hw, gw, u)
    total = users.sum() + radar + si + noise
    b = aux.beta[k]
    cross = np.sqrt(dv.user_power[k]) * np.vdot(u, h[k])
    return float(1.0 - 2.0 * np.real(np.conj(b) * cross) + abs(b) ** 2 * total)


def surrogate_rate(ch, dv, aux, k):
    """Variational rate ``log(omega) - omega * e + 1``; never exceeds the true rate."""
    w = aux.omega[k]
    return float(np.log(w) - w * mse(ch, dv, aux, k) + 1.0)


def surrogate_sum_rate(ch, dv, aux):
    return float(sum(surrogate_rate(ch, dv, aux, k) for k in range(ch.n_users)))


def optimal_aux(ch, dv):
    """Closed-form maximizers (beta*, omega*) of the surrogate at `dv`."""
    h, hw, gw = _components(ch, dv)
    beta = np.zeros(ch.n_users, complex)
    omega = np.ones(ch.n_users)
    for k in range(ch.n_users):
        u = dv.user_filters[k]
        users, radar, si, noise = _powers(ch, dv, h, hw, gw, u)
        total = users.sum() + radar + si + noise
        beta[k] = np.sqrt(dv.user_power[k]) * np.vdot(u, h[k]) / total
        omega[k] = 1.0 + users[k] / (total - users[k])
    return AuxState(beta, omega)


def constraint_report(ch, dv, tol=1e-6):
    """Margins of every feasibility condition; positive margin means satisfied."""
    sr = sinr_radar(ch, dv)
    return {
        "power_bs": ch.bs_power - float(np.sum(np.abs(dv.w_beamformer) ** 2)),
        "power_users_min": float(np.min(dv.user_power)),
        "power_users_max": float(np.min(ch.user_powers - dv.user_power)),
        "unit_modulus": -float(np.max(np.abs(np.abs(dv.phi) - 1.0))) if dv.phi.size else 0.0,
        "radar": sr - ch.radar_threshold,
        "sinr_radar": sr,
    }


def is_feasible(ch, dv, tol=1e-6):
    """Check all constraints with relative tolerance `tol`."""
    m = constraint_report(ch, dv)
    return (
        m["power_bs"] >= -tol * ch.bs_power
        and m["power_users_min"] >= 0.0
        and np.all(dv.user_power <= ch.user_powers * (1 + tol))
        and m["unit_modulus"] >= -tol
        and m["sinr_radar"] >= ch.radar_threshold * (1 - tol)
    )
