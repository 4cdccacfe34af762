"""Scenario geometry, steering vectors and channel realizations.

All quantities handed to the optimizers are linear-domain (watts, linear
gains). Decibel values live only in :class:`ScenarioConfig` and are
converted by its properties.
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .validation import as_complex_vector

DEFAULT_EXPONENTS = {
    "bs_user": 3.6,
    "bs_tx_ris": 2.7,
    "bs_rx_ris": 2.7,
    "ris_user": 2.4,
    "ris_target": 2.2,
    "bs_tx_target": 2.2,
    "target_bs_rx": 2.2,
}

DEFAULT_RICIAN_DB = {"bs_ris": 3.0, "si": 5.0}


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def _default_factorization(m):
    m1 = int(np.floor(np.sqrt(m)))
    while m % m1:
        m1 -= 1
    return m1, m // m1


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical and system constants for one scenario.

    Defaults reproduce the desk-scale version of the reference setup:
    BS at (0, 0, 5), RIS at (0, -50, 4), target in a box in front of the BS
    and users on a half disc around the RIS.
    """

    n_tx: int = 4
    n_rx: int = 4
    n_ris: int = 100
    ris_shape: Optional[tuple] = None
    n_users: int = 4
    antenna_spacing_ratio: float = 0.5
    bs_power_dbm: float = 30.0
    user_power_dbm: object = 0.0
    noise_dbm: float = -90.0
    radar_threshold_db: float = 5.0
    rcs_variance: float = 1.0
    si_path_loss_db: float = -110.0
    pathloss_ref_db: float = -20.0
    pathloss_exponents: dict = field(default_factory=lambda: dict(DEFAULT_EXPONENTS))
    rician_k_db: dict = field(default_factory=lambda: dict(DEFAULT_RICIAN_DB))
    bs_position: tuple = (0.0, 0.0, 5.0)
    ris_position: tuple = (0.0, -50.0, 4.0)
    target_box: tuple = ((-1.0, 1.0), (10.0, 40.0), (7.0, 10.0))
    user_radius: float = 10.0
    user_height: float = 1.5
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_ris", "n_users"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        m1, m2 = self.ris_factors
        if m1 * m2 != self.n_ris:
            raise ValueError(f"ris_shape {self.ris_shape} does not factor n_ris={self.n_ris}")
        exps = {**DEFAULT_EXPONENTS, **dict(self.pathloss_exponents)}
        for link, a in exps.items():
            if not 1.0 < float(a) < 6.0:
                raise ValueError(f"path-loss exponent for {link} must lie in (1, 6), got {a}")
        object.__setattr__(self, "pathloss_exponents", exps)
        object.__setattr__(self, "rician_k_db", {**DEFAULT_RICIAN_DB, **dict(self.rician_k_db)})
        powers = np.atleast_1d(np.asarray(self.user_power_dbm, dtype=float))
        if powers.size not in (1, self.n_users):
            raise ValueError("user_power_dbm must be a scalar or have one entry per user")
        scalars = [self.bs_power_dbm, self.noise_dbm, self.radar_threshold_db,
                   self.si_path_loss_db, self.pathloss_ref_db, self.rcs_variance]
        if not (np.all(np.isfinite(powers)) and np.all(np.isfinite(scalars))):
            raise ValueError("powers and gains must be finite")
        if self.rcs_variance <= 0:
            raise ValueError("rcs_variance must be positive")

    @property
    def ris_factors(self):
        if self.ris_shape is None:
            return _default_factorization(self.n_ris)
        m1, m2 = self.ris_shape
        return int(m1), int(m2)

    @property
    def bs_power(self):
        return float(dbm_to_watt(self.bs_power_dbm))

    @property
    def user_powers(self):
        p = np.atleast_1d(dbm_to_watt(self.user_power_dbm)).astype(float)
        return np.broadcast_to(p, (self.n_users,)).copy()

    @property
    def noise_power(self):
        return float(dbm_to_watt(self.noise_dbm))

    @property
    def radar_threshold(self):
        return float(db_to_linear(self.radar_threshold_db))

    @property
    def si_gain(self):
        return float(db_to_linear(self.si_path_loss_db))

    @property
    def pathloss_ref(self):
        return float(db_to_linear(self.pathloss_ref_db))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        for key in ("bs_position", "ris_position", "ris_shape"):
            if d[key] is not None:
                d[key] = list(d[key])
        d["target_box"] = [list(b) for b in self.target_box]
        if not np.isscalar(d["user_power_dbm"]):
            d["user_power_dbm"] = [float(p) for p in np.atleast_1d(d["user_power_dbm"])]
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario field(s): {', '.join(sorted(unknown))}")
        kwargs = dict(data)
        for key in ("bs_position", "ris_position", "ris_shape"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        if "target_box" in kwargs:
            kwargs["target_box"] = tuple(tuple(b) for b in kwargs["target_box"])
        if isinstance(kwargs.get("user_power_dbm"), list):
            kwargs["user_power_dbm"] = tuple(kwargs["user_power_dbm"])
        for name in _NUMERIC_FIELDS & set(kwargs):
            try:
                np.asarray(kwargs[name], dtype=float)
            except (TypeError, ValueError):
                raise ValueError(f"scenario field {name!r} must be numeric, got {kwargs[name]!r}") from None
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ValueError(f"malformed scenario config: {exc}") from exc


_NUMERIC_FIELDS = {
    "n_tx", "n_rx", "n_ris", "n_users", "antenna_spacing_ratio", "bs_power_dbm", "user_power_dbm",
    "noise_dbm", "radar_threshold_db", "rcs_variance", "si_path_loss_db", "pathloss_ref_db",
    "user_radius", "user_height", "rng_seed",
}


def load_config(path):
    """Read a YAML scenario file. Keys mirror :class:`ScenarioConfig` fields."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    data = data.get("scenario", data)
    return ScenarioConfig.from_dict(data)


def save_config(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump({"scenario": cfg.to_dict()}, fh, sort_keys=False)


@dataclass(frozen=True)
class ChannelSet:
    """One realization of every link plus the scalar constants the metrics need.

    Shapes: ``g_bs_tx_ris`` (M, Nt), ``g_bs_rx_ris`` (M, Nr), ``h_bs_user``
    (K, Nr), ``h_ris_user`` (K, M), ``g_ris_target`` (M,), ``g_bs_tx_target``
    (Nt,), ``g_bs_rx_target`` (Nr,), ``h_self_interference`` (Nt, Nr).
    """

    g_bs_tx_ris: np.ndarray
    g_bs_rx_ris: np.ndarray
    h_bs_user: np.ndarray
    h_ris_user: np.ndarray
    g_ris_target: np.ndarray
    g_bs_tx_target: np.ndarray
    g_bs_rx_target: np.ndarray
    h_self_interference: np.ndarray
    noise_power: float
    rcs_variance: float
    radar_threshold: float
    bs_power: float
    user_powers: np.ndarray
    fading_coeffs: dict = field(default_factory=dict)
    angles: dict = field(default_factory=dict)
    positions: dict = field(default_factory=dict)

    def __post_init__(self):
        m, nt = self.g_bs_tx_ris.shape
        nr = self.g_bs_rx_ris.shape[1]
        k = self.h_bs_user.shape[0]
        expected = {
            "g_bs_rx_ris": (m, nr),
            "h_bs_user": (k, nr),
            "h_ris_user": (k, m),
            "g_ris_target": (m,),
            "g_bs_tx_target": (nt,),
            "g_bs_rx_target": (nr,),
            "h_self_interference": (nt, nr),
            "user_powers": (k,),
        }
        for name, shape in expected.items():
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} must have shape {shape}, got {np.shape(getattr(self, name))}")
        for name in ("noise_power", "rcs_variance", "radar_threshold", "bs_power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def n_ris(self):
        return self.g_bs_tx_ris.shape[0]

    @property
    def n_tx(self):
        return self.g_bs_tx_ris.shape[1]

    @property
    def n_rx(self):
        return self.g_bs_rx_ris.shape[1]

    @property
    def n_users(self):
        return self.h_bs_user.shape[0]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def without_ris(self):
        """Zero every link that touches the RIS."""
        return self.replace(
            g_bs_tx_ris=np.zeros_like(self.g_bs_tx_ris),
            g_bs_rx_ris=np.zeros_like(self.g_bs_rx_ris),
            h_ris_user=np.zeros_like(self.h_ris_user),
            g_ris_target=np.zeros_like(self.g_ris_target),
        )


def steering_vector_ula(n, spacing_ratio, angle):
    """Uniform linear array response, ``exp(-j 2 pi d/lambda i sin(angle))``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    i = np.arange(n)
    return np.exp(-2j * np.pi * spacing_ratio * i * np.sin(angle))


def steering_vector_ris(m1, m2, spacing_ratio, elev, azim):
    """Planar RIS response: Kronecker product of the two axis responses."""
    if m1 < 1 or m2 < 1:
        raise ValueError("m1 and m2 must be >= 1")
    g1 = 0.5 * np.sin(elev) * np.cos(azim)
    g2 = 0.5 * np.cos(elev)
    a1 = np.exp(2j * np.pi * spacing_ratio * np.arange(m1) * g1)
    a2 = np.exp(2j * np.pi * spacing_ratio * np.arange(m2) * g2)
    return np.kron(a1, a2)


def path_loss(distance, exponent, ref_gain, ref_distance=1.0):
    """Large-scale power gain ``C0 (d/d0)^-alpha``."""
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError("propagation distance must be positive")
    return ref_gain * (distance / ref_distance) ** (-exponent)


def _unit(src, dst):
    d = np.asarray(dst, float) - np.asarray(src, float)
    n = np.linalg.norm(d)
    if n == 0.0:
        raise ValueError(f"positions {tuple(src)} and {tuple(dst)} coincide")
    return d / n, n


def _ula_angle(direction):
    # BS arrays lie along the x axis.
    return float(np.arcsin(np.clip(direction[0], -1.0, 1.0)))


def _ris_angles(direction):
    elev = float(np.arccos(np.clip(direction[2], -1.0, 1.0)))
    azim = float(np.arctan2(direction[1], direction[0]))
    return elev, azim


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rician(rng, los, kappa):
    if np.isinf(kappa):
        return los.astype(complex)
    return np.sqrt(kappa / (1 + kappa)) * los + np.sqrt(1 / (1 + kappa)) * _cn(rng, los.shape)


def sample_positions(cfg, rng):
    """Draw the target position and user positions for one realization."""
    box = np.asarray(cfg.target_box, float)
    target = rng.uniform(box[:, 0], box[:, 1])
    r = cfg.user_radius * np.sqrt(rng.uniform(0.0, 1.0, cfg.n_users))
    theta = rng.uniform(-np.pi / 2, np.pi / 2, cfg.n_users)
    cx, cy = cfg.ris_position[0], cfg.ris_position[1]
    users = np.column_stack(
        [cx + r * np.cos(theta), cy + r * np.sin(theta), np.full(cfg.n_users, cfg.user_height)]
    )
    return target, users


def generate_channels(cfg, seed=None):
    """Draw one :class:`ChannelSet` for `cfg`; a pure function of (cfg, seed)."""
    seed = cfg.rng_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    m, nt, nr, k = cfg.n_ris, cfg.n_tx, cfg.n_rx, cfg.n_users
    m1, m2 = cfg.ris_factors
    ratio = cfg.antenna_spacing_ratio
    c0 = cfg.pathloss_ref
    alpha = cfg.pathloss_exponents
    k_bs_ris = float(db_to_linear(cfg.rician_k_db["bs_ris"]))
    k_si = float(db_to_linear(cfg.rician_k_db["si"]))

    bs = np.asarray(cfg.bs_position, float)
    ris = np.asarray(cfg.ris_position, float)
    target, users = sample_positions(cfg, rng)

    dir_bt, d_bt = _unit(bs, target)
    dir_br, d_br = _unit(bs, ris)
    dir_rb, _ = _unit(ris, bs)
    dir_rt, d_rt = _unit(ris, target)
    theta_t = theta_r = _ula_angle(dir_bt)
    theta_bs_ris = _ula_angle(dir_br)
    elev_rb, azim_rb = _ris_angles(dir_rb)
    elev_rt, azim_rt = _ris_angles(dir_rt)

    a_t = steering_vector_ula(nt, ratio, theta_t)
    a_r = steering_vector_ula(nr, ratio, theta_r)
    a_rt = steering_vector_ris(m1, m2, ratio, elev_rt, azim_rt)
    phases = rng.uniform(0.0, 2 * np.pi, 3)
    alpha_t = np.sqrt(path_loss(d_bt, alpha["bs_tx_target"], c0)) * np.exp(1j * phases[0])
    alpha_r = np.sqrt(path_loss(d_bt, alpha["target_bs_rx"], c0)) * np.exp(1j * phases[1])
    alpha_rt = np.sqrt(path_loss(d_rt, alpha["ris_target"], c0)) * np.exp(1j * phases[2])

    a_ris_bs = steering_vector_ris(m1, m2, ratio, elev_rb, azim_rb)
    los_t = np.outer(a_ris_bs, steering_vector_ula(nt, ratio, theta_bs_ris).conj())
    los_r = np.outer(a_ris_bs, steering_vector_ula(nr, ratio, theta_bs_ris).conj())
    g_t_ris = np.sqrt(path_loss(d_br, alpha["bs_tx_ris"], c0)) * _rician(rng, los_t, k_bs_ris)
    g_r_ris = np.sqrt(path_loss(d_br, alpha["bs_rx_ris"], c0)) * _rician(rng, los_r, k_bs_ris)

    # Co-located TX/RX arrays side by side along x: end-fire LoS coupling.
    los_si = np.outer(steering_vector_ula(nt, ratio, np.pi / 2), steering_vector_ula(nr, ratio, np.pi / 2).conj())
    h_si = np.sqrt(cfg.si_gain) * _rician(rng, los_si, k_si)

    h_bu = np.empty((k, nr), complex)
    h_ru = np.empty((k, m), complex)
    for i, pos in enumerate(users):
        _, d_bu = _unit(bs, pos)
        _, d_ru = _unit(ris, pos)
        h_bu[i] = np.sqrt(path_loss(d_bu, alpha["bs_user"], c0)) * _cn(rng, nr)
        h_ru[i] = np.sqrt(path_loss(d_ru, alpha["ris_user"], c0)) * _cn(rng, m)

    return ChannelSet(
        g_bs_tx_ris=g_t_ris,
        g_bs_rx_ris=g_r_ris,
        h_bs_user=h_bu,
        h_ris_user=h_ru,
        g_ris_target=alpha_rt * a_rt,
        g_bs_tx_target=alpha_t * a_t,
        g_bs_rx_target=alpha_r * a_r,
        h_self_interference=h_si,
        noise_power=cfg.noise_power,
        rcs_variance=float(cfg.rcs_variance),
        radar_threshold=cfg.radar_threshold,
        bs_power=cfg.bs_power,
        user_powers=cfg.user_powers,
        fading_coeffs={"alpha_t": alpha_t, "alpha_r": alpha_r, "alpha_rt": alpha_rt},
        angles={"theta_t": theta_t, "theta_r": theta_r, "theta_r_elev": elev_rt, "theta_r_azim": azim_rt},
        positions={"target": target.tolist(), "users": users.tolist()},
    )


def effective_user_channel(ch, phi, k):
    """Direct plus RIS-reflected uplink channel of user `k`, shape (Nr,)."""
    phi = as_complex_vector(phi, ch.n_ris, "phi")
    return ch.h_bs_user[k] + ch.g_bs_rx_ris.conj().T @ (phi * ch.h_ris_user[k])


def user_channels(ch, phi):
    """All effective user channels stacked as rows, shape (K, Nr)."""
    phi = as_complex_vector(phi, ch.n_ris, "phi")
    return ch.h_bs_user + (ch.h_ris_user * phi) @ ch.g_bs_rx_ris.conj()


def effective_si_channel(ch, phi):
    """Self-interference seen at the receive array, shape (Nr, Nt)."""
    phi = as_complex_vector(phi, ch.n_ris, "phi")
    return ch.g_bs_rx_ris.conj().T @ (phi[:, None] * ch.g_bs_tx_ris) + ch.h_self_interference.conj().T


def radar_receive_vector(ch, psi):
    """Receive-side factor ``g_r + G_r^H diag(psi) g_RT``."""
    return ch.g_bs_rx_target + ch.g_bs_rx_ris.conj().T @ (psi * ch.g_ris_target)


def radar_transmit_row(ch, phi):
    """Transmit-side row factor ``g_t^H + g_RT^T diag(phi) G_t`` as a 1-D array."""
    return ch.g_bs_tx_target.conj() + (phi * ch.g_ris_target) @ ch.g_bs_tx_ris


def effective_radar_channel(ch, phi, psi1=None):
    """Rank-one target echo channel, shape (Nr, Nt).

    With `psi1` given, the receive-side factor uses `psi1` instead of `phi`.
    """
    phi = as_complex_vector(phi, ch.n_ris, "phi")
    psi1 = phi if psi1 is None else as_complex_vector(psi1, ch.n_ris, "psi1")
    return np.outer(radar_receive_vector(ch, psi1), radar_transmit_row(ch, phi))
