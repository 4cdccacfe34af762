"""Block coordinate ascent over all design variables.

One outer iteration visits the blocks in the order

    (beta, omega) -> phi -> W -> {q_k} -> {u_k} -> u_0

and refreshes the WMMSE auxiliaries before each block, so every block sees
a surrogate that is tight at the current point. A block result is kept only
when the true sum-rate does not drop and the radar constraint still holds.
"""

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .beamformer import AdmmConfig, optimize_beamformer
from .coeffs import build_filter_problems, build_power_problem
from .filters import initial_radar_filter, mmse_filters, update_radar_filter, update_user_filters
from .metrics import AuxState, DesignVariables, constraint_report, optimal_aux, sinr_radar, sum_rate
from .power import solve_power
from .qcqp import InfeasibleError
from .ris_pdd import PddConfig, pdd_optimize_phase

logger = logging.getLogger(__name__)

MODES = ("full", "noris", "rndris")
BLOCKS = ("phi", "w", "power", "user_filters", "radar_filter")


class InfeasibleScenarioError(RuntimeError):
    """No radar-feasible starting point could be constructed."""


@dataclass(frozen=True)
class RunOptions:
    """Knobs of one optimization run.

    ``mode`` selects the RIS baseline: ``full`` optimizes the phases,
    ``rndris`` keeps the random initial phases and ``noris`` removes every
    RIS link.
    """

    mode: str = "full"
    stop_tol: float = 1e-4
    max_outer: int = 50
    guard_slack: float = 1e-8
    radar_slack: float = 1e-8
    init_load: float = 0.5
    init_restore_iters: int = 50
    pdd: PddConfig = field(default_factory=PddConfig)
    admm: AdmmConfig = field(default_factory=AdmmConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.stop_tol > 0 or self.max_outer < 1:
            raise ValueError("stop_tol must be positive and max_outer >= 1")
        if not 0 < self.init_load <= 1:
            raise ValueError("init_load must lie in (0, 1]")

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class RunReport:
    records: list
    termination: str
    iterations: int
    design: DesignVariables
    seed: int
    options: dict
    warnings: list = field(default_factory=list)

    @property
    def sum_rate(self):
        return self.records[-1]["sum_rate"]

    @property
    def sinr_radar(self):
        return self.records[-1]["sinr_radar"]

    @property
    def rate_trace(self):
        return np.array([r["sum_rate"] for r in self.records])

    def to_dict(self):
        d = self.design
        design = {f.name: _jsonable(getattr(d, f.name)) for f in dataclasses.fields(d)}
        return {"termination": self.termination, "iterations": self.iterations, "seed": self.seed,
                "options": _jsonable(self.options), "warnings": self.warnings,
                "records": _jsonable(self.records), "design": design}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return {"re": x.real.tolist(), "im": x.imag.tolist()}
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def random_phases(m, rng):
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, m))


def _unit_aux(n):
    return AuxState(np.zeros(n, complex), np.ones(n))


def _radar_filter(ch, dv, u0=None):
    fp = build_filter_problems(ch, dv, _unit_aux(ch.n_users))
    start = initial_radar_filter(ch, dv, fp) if u0 is None else u0
    return update_radar_filter(fp, start)


def _radar_beam(ch, dv):
    """Rank-one full-power W maximizing the radar SINR for the current u_0."""
    from .scenario import effective_radar_channel, effective_si_channel, user_channels
    u0 = dv.radar_filter
    a = effective_radar_channel(ch, dv.phi).conj().T @ u0
    g = effective_si_channel(ch, dv.phi).conj().T @ u0
    h = user_channels(ch, dv.phi)
    c = float(np.sum(dv.user_power * np.abs(h.conj() @ u0) ** 2) + ch.noise_power * np.vdot(u0, u0).real)
    A = np.outer(g, g.conj()) + c / ch.bs_power * np.eye(ch.n_tx)
    v = np.linalg.solve(A, a)
    W = np.zeros((ch.n_tx, ch.n_tx), complex)
    W[:, 0] = np.sqrt(ch.bs_power) * v / np.linalg.norm(v)
    return W


def init_feasible(ch, seed=0, opts=RunOptions(), phi=None):
    """Radar-feasible starting point with nonzero user powers.

    W starts as a full-power beam toward the target and u_0 as the matched
    radar filter; if the radar SINR falls short, (u_0, W) are alternated
    toward the radar channel. Powers are then loaded as a common fraction of
    the per-user budgets that spends at most ``opts.init_load`` of the radar
    margin, and the user filters are set to MMSE receivers.

    Raises
    ------
    InfeasibleScenarioError
        If the radar SINR cannot reach its threshold.
    """
    rng = np.random.default_rng(seed)
    if phi is None:
        phi = random_phases(ch.n_ris, rng)
    gt = ch.g_bs_tx_target
    W = np.zeros((ch.n_tx, ch.n_tx), complex)
    W[:, 0] = np.sqrt(ch.bs_power) * gt.conj() / np.linalg.norm(gt)
    K, nr = ch.n_users, ch.n_rx
    dv = DesignVariables(W, phi, np.zeros(K), np.ones((K, nr)), np.ones(nr))
    dv.radar_filter = _radar_filter(ch, dv)
    floor = ch.radar_threshold * (1 - opts.radar_slack)
    for _ in range(opts.init_restore_iters):
        if sinr_radar(ch, dv) >= floor:
            break
        dv.w_beamformer = _radar_beam(ch, dv)
        dv.radar_filter = _radar_filter(ch, dv, dv.radar_filter)
    sr = sinr_radar(ch, dv)
    if sr < floor:
        raise InfeasibleScenarioError(
            f"radar SINR {10 * np.log10(sr):.2f} dB stays below the threshold "
            f"{10 * np.log10(ch.radar_threshold):.2f} dB at zero user power")

    # q = 0 is a fixed point of the WMMSE updates, so load the users first.
    pd = build_power_problem(ch, dv, _unit_aux(K))
    demand = float(np.sum(pd.d * ch.user_powers))
    t = 1.0 if demand <= 0 else min(1.0, opts.init_load * pd.c5_hat / demand)
    for _ in range(60):
        cand = dv.copy(user_power=t * ch.user_powers)
        cand.user_filters = mmse_filters(ch, cand)
        cand.radar_filter = _radar_filter(ch, cand, cand.radar_filter)
        if sinr_radar(ch, cand) >= floor:
            return cand
        t *= 0.5
    dv.user_filters = mmse_filters(ch, dv)
    return dv


def _margins(ch, dv):
    m = constraint_report(ch, dv)
    return {k: float(v) for k, v in m.items()}


def run(ch, opts=RunOptions(), seed=0, dv0=None):
    """Optimize all blocks from a feasible start; returns a :class:`RunReport`.

    In ``noris`` mode `ch` is stripped of its RIS links first.
    """
    if opts.mode == "noris":
        ch = ch.without_ris()
    dv = init_feasible(ch, seed, opts) if dv0 is None else dv0.copy()
    dv.check_shapes(ch)
    floor = ch.radar_threshold * (1 - opts.radar_slack)
    warnings = []
    if sinr_radar(ch, dv) < floor:
        raise InfeasibleScenarioError("starting point violates the radar constraint")

    rate = sum_rate(ch, dv)
    records = [{"iter": 0, "sum_rate": rate, "sinr_radar": sinr_radar(ch, dv),
                "margins": _margins(ch, dv), "timing": {}, "accepted": {}}]

    def guarded(cand, current_rate):
        r = sum_rate(ch, cand)
        ok = (r >= current_rate - opts.guard_slack and sinr_radar(ch, cand) >= floor
              and np.sum(np.abs(cand.w_beamformer) ** 2) <= ch.bs_power * (1 + 1e-9)
              and np.all(cand.user_power <= ch.user_powers * (1 + 1e-9)))
        return ok, r

    termination = "max_outer"
    it = 0
    for it in range(1, opts.max_outer + 1):
        rate_start = rate
        timing, accepted = {}, {}
        for block in BLOCKS:
            t0 = time.perf_counter()
            try:
                cand = _update_block(block, ch, dv, opts)
            except (InfeasibleError, np.linalg.LinAlgError, ValueError) as exc:
                warnings.append(f"iter {it} {block}: {exc}")
                cand = None
            ok = False
            if cand is not None:
                ok, r = guarded(cand, rate)
                if ok:
                    dv, rate = cand, r
            timing[block] = time.perf_counter() - t0
            accepted[block] = bool(ok)
        records.append({"iter": it, "sum_rate": rate, "sinr_radar": sinr_radar(ch, dv),
                        "margins": _margins(ch, dv), "timing": timing, "accepted": accepted})
        logger.debug("iter %d sum_rate %.6g", it, rate)
        if abs(rate - rate_start) <= opts.stop_tol * max(abs(rate_start), 1e-12):
            termination = "converged"
            break
    return RunReport(records, termination, it, dv, seed, opts.to_dict(), warnings)


def _update_block(block, ch, dv, opts):
    if block == "phi":
        if opts.mode != "full":
            return None
        aux = optimal_aux(ch, dv)

        def repair(phi):
            d = dv.copy(phi=phi)
            return update_radar_filter(build_filter_problems(ch, d, aux), d.radar_filter)

        res = pdd_optimize_phase(ch, dv, aux, opts.pdd, radar_repair=repair)
        if not res.accepted:
            return None
        return dv.copy(phi=res.phi, radar_filter=res.radar_filter)
    if block == "w":
        aux = optimal_aux(ch, dv)
        return dv.copy(w_beamformer=optimize_beamformer(ch, dv, aux, opts.admm).W)
    if block == "power":
        pd = build_power_problem(ch, dv, optimal_aux(ch, dv))
        return dv.copy(user_power=np.minimum(solve_power(pd), ch.user_powers))
    if block == "user_filters":
        fp = build_filter_problems(ch, dv, optimal_aux(ch, dv))
        return dv.copy(user_filters=update_user_filters(fp, dv.user_filters))
    if block == "radar_filter":
        fp = build_filter_problems(ch, dv, optimal_aux(ch, dv))
        return dv.copy(radar_filter=update_radar_filter(fp, dv.radar_filter))
    raise ValueError(f"unknown block {block!r}")
