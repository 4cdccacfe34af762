"""Acceptance suite: one check per acceptance criterion.

Each ``criterion_N`` function returns ``(passed, detail)``. Under pytest the
outcome lines are printed in the terminal summary; running this file as a
script prints them directly.
"""

import time

import numpy as np
import pytest

from fdisac.beamformer import AdmmConfig, admm_solve
from fdisac.coeffs import (PowerProblemData, build_p2_coeffs, build_w_problem, direct_split_constraint,
                           eval_p2_constraint, eval_p2_objective, vec)
from fdisac.metrics import is_feasible, optimal_aux, sinr_radar, sum_rate, surrogate_sum_rate
from fdisac.oracle import dual_qcqp, grid_phase_m1, grid_power, pg_qcqp
from fdisac.orchestrator import RunOptions, run
from fdisac.power import nu_upper_bound, solve_power
from fdisac.qcqp import QcqpProblem, solve_qcqp
from fdisac.ris_pdd import PddConfig, pdd_optimize_phase, run_pdd
from fdisac.scenario import ScenarioConfig, generate_channels

from conftest import ACCEPTANCE_LINES, feasible_instance, random_design, random_qcqp, small_channels


def _fmt(x):
    return f"{x:.2e}"


def criterion_1():
    """WMMSE identity: true sum-rate equals the surrogate at (beta*, omega*)."""
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        ch = generate_channels(ScenarioConfig(n_ris=16), seed)
        dv = random_design(ch, rng)
        worst = max(worst, abs(sum_rate(ch, dv) - surrogate_sum_rate(ch, dv, optimal_aux(ch, dv))))
    dt = time.perf_counter() - t0
    return worst <= 1e-9 and dt < 10, f"max |gap| {_fmt(worst)} over 100 instances, {dt:.1f} s"


def criterion_2():
    """Quartic phase forms vs direct evaluation."""
    t0 = time.perf_counter()
    worst = 0.0
    for dims in ((2, 2, 2, 1), (4, 2, 2, 2)):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            ch = small_channels(seed, *dims)
            dv = random_design(ch, rng)
            aux = optimal_aux(ch, dv)
            cs = build_p2_coeffs(ch, dv, aux)
            phi = np.exp(1j * rng.uniform(0, 2 * np.pi, dims[0]))
            d = dv.copy(phi=phi)
            pairs = [(eval_p2_objective(cs, phi), -surrogate_sum_rate(ch, d, aux)),
                     (eval_p2_constraint(cs, phi), direct_split_constraint(ch, dv, phi, phi))]
            for a, b in pairs:
                worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    dt = time.perf_counter() - t0
    return worst <= 1e-8 and dt < 30, f"max rel. error {_fmt(worst)} over 2 x 50 instances, {dt:.1f} s"


def criterion_3():
    """Single-constraint QCQP solver vs projected gradient, plus the hand example."""
    rng = np.random.default_rng(3)
    gap = viol = 0.0
    for i in range(200):
        p = random_qcqp(rng, int(rng.integers(1, 9)), active=bool(i % 2 == 0))
        x = solve_qcqp(p)
        ref = p.objective(pg_qcqp(p))
        gap = max(gap, (p.objective(x) - ref) / max(1.0, abs(ref)))
        viol = max(viol, p.constraint(x) / p.constraint_scale())
    sol = solve_qcqp(QcqpProblem.ball(np.eye(2), np.array([2.0, 0.0]), 1.0), full_output=True)
    ex = max(np.max(np.abs(sol.x - [1.0, 0.0])), abs(sol.multiplier - 1.0))
    ok = gap <= 1e-6 and viol <= 1e-8 and ex <= 1e-10
    return ok, f"gap {_fmt(gap)}, violation {_fmt(viol)} over 200 instances; example error {_fmt(ex)}"


def _pdata(a, b, d, c5, pm):
    arr = lambda v: np.atleast_1d(np.asarray(v, float))
    return PowerProblemData(arr(a), arr(b), arr(d), 0.0, float(c5), arr(pm))


def criterion_4():
    """Power allocation vs exhaustive grid; analytic example; multiplier bound."""
    rng = np.random.default_rng(4)
    worse = spread = viol = 0.0
    bound_ok = True
    for i in range(100):
        k = 1 + i % 3
        pd = _pdata(rng.uniform(0.5, 2, k), rng.uniform(-4, 0.5, k), rng.uniform(0.1, 2, k),
                    rng.uniform(0.05, 2.0), rng.uniform(0.5, 1.5, k))
        q, nu = solve_power(pd, full_output=True)
        p = np.sqrt(q)
        f, g = pd.objective(p), pd.objective(np.sqrt(grid_power(pd, 1e-3)))
        worse = max(worse, f - g)
        spread = max(spread, abs(f - g))
        viol = max(viol, pd.constraint(p))
        bound_ok &= nu_upper_bound(pd) >= nu - 1e-12
    q, nu = solve_power(_pdata(1, -2, 1, 0.25, 3), full_output=True)
    ex = max(abs(nu - 1.0), abs(q[0] - 0.25))
    ok = worse <= 1e-4 and viol <= 1e-9 and bound_ok and ex <= 1e-10
    return ok, (f"solver - grid objective max {_fmt(worse)} (|diff| max {_fmt(spread)}, grid resolution), "
                f"bound holds {bound_ok}, example error {_fmt(ex)}")


def criterion_5():
    """PDD consensus at M = 16 and 64; single element vs phase grid."""
    counts = {}
    for m in (16, 64):
        ok = 0
        for seed in range(20):
            ch, dv, aux = feasible_instance(seed, m=m)
            state, _, n = run_pdd(build_p2_coeffs(ch, dv, aux), dv.phi, PddConfig(outer_max_iters=100))
            ok += max(state.residuals()) < 1e-6 and n <= 100
        counts[m] = ok
    grid_gap = 0.0
    for seed in range(5):
        ch, dv, aux = feasible_instance(seed, m=1)
        cs = build_p2_coeffs(ch, dv, aux)
        res = pdd_optimize_phase(ch, dv, aux)
        _, best = grid_phase_m1(lambda p: eval_p2_objective(cs, p), lambda p: eval_p2_constraint(cs, p))
        grid_gap = max(grid_gap, (eval_p2_objective(cs, res.phi) - best) / max(1.0, abs(best)))
    ok = all(c >= 18 for c in counts.values()) and grid_gap <= 1e-3
    return ok, f"consensus reached on {counts[16]}/20 (M=16), {counts[64]}/20 (M=64); M=1 gap {_fmt(grid_gap)}"


def _dual_bound(wp):
    P, r = wp.bs_power, np.sqrt(wp.bs_power)
    s1 = np.linalg.eigvalsh(wp.D1)[-1] * P
    s2 = np.linalg.eigvalsh(wp.D2)[-1] * P
    n = len(wp.d3)
    _, lb, _ = dual_qcqp(P * wp.D1 / s1, np.zeros(n),
                         [(P * wp.D2 / s2, r * wp.d3 / s2, wp.c4_hat / s2), (np.eye(n), np.zeros(n), -1.0)])
    return lb * s1


def criterion_6():
    """ADMM beamformer subproblem vs certified dual lower bound, 50 iterations."""
    worst, infeasible = 0.0, 0
    for m, seeds in ((16, 20), (64, 5)):
        for seed in range(seeds):
            ch, dv, aux = feasible_instance(seed, m=m)
            wp = build_w_problem(ch, dv, aux)
            lb = _dual_bound(wp)
            for ups in (0.6, 1.0, 1.4):
                w = admm_solve(wp, vec(dv.w_beamformer), AdmmConfig(upsilon=ups, max_iters=50)).w
                val = float(np.real(np.vdot(w, wp.D1 @ w)))
                worst = max(worst, (val - lb) / abs(lb))
                infeasible += (wp.constraint_linearized(w) > 1e-9 * abs(wp.c4_hat)
                               or np.vdot(w, w).real > wp.bs_power * (1 + 1e-9))
    ok = worst <= 1e-3 and infeasible == 0
    return ok, f"max rel. gap to dual bound {_fmt(worst)} over 75 instances x 3 penalties, {infeasible} infeasible"


def criterion_7():
    """Full algorithm at default settings (M = 100), 20 seeds, 30 outer iterations."""
    mono = feas = conv = 0
    worst_drop, rel_last = 0.0, []
    for seed in range(20):
        ch = generate_channels(ScenarioConfig(), seed)
        rep = run(ch, RunOptions(max_outer=30), seed=seed)
        r = rep.rate_trace
        drop = float(np.max(-np.diff(r), initial=0.0))
        worst_drop = max(worst_drop, drop)
        mono += drop <= 1e-8
        feas += is_feasible(ch, rep.design, 1e-6)
        conv += rep.termination == "converged"
        rel_last.append(abs(r[-1] - r[-2]) / abs(r[-2]))
    ok = mono == 20 and feas == 20 and conv >= 18
    return ok, (f"monotone {mono}/20 (worst drop {_fmt(worst_drop)}), feasible {feas}/20, "
                f"converged within 30 iterations {conv}/20 (median last rel. change {_fmt(np.median(rel_last))})")


TREND_SEEDS = 20
TREND_OUTER = 10


def _mean_rate(mode="full", **scenario):
    rates = []
    for seed in range(TREND_SEEDS):
        ch = generate_channels(ScenarioConfig(**scenario), seed)
        rates.append(run(ch, RunOptions(mode=mode, max_outer=TREND_OUTER), seed=seed).sum_rate)
    return float(np.mean(rates))


def criterion_8():
    """Qualitative trends over 20 common-random-number seeds."""
    t0 = time.perf_counter()
    ris = {"full64": _mean_rate(n_ris=64), "full32": _mean_rate(n_ris=32),
           "rnd64": _mean_rate("rndris", n_ris=64), "noris": _mean_rate("noris", n_ris=64)}
    gam = [_mean_rate(n_ris=16, radar_threshold_db=g) for g in (0.0, 5.0, 10.0)]
    si = [gam[1] if s == -110.0 else _mean_rate(n_ris=16, si_path_loss_db=s) for s in (-110.0, -90.0, -70.0)]
    dt = time.perf_counter() - t0
    order = ris["full64"] > ris["full32"] > ris["rnd64"] > ris["noris"]
    ok = order and gam[0] >= gam[1] >= gam[2] and si[0] >= si[1] >= si[2] and dt < 600
    fmt = lambda xs: "/".join(f"{x:.3f}" for x in xs)
    return ok, (f"full64/full32/rnd64/noRIS {fmt(ris.values())}; gamma 0/5/10 dB {fmt(gam)}; "
                f"SI -110/-90/-70 dB {fmt(si)}; {dt:.0f} s")


def criterion_9():
    """KKT solver vs projected gradient at dimension 64."""
    rng = np.random.default_rng(9)
    ratios, gaps = [], []
    for _ in range(5):
        p = random_qcqp(rng, 64, active=True)
        t0 = time.perf_counter()
        x = solve_qcqp(p)
        t1 = time.perf_counter()
        y = pg_qcqp(p)
        t2 = time.perf_counter()
        ratios.append((t2 - t1) / (t1 - t0))
        gaps.append(abs(p.objective(x) - p.objective(y)) / max(1.0, abs(p.objective(x))))
    ok = min(ratios) >= 10 and max(gaps) <= 1e-6
    return ok, f"speedup min {min(ratios):.0f}x (median {np.median(ratios):.0f}x), objective agreement {_fmt(max(gaps))}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9]


@pytest.mark.acceptance
@pytest.mark.parametrize("number", range(1, 10))
def test_criterion(number):
    passed, detail = CRITERIA[number - 1]()
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


if __name__ == "__main__":
    for i, fn in enumerate(CRITERIA, 1):
        passed, detail = fn()
        print(f"criterion {i}: {'PASS' if passed else 'FAIL'}  {detail}", flush=True)
