import numpy as np
import pytest

from fdisac.coeffs import build_p2_coeffs, build_p5_coeffs, build_p7_coeffs, eval_p2_constraint, eval_p2_objective
from fdisac.metrics import sinr_radar, sum_rate
from fdisac.oracle import grid_phase_m1
from fdisac.qcqp import QcqpKernel
from fdisac.ris_pdd import (PddConfig, PddState, PhiKernel, augmented_lagrangian, fast_update_psi1,
                            objective_scale, pdd_optimize_phase, pdd_outer_step, run_pdd, update_phi,
                            update_psi1, update_psi2)

from conftest import crandn, feasible_instance


@pytest.fixture(scope="module")
def inst():
    ch, dv, aux = feasible_instance(3, m=16)
    return ch, dv, aux, build_p2_coeffs(ch, dv, aux)


def perturbed_state(cs, phi, rng, rho=0.5):
    st = PddState.start(phi, PddConfig(rho0=rho))
    st.psi1 = phi * np.exp(0.05j * rng.standard_normal(phi.size))
    st.psi2 = np.exp(1j * np.angle(phi + 0.1 * crandn(rng, phi.size)))
    st.lambda1 = 0.01 * crandn(rng, phi.size)
    st.lambda2 = 0.01 * crandn(rng, phi.size)
    return st


def test_psi2_examples(rng):
    phi = np.abs(crandn(rng, 5)) + 0.1
    np.testing.assert_allclose(update_psi2(phi, np.zeros(5), 1.0), np.ones(5))
    phi = crandn(rng, 5)
    np.testing.assert_allclose(update_psi2(phi, np.zeros(5), 1.0), phi / np.abs(phi))
    lam = crandn(rng, 5)
    v = phi + 0.7 * lam
    psi = update_psi2(phi, lam, 0.7)
    np.testing.assert_allclose(np.abs(psi), 1.0, atol=1e-15)
    best = np.real(np.vdot(v, psi))
    for _ in range(1000):
        u = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
        assert np.real(np.vdot(v, u)) <= best + 1e-12


def test_outer_step_branches():
    cfg = PddConfig(rho0=0.5, penalty_shrink_c=0.8, eta0=0.1)
    phi = np.exp(1j * np.arange(3.0))
    st = PddState.start(phi, cfg)
    st.lambda1 = np.ones(3)
    nxt = pdd_outer_step(st, cfg)
    np.testing.assert_array_equal(nxt.lambda1, st.lambda1)
    assert nxt.rho == st.rho and nxt.eta == pytest.approx(0.1 * cfg.eta_decay)
    st.psi1 = -phi
    nxt = pdd_outer_step(st, cfg)
    assert nxt.rho == pytest.approx(0.4) and nxt.eta == st.eta
    np.testing.assert_array_equal(nxt.lambda1, st.lambda1)


def test_config_validation():
    with pytest.raises(ValueError):
        PddConfig(penalty_shrink_c=1.0)
    with pytest.raises(ValueError):
        PddConfig(rho0=0.0)


def test_fast_phi_matches_reference(inst, rng):
    ch, dv, aux, cs = inst
    scale = objective_scale(cs, dv.phi)
    st = perturbed_state(cs, dv.phi, rng)
    ref = update_phi(build_p5_coeffs(cs, st.psi1, st.phi), st, scale)
    fast = PhiKernel(cs, scale, st.rho).solve(st)
    np.testing.assert_allclose(fast, ref, atol=1e-9 * np.linalg.norm(ref))


def test_fast_psi1_matches_reference(inst, rng):
    ch, dv, aux, cs = inst
    scale = objective_scale(cs, dv.phi)
    st = perturbed_state(cs, dv.phi, rng)
    ref = update_psi1(build_p7_coeffs(cs, st.phi, st.psi1), st, scale)
    np.testing.assert_allclose(fast_update_psi1(cs, st, scale), ref, atol=1e-9 * np.linalg.norm(ref))


def test_phi_update_pure_penalty(inst, rng):
    # Zero objective and a slack constraint: phi = mean of copies minus rho * mean of duals.
    _, _, _, cs = inst
    M = cs.n_ris
    c5 = build_p5_coeffs(cs, np.zeros(M), np.zeros(M))
    from dataclasses import replace
    c5 = replace(c5, T1_hat=np.zeros((M, M)), t1_hat=np.zeros(M), T0=np.eye(M),
                 t0_acute=np.zeros(M), c2_acute=-1e9)
    st = perturbed_state(cs, np.exp(1j * rng.uniform(0, 6, M)), rng, rho=0.3)
    want = (st.psi1 + st.psi2) / 2 - st.rho * (st.lambda1 + st.lambda2) / 2
    np.testing.assert_allclose(update_phi(c5, st), want, atol=1e-12)


def test_inner_updates_do_not_raise_al(inst, rng):
    ch, dv, aux, cs = inst
    scale = objective_scale(cs, dv.phi)
    st = PddState.start(dv.phi, PddConfig(rho0=0.5))
    kern = PhiKernel(cs, scale, st.rho)
    al = augmented_lagrangian(cs, st, scale)
    for _ in range(20):
        st.phi = kern.solve(st)
        a1 = augmented_lagrangian(cs, st, scale)
        st.psi1 = fast_update_psi1(cs, st, scale)
        a2 = augmented_lagrangian(cs, st, scale)
        st.psi2 = update_psi2(st.phi, st.lambda2, st.rho)
        a3 = augmented_lagrangian(cs, st, scale)
        tol = 1e-9 * max(1.0, abs(al))
        assert a1 <= al + tol and a2 <= a1 + tol and a3 <= a2 + tol
        al = a3
        assert eval_p2_constraint(cs, st.phi, st.psi1) <= 1e-8 * abs(cs.c2_0)


def test_pdd_consensus_m16(inst):
    ch, dv, aux, cs = inst
    log = []
    state, converged, n = run_pdd(cs, dv.phi, PddConfig(outer_max_iters=100), log=log)
    assert converged and n <= 100
    assert max(state.residuals()) < 1e-6


def test_phase_block_keeps_feasibility_and_rate(inst):
    ch, dv, aux, cs = inst
    res = pdd_optimize_phase(ch, dv, aux)
    assert res.accepted
    np.testing.assert_allclose(np.abs(res.phi), 1.0, atol=1e-12)
    new = dv.copy(phi=res.phi, radar_filter=res.radar_filter)
    assert sinr_radar(ch, new) >= ch.radar_threshold * (1 - 1e-8)
    assert eval_p2_objective(cs, res.phi) <= eval_p2_objective(cs, dv.phi)


def test_phase_block_rejects_from_infeasible_start(inst):
    ch, dv, aux, cs = inst
    bad = dv.copy(w_beamformer=1e-6 * dv.w_beamformer)
    res = pdd_optimize_phase(ch, bad, aux)
    assert not res.accepted
    np.testing.assert_array_equal(res.phi, bad.phi)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_single_element_matches_grid(seed):
    ch, dv, aux = feasible_instance(seed, m=1)
    cs = build_p2_coeffs(ch, dv, aux)
    res = pdd_optimize_phase(ch, dv, aux, PddConfig(outer_max_iters=200))
    _, best = grid_phase_m1(lambda p: eval_p2_objective(cs, p), lambda p: eval_p2_constraint(cs, p))
    assert eval_p2_objective(cs, res.phi) <= best + 1e-3 * max(1.0, abs(best))
