import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdisac.coeffs import PowerProblemData
from fdisac.oracle import grid_power
from fdisac.power import nu_upper_bound, solve_power
from fdisac.qcqp import InfeasibleError


def pdata(a, b, d, c5_hat, p_max):
    arr = lambda v: np.atleast_1d(np.asarray(v, float))
    return PowerProblemData(arr(a), arr(b), arr(d), 0.0, float(c5_hat), arr(p_max))


def test_case_one():
    q, nu = solve_power(pdata(1, -2, 1, 4, 3), full_output=True)
    np.testing.assert_allclose(q, [1.0], atol=1e-12)
    assert nu == 0.0


def test_case_two():
    q, nu = solve_power(pdata(1, -2, 1, 0.25, 3), full_output=True)
    assert q[0] == pytest.approx(0.25, abs=1e-10)
    assert nu == pytest.approx(1.0, abs=1e-10)
    assert nu_upper_bound(pdata(1, -2, 1, 0.25, 3)) >= 1.0


def test_positive_b_gets_zero_power():
    q = solve_power(pdata([1, 1], [1.0, -2], [1, 1], 0.01, [3, 3]))
    assert q[0] == 0.0 and q[1] > 0


def test_bound_substitution():
    pd = pdata([1, 2], [-1, -3], [0.5, 1], 0.3, [2, 2])
    p_hat = np.minimum(-pd.b / (2 * pd.a), pd.p_max)
    assert nu_upper_bound(pd) == pytest.approx((pd.objective(np.zeros(2)) - pd.objective(p_hat)) / 0.3)
    with pytest.raises(ValueError):
        nu_upper_bound(pd, p_interior=np.array([2.0, 2.0]))


def test_errors():
    with pytest.raises(InfeasibleError):
        solve_power(pdata(1, -2, 1, -0.1, 3))
    with pytest.raises(ValueError):
        solve_power(pdata(1, -2, 1, 1.0, 0.0))


def random_pd(rng, k):
    return pdata(rng.uniform(0.5, 2, k), rng.uniform(-4, 0.5, k), rng.uniform(0.1, 2, k),
                 rng.uniform(0.05, 2.0), rng.uniform(0.5, 2.0, k))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_matches_grid_and_bound(seed, k):
    rng = np.random.default_rng(seed)
    pd = random_pd(rng, k)
    q, nu = solve_power(pd, full_output=True)
    p = np.sqrt(q)
    assert pd.constraint(p) <= 1e-9
    assert np.all(p <= pd.p_max + 1e-12)
    ref = np.sqrt(grid_power(pd, step=1e-2 if k == 3 else 1e-3))
    assert pd.objective(p) <= pd.objective(ref) + 1e-9
    assert nu_upper_bound(pd) >= nu - 1e-9


def test_grid_examples():
    np.testing.assert_allclose(grid_power(pdata(1, -2, 1, 4, 3)), [1.0], atol=1e-6)
    np.testing.assert_allclose(grid_power(pdata(1, -2, 1, 0.25, 3)), [0.25], atol=1e-3)
    with pytest.raises(ValueError):
        grid_power(pdata([1] * 4, [-1] * 4, [1] * 4, 1, [1] * 4))
