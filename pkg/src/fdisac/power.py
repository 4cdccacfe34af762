"""Closed-form uplink power allocation.

Works in amplitudes ``p_k = sqrt(q_k)``: minimize ``sum a p^2 + b p`` over
the box ``0 <= p <= p_max`` and the radar budget ``sum d p^2 <= c5_hat``.
"""

import numpy as np

from .qcqp import InfeasibleError, find_root_monotone


def _p_of_nu(pd, nu, active):
    p = np.zeros_like(pd.a)
    a, b, d, pm = pd.a[active], pd.b[active], pd.d[active], pd.p_max[active]
    denom = 2.0 * a + 2.0 * nu * d
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(denom > 0, -b / denom, np.inf)
    p[active] = np.minimum(val, pm)
    return p


def nu_upper_bound(pd, p_interior=None):
    """Upper bound on the budget multiplier from a strictly feasible point.

    ``(f(p_interior) - f(p_hat)) / (c5_hat - sum d p_interior^2)`` where
    ``p_hat`` minimizes the objective over the box alone.
    """
    p_tilde = np.zeros_like(pd.a) if p_interior is None else np.asarray(p_interior, float)
    slack = pd.c5_hat - float(np.sum(pd.d * p_tilde ** 2))
    if not slack > 0:
        raise ValueError("p_interior must be strictly inside the radar budget")
    active = pd.b < 0
    p_hat = _p_of_nu(pd, 0.0, active)
    return (pd.objective(p_tilde) - pd.objective(p_hat)) / slack


def solve_power(pd, tol=1e-10, full_output=False):
    """Optimal powers ``q_k`` for a :class:`~fdisac.coeffs.PowerProblemData`.

    Users with ``b_k >= 0`` get zero power. The rest take the clipped
    vertex ``min(-b/2a, p_max)``; if that breaks the radar budget the
    multiplier ``nu`` is found by root search on ``[0, nu_upper_bound]``.

    Returns
    -------
    q : ndarray, or ``(q, nu)`` when ``full_output`` is set.
    """
    if pd.c5_hat < 0:
        raise InfeasibleError(f"radar budget is negative ({pd.c5_hat:.6g}); restore radar feasibility first")
    if np.any(pd.p_max <= 0):
        raise ValueError("p_max must be positive")
    active = pd.b < 0
    p_hat = _p_of_nu(pd, 0.0, active)
    used = float(np.sum(pd.d * p_hat ** 2))
    if used <= pd.c5_hat:
        q = p_hat ** 2
        return (q, 0.0) if full_output else q
    if pd.c5_hat == 0:
        # Only users invisible to the radar filter may transmit.
        keep = active & (pd.d == 0)
        q = _p_of_nu(pd, 0.0, keep) ** 2
        return (q, np.inf) if full_output else q

    scale = pd.c5_hat

    def g(nu):
        return (float(np.sum(pd.d * _p_of_nu(pd, nu, active) ** 2)) - pd.c5_hat) / scale

    def dg(nu):
        p = _p_of_nu(pd, nu, active)
        a, b, d = pd.a, pd.b, pd.d
        interior = active & (p < pd.p_max) & (d > 0)
        # d p / d nu = 2 b d / (2a + 2 nu d)^2 on unclipped users
        dp = np.zeros_like(p)
        dp[interior] = 2 * b[interior] * d[interior] / (2 * a[interior] + 2 * nu * d[interior]) ** 2
        return float(np.sum(2 * d * p * dp)) / scale

    hi = nu_upper_bound(pd)
    if g(hi) > 0:
        # Bound is analytic; guard against rounding at the bracket end.
        hi = hi * (1 + 1e-9) + 1e-300
        while g(hi) > 0:
            hi *= 2.0
    nu = find_root_monotone(g, (0.0, hi), tol=tol, dg=dg)
    if g(nu) > 0:
        nu = np.nextafter(nu, np.inf)
        while g(nu) > tol:
            nu *= 1 + 1e-12
    q = _p_of_nu(pd, nu, active) ** 2
    return (q, nu) if full_output else q
