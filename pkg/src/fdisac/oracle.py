"""Slow, independent reference solvers used to check the analytic updates.

Nothing here shares code with the production solvers beyond the problem
containers. Accuracy matters more than speed.
"""

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq, minimize

from .validation import hermitian_part


class _Ellipsoid:
    """Euclidean projector onto ``{x : x^H A x - 2Re{a^H x} + c <= 0}``, A PSD."""

    def __init__(self, A, a, c):
        self.A = hermitian_part(np.asarray(A, complex))
        self.a = np.asarray(a, complex)
        self.c = float(c)
        self.lam, self.U = np.linalg.eigh(self.A)
        self.lam = np.clip(self.lam, 0.0, None)
        self.b = self.U.conj().T @ self.a

    def value(self, x):
        return float(np.real(np.vdot(x, self.A @ x)) - 2 * np.real(np.vdot(self.a, x)) + self.c)

    def project(self, v):
        if self.value(v) <= 0:
            return v
        w = self.U.conj().T @ v
        lam, b, c = self.lam, self.b, self.c

        def h(mu):
            y = (w + mu * b) / (1.0 + mu * lam)
            return float(np.sum(lam * np.abs(y) ** 2) - 2 * np.real(np.vdot(b, y)) + c)

        hi = 1.0
        while h(hi) > 0:
            hi *= 4.0
            if hi > 1e30:
                raise ValueError("projection target set appears empty")
        mu = brentq(h, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        if h(mu) > 0:
            # brentq may stop on the infeasible side; step to the feasible end.
            mu = np.nextafter(mu, np.inf)
            while h(mu) > 0:
                mu = mu * (1 + 1e-12) + 1e-300
        return self.U @ ((w + mu * b) / (1.0 + mu * lam))


def _project_all(sets, v, sweeps=2000, tol=1e-13):
    if len(sets) == 1:
        return sets[0].project(v)
    # Dykstra's alternating projections onto the intersection.
    x = v.copy()
    incs = [np.zeros_like(v) for _ in sets]
    for _ in range(sweeps):
        x_old = x
        for i, s in enumerate(sets):
            y = s.project(x + incs[i])
            incs[i] = x + incs[i] - y
            x = y
        if np.linalg.norm(x - x_old) <= tol * max(1.0, np.linalg.norm(x)):
            break
    return x


def pg_qcqp(p, iters=20000, step=None, extra_constraints=(), xtol=1e-14):
    """Projected gradient on a convex QCQP.

    Parameters
    ----------
    p : QcqpProblem
    iters : int
        Iteration cap.
    step : float, optional
        Initial step; defaults to ``1 / (2 lambda_max(Q))``. Halved while
        the objective fails to decrease.
    extra_constraints : sequence of (A, a, c)
        Additional convex quadratic constraints; the feasible set becomes
        the intersection, handled by Dykstra's method.
    """
    Q = p.q_matrix
    sets = [_Ellipsoid(p.cons_matrix, p.cons_vector, p.cons_scalar)]
    sets += [_Ellipsoid(*c) for c in extra_constraints]
    if step is None:
        step = 1.0 / (2.0 * float(np.linalg.eigvalsh(Q)[-1]))
    x = _project_all(sets, np.zeros(p.dim, complex))
    fx = p.objective(x)
    for _ in range(iters):
        grad = 2.0 * (Q @ x - p.q_vector)
        t = step
        while True:
            xn = _project_all(sets, x - t * grad)
            fn = p.objective(xn)
            if fn <= fx + 1e-15 * max(1.0, abs(fx)) or t < 1e-20:
                break
            t *= 0.5
        done = np.linalg.norm(xn - x) <= xtol * max(1.0, np.linalg.norm(x))
        x, fx = xn, fn
        if done:
            break
    return x


def grid_power(pd, step=1e-3):
    """Exhaustive grid search over amplitudes ``p in [0, p_max]^K`` (K <= 3).

    The last coordinate is minimized exactly over its grid for each
    combination of the others: the objective is a parabola in it and the
    feasible grid points form a prefix, so checking the grid neighbours of
    the clipped vertex gives the same argmin as enumerating them all.
    """
    K = len(pd.a)
    if K > 3:
        raise ValueError("grid_power supports K <= 3")
    axes = [np.arange(0.0, pm + 0.5 * step, step) for pm in pd.p_max]
    axes = [ax[ax <= pm + 1e-15] for ax, pm in zip(axes, pd.p_max)]
    head = np.meshgrid(*axes[:-1], indexing="ij") if K > 1 else []
    head = [h.reshape(-1) for h in head] if K > 1 else []
    n_head = head[0].size if head else 1
    f_head = np.zeros(n_head)
    c_head = np.zeros(n_head)
    for i, h in enumerate(head):
        f_head += pd.a[i] * h ** 2 + pd.b[i] * h
        c_head += pd.d[i] * h ** 2
    last = axes[-1]
    a, b, d = pd.a[-1], pd.b[-1], pd.d[-1]
    rem = pd.c5_hat - c_head
    n_last = len(last)
    if d > 0:
        cap = np.where(rem >= 0, np.sqrt(np.clip(rem, 0, None) / d), -1.0)
        n_feas = np.minimum(np.floor(cap / step + 1e-9).astype(int) + 1, n_last)
        n_feas = np.where(rem >= 0, n_feas, 0)
    else:
        n_feas = np.where(rem >= 0, n_last, 0)
    vertex = -b / (2 * a) if a > 0 else (np.inf if b < 0 else 0.0)
    j = np.clip(np.round(vertex / step), 0, None)
    best = np.full(n_head, np.inf)
    best_j = np.zeros(n_head, int)
    for off in (-1, 0, 1):
        cand = np.minimum(j + off, n_feas - 1).astype(int)
        cand = np.clip(cand, 0, None)
        val = a * last[cand] ** 2 + b * last[cand]
        better = (val < best) & (n_feas > 0)
        best = np.where(better, val, best)
        best_j = np.where(better, cand, best_j)
    total = f_head + best
    if not np.any(np.isfinite(total)):
        raise ValueError("no feasible grid point")
    i = int(np.argmin(total))
    p = np.array([h[i] for h in head] + [last[best_j[i]]])
    return p ** 2


def grid_phase_m1(objective, constraint, n_points=4096):
    """Best unit-modulus scalar over an ``n_points`` phase grid.

    Returns ``(phi, value)`` minimizing `objective` among grid points with
    ``constraint(phi) <= 0``.
    """
    theta = 2 * np.pi * np.arange(n_points) / n_points
    best, arg = np.inf, None
    for th in theta:
        phi = np.array([np.exp(1j * th)])
        if constraint(phi) > 0:
            continue
        val = objective(phi)
        if val < best:
            best, arg = val, phi
    if arg is None:
        raise ValueError("no feasible grid phase")
    return arg, best


def finite_diff(f, x, h=1e-6):
    """Central-difference gradient of a real function of a real vector."""
    x = np.asarray(x, float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _naive_si(ch, phi):
    Nr, Nt, M = ch.n_rx, ch.n_tx, ch.n_ris
    G = np.zeros((Nr, Nt), complex)
    for i in range(Nr):
        for j in range(Nt):
            acc = np.conj(ch.h_self_interference[j, i])
            for m in range(M):
                acc += np.conj(ch.g_bs_rx_ris[m, i]) * phi[m] * ch.g_bs_tx_ris[m, j]
            G[i, j] = acc
    return G


def _naive_radar(ch, phi):
    Nr, Nt, M = ch.n_rx, ch.n_tx, ch.n_ris
    H = np.zeros((Nr, Nt), complex)
    for i in range(Nr):
        rx = ch.g_bs_rx_target[i] + sum(np.conj(ch.g_bs_rx_ris[m, i]) * phi[m] * ch.g_ris_target[m]
                                        for m in range(M))
        for j in range(Nt):
            tx = np.conj(ch.g_bs_tx_target[j]) + sum(ch.g_ris_target[m] * phi[m] * ch.g_bs_tx_ris[m, j]
                                                     for m in range(M))
            H[i, j] = rx * tx
    return H


def _naive_user(ch, phi, k):
    return np.array([ch.h_bs_user[k, i] + sum(np.conj(ch.g_bs_rx_ris[m, i]) * phi[m] * ch.h_ris_user[k, m]
                                              for m in range(ch.n_ris)) for i in range(ch.n_rx)])


def signal_covariances(ch, dv):
    """Covariance of every received component for unit-power symbols.

    Returns a dict with ``users`` (list of Nr x Nr), ``echo``, ``si`` and
    ``noise``, built entry by entry from the raw channels.
    """
    H = _naive_radar(ch, dv.phi)
    G = _naive_si(ch, dv.phi)
    W = dv.w_beamformer
    users = []
    for k in range(ch.n_users):
        h = _naive_user(ch, dv.phi, k)
        users.append(dv.user_power[k] * np.outer(h, h.conj()))
    HW, GW = H @ W, G @ W
    return {
        "users": users,
        "echo": ch.rcs_variance * HW @ HW.conj().T,
        "si": GW @ GW.conj().T,
        "noise": ch.noise_power * np.eye(ch.n_rx),
    }


def covariance_sinr_user(ch, dv, k):
    cov = signal_covariances(ch, dv)
    u = dv.user_filters[k]
    sig = np.vdot(u, cov["users"][k] @ u).real
    rest = sum(cov["users"][i] for i in range(ch.n_users) if i != k) + cov["echo"] + cov["si"] + cov["noise"]
    return float(sig / np.vdot(u, rest @ u).real)


def covariance_sinr_radar(ch, dv):
    cov = signal_covariances(ch, dv)
    u = dv.radar_filter
    rest = sum(cov["users"]) + cov["si"] + cov["noise"]
    return float(np.vdot(u, cov["echo"] @ u).real / np.vdot(u, rest @ u).real)


def generalized_top_eigvec(E2, E1):
    """Dominant generalized eigenvector of ``E2 v = lam E1 v``."""
    _, vecs = eigh(hermitian_part(E2), hermitian_part(E1))
    return vecs[:, -1]


def dual_qcqp(Q, q, constraints, mu0=None):
    """Lagrange dual of ``min x^H Q x - 2Re{q^H x}`` over convex quadratic constraints.

    `constraints` is a sequence of ``(A, a, c)`` meaning
    ``x^H A x - 2Re{a^H x} + c <= 0``. The concave dual is maximized over
    ``mu >= 0`` with L-BFGS-B. Its value is a certified lower bound on the
    primal optimum by weak duality, however loosely it was maximized.

    Returns ``(x, lower_bound, mu)`` where ``x`` is the Lagrangian minimizer
    at the final multipliers.
    """
    Q = hermitian_part(np.asarray(Q, complex))
    q = np.asarray(q, complex)
    As = [hermitian_part(np.asarray(A, complex)) for A, _, _ in constraints]
    avs = [np.asarray(a, complex) for _, a, _ in constraints]
    cs = np.array([float(c) for _, _, c in constraints])
    m = len(constraints)

    def inner(mu):
        H = Q + sum(mi * A for mi, A in zip(mu, As))
        r = q + sum(mi * a for mi, a in zip(mu, avs))
        lam, V = np.linalg.eigh(H)
        c = V.conj().T @ r
        null = lam <= 1e-13 * max(1.0, abs(lam[-1]))
        if np.any(null):
            # Unbounded below unless r avoids the null space.
            if np.linalg.norm(c[null]) > 1e-12 * max(1.0, np.linalg.norm(c)):
                return None, -np.inf
            lam = np.where(null, np.inf, lam)
        x = V @ (c / lam)
        return x, float(-np.real(np.vdot(r, x)) + mu @ cs)

    def cons(x):
        return np.array([np.real(np.vdot(x, A @ x)) - 2 * np.real(np.vdot(a, x)) + c
                         for A, a, c in zip(As, avs, cs)])

    def neg(mu):
        x, val = inner(mu)
        if x is None:
            return 1e300, -np.ones(m)
        return -val, -cons(x)

    start = np.ones(m) if mu0 is None else np.asarray(mu0, float)
    res = minimize(neg, start, jac=True, method="L-BFGS-B", bounds=[(0, None)] * m,
                   options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-13})
    x, val = inner(res.x)
    return x, val, res.x
