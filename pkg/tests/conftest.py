import numpy as np
import pytest

from fdisac.metrics import AuxState, DesignVariables
from fdisac.scenario import ScenarioConfig, generate_channels

# Outcome lines appended by the acceptance suite, printed after the run.
ACCEPTANCE_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def small_channels(seed=0, m=4, nt=2, nr=2, k=2, **kw):
    cfg = ScenarioConfig(n_ris=m, n_tx=nt, n_rx=nr, n_users=k, **kw)
    return generate_channels(cfg, seed)


def random_design(ch, rng, full_power=True):
    """Random design point: W at full power, powers inside budgets, random filters."""
    W = crandn(rng, ch.n_tx, ch.n_tx)
    if full_power:
        W *= np.sqrt(ch.bs_power) / np.linalg.norm(W)
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, ch.n_ris))
    q = rng.uniform(0.2, 1.0, ch.n_users) * ch.user_powers
    return DesignVariables(W, phi, q, crandn(rng, ch.n_users, ch.n_rx), crandn(rng, ch.n_rx))


def random_aux(k, rng):
    return AuxState(crandn(rng, k) * 1e3, rng.uniform(0.5, 3.0, k))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_qcqp(rng, n, active=True):
    """Random convex QCQP with a strictly feasible point; `active` pushes the
    unconstrained minimizer outside the constraint set."""
    from fdisac.qcqp import QcqpProblem

    A = crandn(rng, n, n)
    Q = A @ A.conj().T + 0.1 * np.eye(n)
    r = int(rng.integers(1, n + 1))
    B = crandn(rng, n, r)
    Qc = B @ B.conj().T
    qc = crandn(rng, n)
    x0 = 0.1 * crandn(rng, n)
    val = np.vdot(x0, Qc @ x0).real - 2 * np.real(np.vdot(qc, x0))
    qs = -val - rng.uniform(0.1, 1.0)
    xstar = crandn(rng, n) * (5.0 if active else 0.0)
    if not active:
        xstar = x0
    return QcqpProblem(Q, Q @ xstar, Qc, qc, qs)


def feasible_instance(seed=0, m=16, **kw):
    """Channels plus a radar-feasible starting design and its optimal auxiliaries."""
    from fdisac.metrics import optimal_aux
    from fdisac.orchestrator import init_feasible

    cfg = ScenarioConfig(n_ris=m, **kw)
    ch = generate_channels(cfg, seed)
    dv = init_feasible(ch, seed)
    return ch, dv, optimal_aux(ch, dv)
