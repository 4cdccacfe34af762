"""Estimator-style front end for one optimization run."""

from sklearn.base import BaseEstimator

from .beamformer import AdmmConfig
from .metrics import is_feasible, sinr_radar, sum_rate
from .orchestrator import RunOptions, run
from .ris_pdd import PddConfig


class JointDesigner(BaseEstimator):
    """Jointly design W, RIS phases, powers and filters for one channel draw.

    ``fit(channels)`` runs the block coordinate ascent; hyperparameters are
    plain constructor arguments, so ``get_params``/``set_params`` and
    ``sklearn.base.clone`` work as usual.

    Attributes set by ``fit``
    -------------------------
    design_ : DesignVariables
    report_ : RunReport
    sum_rate_ : float
        Final sum-rate in nats/s/Hz.
    n_iter_ : int
    """

    def __init__(self, mode="full", stop_tol=1e-4, max_outer=50, upsilon=1.0,
                 admm_max_iters=200, rho0=1.0, penalty_shrink_c=0.85,
                 pdd_outer_max_iters=120, random_state=0):
        self.mode = mode
        self.stop_tol = stop_tol
        self.max_outer = max_outer
        self.upsilon = upsilon
        self.admm_max_iters = admm_max_iters
        self.rho0 = rho0
        self.penalty_shrink_c = penalty_shrink_c
        self.pdd_outer_max_iters = pdd_outer_max_iters
        self.random_state = random_state

    def _options(self):
        return RunOptions(
            mode=self.mode, stop_tol=self.stop_tol, max_outer=self.max_outer,
            pdd=PddConfig(rho0=self.rho0, penalty_shrink_c=self.penalty_shrink_c,
                          outer_max_iters=self.pdd_outer_max_iters),
            admm=AdmmConfig(upsilon=self.upsilon, max_iters=self.admm_max_iters),
        )

    def fit(self, X, y=None):
        """Optimize for the :class:`~fdisac.scenario.ChannelSet` `X`; `y` is ignored."""
        opts = self._options()
        self.channels_ = X.without_ris() if self.mode == "noris" else X
        self.report_ = run(X, opts, seed=self.random_state)
        self.design_ = self.report_.design
        self.sum_rate_ = self.report_.sum_rate
        self.n_iter_ = self.report_.iterations
        return self

    def _check_fitted(self):
        if not hasattr(self, "design_"):
            raise AttributeError("JointDesigner is not fitted; call fit first")

    def predict(self, X=None):
        """The fitted design (the channel argument is accepted for API symmetry)."""
        self._check_fitted()
        return self.design_

    def score(self, X=None, y=None):
        """Sum-rate of the fitted design on `X` (default: the fitted channels)."""
        self._check_fitted()
        ch = self.channels_ if X is None else (X.without_ris() if self.mode == "noris" else X)
        return sum_rate(ch, self.design_)

    def radar_sinr(self, X=None):
        self._check_fitted()
        return sinr_radar(self.channels_ if X is None else X, self.design_)

    def is_feasible(self, tol=1e-6):
        self._check_fitted()
        return is_feasible(self.channels_, self.design_, tol)
