"""Joint beamforming, RIS phase, power and filter design for full-duplex ISAC uplink."""

from .beamformer import AdmmConfig, admm_solve, optimize_beamformer
from .coeffs import (build_filter_problems, build_p2_coeffs, build_p5_coeffs, build_p7_coeffs,
                     build_power_problem, build_w_problem)
from .estimator import JointDesigner
from .filters import (mmse_filters, update_aux, update_beta, update_omega, update_radar_filter,
                      update_user_filters)
from .metrics import (AuxState, DesignVariables, constraint_report, is_feasible, optimal_aux,
                      sinr_radar, sinr_user, sinr_users, sum_rate, surrogate_sum_rate, user_rates)
from .orchestrator import InfeasibleScenarioError, RunOptions, RunReport, init_feasible, run
from .power import solve_power
from .qcqp import InfeasibleError, QcqpProblem, solve_ball_qp, solve_qcqp
from .ris_pdd import PddConfig, pdd_optimize_phase
from .scenario import ChannelSet, ScenarioConfig, generate_channels, load_config, save_config

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig", "AuxState", "ChannelSet", "DesignVariables", "InfeasibleError",
    "InfeasibleScenarioError", "JointDesigner", "PddConfig", "QcqpProblem", "RunOptions",
    "RunReport", "ScenarioConfig", "admm_solve", "build_filter_problems", "build_p2_coeffs",
    "build_p5_coeffs", "build_p7_coeffs", "build_power_problem", "build_w_problem",
    "constraint_report", "generate_channels", "init_feasible", "is_feasible", "load_config",
    "mmse_filters", "optimal_aux", "optimize_beamformer", "pdd_optimize_phase", "run",
    "save_config", "sinr_radar", "sinr_user", "sinr_users", "solve_ball_qp", "solve_power",
    "solve_qcqp", "sum_rate", "surrogate_sum_rate", "update_aux", "update_beta", "update_omega",
    "update_radar_filter", "update_user_filters", "user_rates",
]
