"""Matrix-factorization mechanisms for DP-SGD with learning-rate schedules."""

from .bounds import bounds_report, lb_multi, lb_single, rate_predictors
from .factorizations import Factorization, Strategy, bisr, build, factorize
from .metrics import ParticipationSchema, evaluate, max_se, mean_se, sensitivity_multi, sensitivity_single
from .noise import NoiseStream, SimConfig, dp_sgd_run
from .schedules import Schedule, make_schedule
from .workload import Workload, build_workload

__all__ = [
    "Factorization", "NoiseStream", "ParticipationSchema", "Schedule", "SimConfig", "Strategy",
    "Workload", "bisr", "bounds_report", "build", "build_workload", "dp_sgd_run", "evaluate",
    "factorize", "lb_multi", "lb_single", "make_schedule", "max_se", "mean_se", "rate_predictors",
    "sensitivity_multi", "sensitivity_single",
]
