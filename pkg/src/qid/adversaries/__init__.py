"""Attack strategies and Monte-Carlo security experiments."""

from .attacks import AttackSpec, BasesRule, Link, ReplayUser, Strategy, flip_message_bit, intercept_tap
from .experiments import (ExperimentReport, make_schedule, run_dishonest_server_experiment,
                          run_impersonation_experiment, run_mitm_experiment, run_reuse_experiment,
                          single_qubit_code, sj_collision_exact, sj_distinctness_audit)
