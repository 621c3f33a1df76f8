"""Sparse signal recovery when the measurement matrix is known only up to a
bounded additive error.

Submodules: :mod:`~auocs.linalg` (kernels and text format),
:mod:`~auocs.conic` (cone program solver), :mod:`~auocs.recovery`
(BP / AUO / DS / OMP), :mod:`~auocs.model` (instance generation and files),
:mod:`~auocs.bench` (Monte Carlo harness) and :mod:`~auocs.cli`.
"""

__version__ = "0.1.0"

from .conic import ConicProblem, NonNeg, SecondOrder, SolverSettings, Status, Zero, solve_conic
from .model import InstanceConfig, gen_instance, read_instance, write_instance
from .recovery import RecoveryMethod, auc_bound, recover, support_detect

__all__ = [
    "ConicProblem", "NonNeg", "SecondOrder", "SolverSettings", "Status", "Zero", "solve_conic",
    "InstanceConfig", "gen_instance", "read_instance", "write_instance",
    "RecoveryMethod", "auc_bound", "recover", "support_detect",
]
