"""
Control Module - bessopt
========================

Boucle de commande prédictive, budget journalier de cycles et persistance des runs.
"""

from .budget import FecBudget, daily_throughput, fec_budget_remaining
from .mpc import MpcConfig, RunResult, RunSummary, SolveStats, mpc_run
from .persist import load_run, save_run, write_json

__all__ = [
    "FecBudget",
    "daily_throughput",
    "fec_budget_remaining",
    "MpcConfig",
    "RunResult",
    "RunSummary",
    "SolveStats",
    "mpc_run",
    "load_run",
    "save_run",
    "write_json",
]
