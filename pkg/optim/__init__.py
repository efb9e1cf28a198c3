"""
Optim Module - bessopt
======================

Optimiseurs de planification : modèle linéaire à rendement constant et
modèle non linéaire à circuit équivalent. Les oracles de ``optim.oracle``
servent aux tests et ne sont pas importés ici.
"""

from .lp import LpParams, LpSolution, lp_optimize, lp_schedule_soc, lp_solve
from .nl import NlParams, NlReport, NlSolution, Violation, nl_optimize, nl_verify

__all__ = [
    "LpParams",
    "LpSolution",
    "lp_optimize",
    "lp_schedule_soc",
    "lp_solve",
    "NlParams",
    "NlReport",
    "NlSolution",
    "Violation",
    "nl_optimize",
    "nl_verify",
]
