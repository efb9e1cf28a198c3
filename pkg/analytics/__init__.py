"""
Analytics Module - bessopt
==========================

Indicateurs de run, caractérisation du rendement et ajustement des rendements
constants. Les campagnes d'expériences sont dans ``analytics.experiments``.
"""

from .efficiency import EfficiencyMap, characterize, default_power_grid, fit_constant_eta, fit_efficiencies
from .metrics import (
    LossBreakdown,
    correlation,
    energy_shortfall,
    fec_used,
    loss_decomposition,
    power_cdf,
    revenue,
    rte,
    share_above,
    to_long_csv,
)

__all__ = [
    "EfficiencyMap",
    "characterize",
    "default_power_grid",
    "fit_constant_eta",
    "fit_efficiencies",
    "LossBreakdown",
    "correlation",
    "energy_shortfall",
    "fec_used",
    "loss_decomposition",
    "power_cdf",
    "revenue",
    "rte",
    "share_above",
    "to_long_csv",
]
