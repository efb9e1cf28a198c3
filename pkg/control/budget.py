"""
Budget journalier de cycles équivalents complets
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from core.errors import ParameterError


@dataclass(frozen=True)
class FecBudget:
    """Budget d'un horizon, en cycles, séparé en part du jour courant et part suivante"""
    today: float
    later: float
    hours_today: float

    @property
    def total(self) -> float:
        return self.today + self.later


def delivered_today_wh(ledger: Optional[pd.DataFrame], clock: pd.Timestamp) -> float:
    """Énergie AC livrée depuis minuit et avant ``clock`` [Wh]"""
    if ledger is None or len(ledger) == 0:
        return 0.0
    stamps = pd.to_datetime(ledger["timestamp"])
    today = (stamps >= clock.normalize()) & (stamps < clock)
    p = ledger.loc[today, "p_delivered_w"].to_numpy(dtype=float)
    dt = ledger.loc[today, "dt_s"].to_numpy(dtype=float)
    return float(np.sum(np.abs(p) * dt) / 3600.0)


def fec_budget_remaining(
    ledger: Optional[pd.DataFrame],
    clock: pd.Timestamp,
    fec_per_day: float,
    e_nom: float,
    horizon_h: float,
) -> FecBudget:
    """
    Budget de cycles pour un horizon démarrant à ``clock``

    Part du jour : reste du plafond journalier (débit livré déjà consommé
    déduit, plancher à 0), limité au prorata des heures d'horizon tombant
    avant minuit. Au-delà de minuit, chaque heure reçoit un budget neuf
    fec_per_day / 24.
    """
    if fec_per_day < 0:
        raise ParameterError("fec_per_day doit être >= 0", "fec_per_day")
    if horizon_h <= 0:
        raise ParameterError("horizon_h doit être > 0", "horizon_h")

    clock = pd.Timestamp(clock)
    to_midnight = (clock.normalize() + pd.Timedelta(days=1) - clock).total_seconds() / 3600.0
    hours_today = min(horizon_h, to_midnight)

    used = delivered_today_wh(ledger, clock) / (2.0 * e_nom)
    remaining = max(fec_per_day - used, 0.0)
    today = min(remaining, fec_per_day * hours_today / 24.0)
    later = fec_per_day * (horizon_h - hours_today) / 24.0
    return FecBudget(today=today, later=later, hours_today=hours_today)


def daily_throughput(ledger: pd.DataFrame, column: str = "p_delivered_w") -> pd.Series:
    """Débit AC par jour calendaire [Wh]"""
    stamps = pd.to_datetime(ledger["timestamp"])
    energy = np.abs(ledger[column].to_numpy(dtype=float)) * ledger["dt_s"].to_numpy(dtype=float) / 3600.0
    return pd.Series(energy, index=stamps).groupby(stamps.dt.normalize().to_numpy()).sum()
