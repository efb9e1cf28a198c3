"""
Indicateurs calculés à partir du journal de simulation
======================================================

Toutes les fonctions lisent uniquement les colonnes du journal (voir
``plant.simulator.LEDGER_COLUMNS`` et ``price_eur_mwh`` ajoutée par le MPC),
de sorte qu'un journal relu depuis son CSV redonne exactement les mêmes
valeurs.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from core.errors import ParameterError, UndefinedMetricError


def _hours(ledger: pd.DataFrame) -> np.ndarray:
    return ledger["dt_s"].to_numpy(dtype=float) / 3600.0


def _require(ledger: pd.DataFrame) -> None:
    if ledger is None or len(ledger) == 0:
        raise ParameterError("journal vide", "ledger")


def energy_in_out(ledger: pd.DataFrame):
    """(E_in, E_out) [Wh] de la puissance AC livrée, séparée par signe"""
    _require(ledger)
    p = ledger["p_delivered_w"].to_numpy(dtype=float)
    hours = _hours(ledger)
    return float(np.sum(np.maximum(p, 0.0) * hours)), float(np.sum(np.maximum(-p, 0.0) * hours))


def rte(ledger: pd.DataFrame, e_nom_wh: float) -> float:
    """
    Rendement aller-retour corrigé de la variation de SOC

        RTE = E_out / (E_in − E_N·(SOC_fin − SOC_début))
    """
    e_in, e_out = energy_in_out(ledger)
    soc_start = float(ledger["soc_start"].iloc[0])
    soc_end = float(ledger["soc_end"].iloc[-1])
    denominator = e_in - e_nom_wh * (soc_end - soc_start)
    if denominator <= 0:
        raise UndefinedMetricError(f"dénominateur du RTE non positif ({denominator:.6g} Wh)")
    return e_out / denominator


def energy_shortfall(ledger: pd.DataFrame) -> float:
    """Écart cumulé planifié / livré Σ|p_opt − p_réel|·Δt [Wh]"""
    _require(ledger)
    gap = np.abs(ledger["p_scheduled_w"].to_numpy(dtype=float) - ledger["p_delivered_w"].to_numpy(dtype=float))
    return float(np.sum(gap * _hours(ledger)))


def revenue(ledger: pd.DataFrame) -> float:
    """Recette [€] = −Σ c·p_livré·Δt"""
    _require(ledger)
    p = ledger["p_delivered_w"].to_numpy(dtype=float)
    price = ledger["price_eur_mwh"].to_numpy(dtype=float)
    return float(-np.sum(price * p * _hours(ledger)) / 1e6)


def fec_used(ledger: pd.DataFrame, e_nom_wh: float) -> float:
    """Cycles équivalents complets livrés (côté AC)"""
    _require(ledger)
    throughput = np.sum(np.abs(ledger["p_delivered_w"].to_numpy(dtype=float)) * _hours(ledger))
    return float(throughput / (2.0 * e_nom_wh))


def share_above(ledger: pd.DataFrame, threshold_w: float) -> float:
    """Part du temps où |p_livré| > threshold_w"""
    _require(ledger)
    hours = _hours(ledger)
    above = np.abs(ledger["p_delivered_w"].to_numpy(dtype=float)) > threshold_w
    return float(np.sum(hours[above]) / np.sum(hours))


def power_cdf(ledger: pd.DataFrame, bins: Sequence[float], p_rated: Optional[float] = None) -> pd.DataFrame:
    """
    Fonction de répartition de |p_livré| pondérée par la durée

    ``cdf`` en ``power_w`` est la part du temps où |p| ≤ power_w.
    """
    _require(ledger)
    edges = np.asarray(bins, dtype=float)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterError("bornes strictement croissantes requises", "bins")
    if edges[0] > 0 or (p_rated is not None and edges[-1] < p_rated):
        raise ParameterError("les bornes doivent couvrir [0, p_rated]", "bins")

    hours = _hours(ledger)
    power = np.abs(ledger["p_delivered_w"].to_numpy(dtype=float))
    order = np.argsort(power, kind="stable")
    cumulative = np.cumsum(hours[order]) / np.sum(hours)
    count = np.searchsorted(power[order], edges, side="right")
    cdf = np.where(count > 0, cumulative[np.maximum(count - 1, 0)], 0.0)
    return pd.DataFrame({"power_w": edges, "cdf": cdf})


@dataclass(frozen=True)
class LossBreakdown:
    """Pertes d'un run, parts relatives à l'énergie AC chargée"""
    battery_wh: float
    converter_wh: float
    e_charged_wh: float

    @property
    def total_wh(self) -> float:
        return self.battery_wh + self.converter_wh

    @property
    def battery_share(self) -> float:
        return self.battery_wh / self.e_charged_wh if self.e_charged_wh > 0 else 0.0

    @property
    def converter_share(self) -> float:
        return self.converter_wh / self.e_charged_wh if self.e_charged_wh > 0 else 0.0


def loss_decomposition(ledger: pd.DataFrame) -> LossBreakdown:
    e_in, _ = energy_in_out(ledger)
    return LossBreakdown(
        battery_wh=float(ledger["loss_battery_wh"].sum()),
        converter_wh=float(ledger["loss_converter_wh"].sum()),
        e_charged_wh=e_in,
    )


def correlation(x: Sequence[float], y: Sequence[float]) -> float:
    """Coefficient de Pearson"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise UndefinedMetricError("au moins deux couples de valeurs requis")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedMetricError("série constante, corrélation indéfinie")
    return float(stats.pearsonr(x, y)[0])


def to_long_csv(
    frame: pd.DataFrame,
    path: Union[str, Path],
    id_vars: Sequence[str],
    var_name: str = "metric",
) -> Path:
    """Export en format long (une valeur par ligne) prêt à tracer"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    long = frame.melt(id_vars=list(id_vars), var_name=var_name, value_name="value")
    long.to_csv(path, index=False, float_format="%.17g")
    return path
