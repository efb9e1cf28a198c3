"""
Caractérisation du rendement et ajustement des rendements constants
===================================================================

Points de fonctionnement stationnaires en décharge : pour une puissance AC de
sortie ``p`` et un SOC donné, l'onduleur demande p + loss(p) à la batterie,
qui fournit cette puissance avec le courant racine de v·i = p_dc.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from core.errors import FitError, ParameterError
from core.system import Scenario, SystemSpec, apply_soh, pack_params
from plant.battery import current_for_power
from plant.converter import converter_loss

DEFAULT_SOC_GRID = (0.1, 0.5, 0.9)
FIT_SOC = 0.5
COMPONENTS = ("system", "battery", "converter")


def default_power_grid(p_rated: float) -> np.ndarray:
    """5 % à 100 % de la puissance nominale par pas de 5 %"""
    return p_rated * 0.05 * np.arange(1, 21)


@dataclass(frozen=True, eq=False)
class EfficiencyMap:
    """Rendements en décharge ; NaN pour un point de fonctionnement inaccessible"""
    soc_grid: np.ndarray
    power_grid: np.ndarray   # W, puissance AC de sortie
    system: np.ndarray
    battery: np.ndarray
    converter: np.ndarray

    def __post_init__(self):
        shape = (len(self.soc_grid), len(self.power_grid))
        for name in COMPONENTS:
            values = np.asarray(getattr(self, name), dtype=float)
            if values.shape != shape:
                raise ParameterError(f"dimensions de '{name}' {values.shape} != {shape}", name)
            present = values[~np.isnan(values)]
            if np.any(present <= 0) or np.any(present > 1 + 1e-12):
                raise ParameterError(f"rendements '{name}' hors de (0, 1]", name)

    def row(self, soc: float, component: str = "system") -> np.ndarray:
        idx = np.flatnonzero(np.isclose(self.soc_grid, soc, atol=1e-12))
        if len(idx) == 0:
            raise FitError(f"pas de ligne SOC={soc} dans la carte de rendement")
        return np.asarray(getattr(self, component))[idx[0]]

    def to_frame(self) -> pd.DataFrame:
        """Format long : soc, power_w, component, efficiency"""
        soc, power = np.meshgrid(self.soc_grid, self.power_grid, indexing="ij")
        frames = [
            pd.DataFrame({
                "soc": soc.ravel(),
                "power_w": power.ravel(),
                "component": name,
                "efficiency": np.asarray(getattr(self, name)).ravel(),
            })
            for name in COMPONENTS
        ]
        return pd.concat(frames, ignore_index=True)


def characterize(
    spec: SystemSpec,
    scenario: Scenario,
    soc_grid: Sequence[float] = DEFAULT_SOC_GRID,
    power_grid: Optional[Sequence[float]] = None,
) -> EfficiencyMap:
    """Carte de rendement système, batterie et onduleur"""
    aged = apply_soh(spec, scenario)
    pack = pack_params(aged)
    ocv = aged.pack_ocv

    socs = np.asarray(soc_grid, dtype=float)
    powers = default_power_grid(spec.p_max) if power_grid is None else np.asarray(power_grid, dtype=float)
    if np.any((socs < 0) | (socs > 1)):
        raise ParameterError("SOC hors de [0, 1]", "soc_grid")
    if np.any(powers <= 0) or np.any(powers > spec.p_max * (1 + 1e-9)):
        raise ParameterError("puissances hors de (0, p_rated]", "power_grid")

    shape = (len(socs), len(powers))
    system, battery, converter = np.full(shape, np.nan), np.full(shape, np.nan), np.full(shape, np.nan)
    absent = 0
    for r, soc in enumerate(socs):
        e0 = float(ocv(soc))
        for c, p in enumerate(powers):
            p_dc = p + float(converter_loss(aged.converter, p))
            i = current_for_power(e0, pack.r, -p_dc)
            if np.isnan(i) or abs(i) > pack.i_max * (1 + 1e-9) or e0 + i * pack.r < pack.v_min:
                absent += 1
                continue
            chemical = -e0 * i
            converter[r, c] = p / p_dc
            battery[r, c] = p_dc / chemical
            system[r, c] = p / chemical

    if absent:
        logger.info(f"{absent} points de fonctionnement inaccessibles ({scenario.label})")
    return EfficiencyMap(socs, powers, system, battery, converter)


def fit_constant_eta(
    efficiency_map: EfficiencyMap,
    include_battery: bool = True,
    soc: float = FIT_SOC,
) -> float:
    """
    Rendement constant équivalent sur la ligne SOC = ``soc``

    Les pertes L(p) = p·(1/rendement − 1) sont ajustées par moindres carrés
    pondérés (poids 1/p) sur le modèle L = x·p, soit x = ΣL / Σp, ce qui
    reproduit la perte intégrée le long de la courbe. Rendement aller
    η = 1 / (1 + x). ``include_battery=False`` donne le rendement onduleur seul.
    """
    component = "system" if include_battery else "converter"
    eff = efficiency_map.row(soc, component)
    powers = efficiency_map.power_grid
    present = ~np.isnan(eff)
    if not present.any():
        raise FitError(f"aucun point exploitable à SOC={soc}")

    losses = powers[present] * (1.0 / eff[present] - 1.0)
    x = float(np.sum(losses) / np.sum(powers[present]))
    return 1.0 / (1.0 + x)


def fit_efficiencies(spec: SystemSpec, scenario: Scenario) -> Tuple[float, float]:
    """(η système, η onduleur) ajustés à SOC 50 %"""
    efficiency_map = characterize(spec, scenario, soc_grid=(FIT_SOC,))
    eta = fit_constant_eta(efficiency_map, include_battery=True)
    eta_conv = fit_constant_eta(efficiency_map, include_battery=False)
    logger.debug(f"Rendements ajustés {scenario.label}: η={eta:.5f}, η_conv={eta_conv:.5f}")
    return eta, eta_conv
