"""
Types du domaine : cellule, pack, convertisseur, courbe OCV, grille temporelle
==============================================================================

Toutes les valeurs sont immuables après construction. Les unités sont le
système SI sauf mention contraire : Ah pour les charges, Wh pour les énergies,
secondes pour les pas de temps.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, ParameterError

ArrayLike = Union[float, Sequence[float], np.ndarray]

INTERPOLATIONS = ("linear", "cubic")


def _frozen(values: ArrayLike) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class CellSpec:
    """Caractéristiques d'une cellule (fiche technique)"""
    q_nom: float        # Ah
    v_nom: float        # V
    v_min: float        # V
    v_max: float        # V
    r_internal: float   # Ohm
    c_rate_max: float   # 1/h
    i_max: Optional[float] = None  # A, limite propre de la cellule si elle existe

    def __post_init__(self):
        if self.q_nom <= 0:
            raise ParameterError("q_nom doit être > 0", "q_nom")
        if not 0 < self.v_min < self.v_nom < self.v_max:
            raise ParameterError("il faut 0 < v_min < v_nom < v_max", "v_nom")
        if self.r_internal < 0:
            raise ParameterError("r_internal doit être >= 0", "r_internal")
        if self.c_rate_max <= 0:
            raise ParameterError("c_rate_max doit être > 0", "c_rate_max")
        if self.i_max is not None and self.i_max <= 0:
            raise ParameterError("i_max doit être > 0", "i_max")


@dataclass(frozen=True)
class PackLayout:
    """Montage série / parallèle des cellules"""
    series: int
    parallel: int

    def __post_init__(self):
        if self.series < 1 or self.parallel < 1:
            raise ParameterError("series et parallel doivent être >= 1", "layout")


@dataclass(frozen=True)
class OcvCurve:
    """
    Tension à vide en fonction du SOC

    Interpolation linéaire par morceaux (défaut) ou cubique monotone (PCHIP),
    ce qui garantit une courbe croissante dans les deux cas.
    """
    soc: Tuple[float, ...]
    voltage: Tuple[float, ...]
    interpolation: str = "linear"
    _spline: Optional[PchipInterpolator] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "soc", tuple(float(s) for s in self.soc))
        object.__setattr__(self, "voltage", tuple(float(v) for v in self.voltage))
        socs = np.asarray(self.soc)
        volts = np.asarray(self.voltage)

        if len(socs) < 2 or len(socs) != len(volts):
            raise ParameterError("au moins deux points (soc, tension) de même longueur", "ocv")
        if np.any(np.diff(socs) <= 0):
            raise ParameterError("les SOC de la courbe OCV doivent être strictement croissants", "ocv.soc")
        if socs[0] != 0.0 or socs[-1] != 1.0:
            raise ParameterError("la courbe OCV doit couvrir [0, 1]", "ocv.soc")
        if np.any(np.diff(volts) <= 0):
            raise ParameterError("la courbe OCV doit être strictement croissante", "ocv.voltage")
        if volts[0] <= 0:
            raise ParameterError("tensions OCV positives requises", "ocv.voltage")
        if self.interpolation not in INTERPOLATIONS:
            raise ParameterError(f"interpolation inconnue: {self.interpolation}", "ocv.interpolation")

        if self.interpolation == "cubic":
            object.__setattr__(self, "_spline", PchipInterpolator(socs, volts, extrapolate=True))

    def __call__(self, soc: ArrayLike) -> Union[float, np.ndarray]:
        """Évaluation vectorisée, sans contrôle de domaine"""
        if self._spline is not None:
            values = self._spline(soc)
        else:
            values = np.interp(soc, self.soc, self.voltage)
        return float(values) if np.ndim(values) == 0 else values

    def slope(self, soc: ArrayLike) -> Union[float, np.ndarray]:
        """Dérivée dOCV/dSOC [V par unité de SOC]"""
        if self._spline is not None:
            values = self._spline.derivative()(soc)
        else:
            socs = np.asarray(self.soc)
            volts = np.asarray(self.voltage)
            idx = np.clip(np.searchsorted(socs, soc, side="right") - 1, 0, len(socs) - 2)
            values = (volts[idx + 1] - volts[idx]) / (socs[idx + 1] - socs[idx])
        return float(values) if np.ndim(values) == 0 else values

    def integral(self, soc: ArrayLike) -> Union[float, np.ndarray]:
        """Primitive ∫_0^soc ocv(s) ds [V par unité de SOC] ; × Q_N donne des Wh"""
        if self._spline is not None:
            values = self._spline.antiderivative()(soc)
        else:
            socs = np.asarray(self.soc)
            volts = np.asarray(self.voltage)
            slopes = np.diff(volts) / np.diff(socs)
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (volts[1:] + volts[:-1]) * np.diff(socs))])
            idx = np.clip(np.searchsorted(socs, soc, side="right") - 1, 0, len(socs) - 2)
            ds = np.asarray(soc, dtype=float) - socs[idx]
            values = cum[idx] + volts[idx] * ds + 0.5 * slopes[idx] * ds ** 2
        return float(values) if np.ndim(values) == 0 else values

    def scaled(self, factor: float) -> "OcvCurve":
        """Courbe multipliée par ``factor`` (mise à l'échelle série)"""
        return OcvCurve(self.soc, tuple(v * factor for v in self.voltage), self.interpolation)

    @property
    def v_low(self) -> float:
        return self.voltage[0]

    @property
    def v_high(self) -> float:
        return self.voltage[-1]


@dataclass(frozen=True)
class ConverterSpec:
    """Onduleur : puissance nominale et coefficients de pertes (p.u. de p_rated)"""
    p_rated: float
    a: float = 0.0  # pertes constantes
    b: float = 0.0  # pertes linéaires
    c: float = 0.0  # pertes quadratiques

    def __post_init__(self):
        if self.p_rated <= 0:
            raise ParameterError("p_rated doit être > 0", "p_rated")
        if min(self.a, self.b, self.c) < 0:
            raise ParameterError("coefficients de pertes négatifs", "loss_coeffs")
        if self.efficiency_at_rated <= 0.9:
            raise ParameterError(
                f"rendement à puissance nominale trop faible ({self.efficiency_at_rated:.3f})",
                "loss_coeffs",
            )

    @property
    def efficiency_at_rated(self) -> float:
        return 1.0 - (self.a + self.b + self.c)


@dataclass(frozen=True)
class PackParams:
    """Paramètres du pack dérivés des cellules"""
    q_n: float      # Ah
    r: float        # Ohm
    v_min: float    # V
    v_max: float    # V
    v_nom: float    # V
    i_max: float    # A
    series: int
    parallel: int


@dataclass(frozen=True)
class SystemSpec:
    """Paramétrage complet de l'installation"""
    cell: CellSpec
    layout: PackLayout
    converter: ConverterSpec
    ocv: OcvCurve
    soc_min: float
    soc_max: float
    e_nom: float  # Wh
    v_nom_system: Optional[float] = None  # V, tension nominale déclarée

    def __post_init__(self):
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise ParameterError("il faut 0 <= soc_min < soc_max <= 1", "soc_min")
        if self.ocv.v_low < self.cell.v_min - 1e-12 or self.ocv.v_high > self.cell.v_max + 1e-12:
            raise ParameterError("la courbe OCV sort des limites de tension de la cellule", "ocv")
        if self.e_nom <= 0:
            raise ParameterError("e_nom doit être > 0", "e_nom")

        q_n = self.cell.q_nom * self.layout.parallel
        e_cells = q_n * self.cell.v_nom * self.layout.series
        if abs(self.e_nom - e_cells) > 0.02 * e_cells:
            raise ParameterError(
                f"e_nom ({self.e_nom:.0f} Wh) incohérent avec Q_N·v_nom·s ({e_cells:.0f} Wh)",
                "e_nom",
            )
        if self.v_nom_system is not None:
            e_system = q_n * self.v_nom_system
            if abs(self.e_nom - e_system) > 0.02 * e_system:
                raise ParameterError(
                    f"e_nom incohérent avec la tension système ({e_system:.0f} Wh)", "v_nom_system"
                )

    @property
    def p_max(self) -> float:
        return self.converter.p_rated

    @property
    def pack_ocv(self) -> OcvCurve:
        return self.ocv.scaled(self.layout.series)


@dataclass(frozen=True)
class Scenario:
    """Scénario de vieillissement : SOH_R = R / R_BOL"""
    soh_r: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.soh_r <= 0:
            raise ParameterError("soh_r doit être > 0", "soh_r")
        if not self.label:
            object.__setattr__(self, "label", f"SOH_R={self.soh_r:g}")


@dataclass(frozen=True)
class TimeGrid:
    """Grille temporelle uniforme"""
    t_start: pd.Timestamp
    dt: float  # s
    n_steps: int

    def __post_init__(self):
        object.__setattr__(self, "t_start", pd.Timestamp(self.t_start))
        if self.dt <= 0:
            raise ParameterError("dt doit être > 0", "dt")
        if self.n_steps < 1:
            raise ParameterError("n_steps doit être >= 1", "n_steps")

    @property
    def dt_h(self) -> float:
        return self.dt / 3600.0

    @property
    def step(self) -> pd.Timedelta:
        return pd.Timedelta(seconds=self.dt)

    @property
    def t_end(self) -> pd.Timestamp:
        return self.t_start + self.step * self.n_steps

    @property
    def duration_h(self) -> float:
        return self.n_steps * self.dt_h

    def timestamps(self) -> pd.DatetimeIndex:
        return pd.date_range(self.t_start, periods=self.n_steps, freq=self.step)

    def sub(self, start: int, n_steps: int) -> "TimeGrid":
        """Sous-grille de ``n_steps`` pas à partir de l'indice ``start``"""
        return TimeGrid(self.t_start + self.step * start, self.dt, n_steps)


@dataclass(frozen=True, eq=False)
class Schedule:
    """Plan de puissance AC (charge > 0) et SOC prédit en fin de pas"""
    grid: TimeGrid
    p_ac: np.ndarray
    soc_pred: np.ndarray
    objective_value: float  # €

    def __post_init__(self):
        object.__setattr__(self, "p_ac", _frozen(self.p_ac))
        object.__setattr__(self, "soc_pred", _frozen(self.soc_pred))
        if len(self.p_ac) != self.grid.n_steps or len(self.soc_pred) != self.grid.n_steps:
            raise ParameterError("longueurs du plan incohérentes avec la grille", "schedule")

    def check(self, p_max: float, soc_min: float, soc_max: float, tol: float = 1e-6) -> None:
        """Vérifie les bornes de puissance et de SOC"""
        if np.any(np.abs(self.p_ac) > p_max * (1 + tol)):
            raise ParameterError("puissance planifiée au-delà de p_max", "p_ac")
        if np.any(self.soc_pred < soc_min - tol) or np.any(self.soc_pred > soc_max + tol):
            raise ParameterError("SOC prédit hors bornes", "soc_pred")


def apply_soh(spec: SystemSpec, scenario: Scenario) -> SystemSpec:
    """Mise à l'échelle de la résistance interne : r = r_BOL · SOH_R"""
    if scenario.soh_r <= 0:
        raise ParameterError("soh_r doit être > 0", "soh_r")
    cell = replace(spec.cell, r_internal=spec.cell.r_internal * scenario.soh_r)
    return replace(spec, cell=cell)


def pack_params(spec: SystemSpec) -> PackParams:
    """Paramètres du pack : Q_N = Q·p, R = R·s/p, v = v·s, i = i·p"""
    cell, layout = spec.cell, spec.layout
    s, p = layout.series, layout.parallel

    i_cell_max = cell.c_rate_max * cell.q_nom
    if cell.i_max is not None:
        i_cell_max = min(i_cell_max, cell.i_max)

    return PackParams(
        q_n=cell.q_nom * p,
        r=cell.r_internal * s / p,
        v_min=cell.v_min * s,
        v_max=cell.v_max * s,
        v_nom=cell.v_nom * s,
        i_max=i_cell_max * p,
        series=s,
        parallel=p,
    )


def ocv_eval(curve: OcvCurve, soc: float) -> float:
    """Tension à vide interpolée ; SOC hors de [0, 1] refusé"""
    if not 0.0 <= soc <= 1.0:
        raise DomainError(f"SOC hors domaine: {soc}", "soc")
    return float(curve(soc))
