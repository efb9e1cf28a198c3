"""
Simulateur de l'installation réelle
===================================

Enchaîne onduleur et batterie à chaque pas de simulation. Les consignes
irréalisables sont écrêtées (puissance nominale → courant → tension → SOC)
et chaque écrêtage est journalisé.
"""

from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from core.errors import ParameterError
from core.system import OcvCurve, PackParams, SystemSpec, pack_params

from .battery import BatteryStep, battery_step, energy_content_wh
from .converter import converter_ac_to_dc, converter_dc_to_ac

LEDGER_COLUMNS = [
    "timestamp",
    "dt_s",
    "p_scheduled_w",
    "p_delivered_w",
    "p_dc_w",
    "i_a",
    "v_v",
    "soc_start",
    "soc_end",
    "loss_converter_wh",
    "loss_battery_wh",
    "e_stored_wh",
    "clip_reason",
    "clip_energy_wh",
]


@dataclass(frozen=True)
class PlantState:
    """État vrai du système simulé"""
    soc: float
    throughput_today: float = 0.0  # Wh AC
    clock: pd.Timestamp = pd.Timestamp("2021-01-01")

    def __post_init__(self):
        object.__setattr__(self, "clock", pd.Timestamp(self.clock))
        if not 0.0 <= self.soc <= 1.0:
            raise ParameterError(f"SOC hors de [0, 1]: {self.soc}", "soc")
        if self.throughput_today < 0:
            raise ParameterError("throughput_today doit être >= 0", "throughput_today")


@dataclass(frozen=True)
class StepResult:
    """Bilan d'un pas de simulation"""
    timestamp: pd.Timestamp
    dt: float              # s
    p_ac_target: float     # W
    p_ac_actual: float     # W
    p_dc: float            # W
    i: float               # A
    v: float               # V
    soc_start: float
    soc_end: float
    loss_converter: float  # Wh
    loss_battery: float    # Wh
    e_stored_wh: float     # Wh, énergie entrée dans la source OCV
    clip_reason: Optional[str] = None

    @property
    def clipped(self) -> bool:
        return self.clip_reason is not None

    @property
    def clip_energy_wh(self) -> float:
        return abs(self.p_ac_target - self.p_ac_actual) * self.dt / 3600.0


class PlantSimulator:
    """Installation simulée : paramètres du pack précalculés pour un SystemSpec"""

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.pack: PackParams = pack_params(spec)
        self.ocv: OcvCurve = spec.pack_ocv

    def _battery(self, soc: float, p_dc: float, dt: float) -> BatteryStep:
        return battery_step(
            self.pack, self.ocv, soc, p_dc, dt, self.spec.soc_min, self.spec.soc_max
        )

    def step(self, state: PlantState, p_target: float, dt: float) -> Tuple[StepResult, PlantState]:
        """Exécution d'une consigne AC pendant ``dt`` secondes"""
        converter = self.spec.converter
        dt_h = dt / 3600.0

        reason = None
        p_ac = float(p_target)
        if abs(p_ac) > converter.p_rated:
            p_ac = float(np.sign(p_ac) * converter.p_rated)
            reason = "rating"

        p_dc_target = float(converter_ac_to_dc(converter, p_ac))
        cell = self._battery(state.soc, p_dc_target, dt)

        if cell.clipped:
            reason = cell.clip_reason
            p_ac = float(converter_dc_to_ac(converter, cell.p_dc))
            # Puissance DC sous les pertes à vide ou inversion de sens : repos
            idle = abs(p_ac) > abs(p_target) or p_ac * p_target < 0 or (p_ac == 0 and cell.p_dc != 0)
            if idle:
                p_ac = 0.0
                cell = self._battery(state.soc, 0.0, dt)

        result = StepResult(
            timestamp=state.clock,
            dt=dt,
            p_ac_target=float(p_target),
            p_ac_actual=p_ac,
            p_dc=cell.p_dc,
            i=cell.i,
            v=cell.v,
            soc_start=state.soc,
            soc_end=cell.soc,
            loss_converter=(p_ac - cell.p_dc) * dt_h,
            loss_battery=cell.loss_wh,
            e_stored_wh=cell.stored_wh,
            clip_reason=reason,
        )

        clock = state.clock + pd.Timedelta(seconds=dt)
        if clock.normalize() != state.clock.normalize():
            throughput = 0.0
        else:
            throughput = state.throughput_today + abs(p_ac) * dt_h
        soc_next = min(max(cell.soc, 0.0), 1.0)
        return result, replace(state, soc=soc_next, throughput_today=throughput, clock=clock)

    def run(self, state0: PlantState, targets: Sequence[float], dt: float) -> Tuple[List[StepResult], PlantState]:
        results: List[StepResult] = []
        state = state0
        for p_target in np.asarray(targets, dtype=float):
            result, state = self.step(state, float(p_target), dt)
            results.append(result)
        return results, state


def log_clipping(results: Sequence[StepResult]) -> None:
    """Résumé des écrêtages d'une suite de pas"""
    clipped = [r for r in results if r.clipped]
    if clipped:
        energy = sum(r.clip_energy_wh for r in clipped)
        logger.warning(
            f"Écrêtage sur {len(clipped)}/{len(results)} pas ({energy / 1000:.3f} kWh non livrés)"
        )


def simulate(
    spec: SystemSpec,
    state0: PlantState,
    p_ac_targets: Sequence[float],
    dt: float,
) -> Tuple[List[StepResult], PlantState]:
    """Simulation d'une suite de consignes AC au pas ``dt`` [s]"""
    targets = np.asarray(p_ac_targets, dtype=float)
    if not np.all(np.isfinite(targets)):
        raise ParameterError("consignes non finies", "p_ac_targets")
    if dt <= 0:
        raise ParameterError("dt doit être > 0", "dt")
    sim = PlantSimulator(spec)
    results, state = sim.run(state0, targets, dt)
    log_clipping(results)
    if results:
        content = energy_content_wh(sim.pack, sim.ocv, state.soc) - energy_content_wh(sim.pack, sim.ocv, state0.soc)
        drift = sum(r.e_stored_wh for r in results) - content
        logger.debug(f"Énergie OCV comptée {content + drift:.1f} Wh, contenu réel {content:.1f} Wh")
    return results, state


def ledger_frame(results: Sequence[StepResult]) -> pd.DataFrame:
    """Journal de simulation sous forme de DataFrame"""
    rows = [
        {
            "timestamp": r.timestamp,
            "dt_s": r.dt,
            "p_scheduled_w": r.p_ac_target,
            "p_delivered_w": r.p_ac_actual,
            "p_dc_w": r.p_dc,
            "i_a": r.i,
            "v_v": r.v,
            "soc_start": r.soc_start,
            "soc_end": r.soc_end,
            "loss_converter_wh": r.loss_converter,
            "loss_battery_wh": r.loss_battery,
            "e_stored_wh": r.e_stored_wh,
            "clip_reason": r.clip_reason or "",
            "clip_energy_wh": r.clip_energy_wh,
        }
        for r in results
    ]
    return pd.DataFrame(rows, columns=LEDGER_COLUMNS)


def write_ledger(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Export CSV du journal (précision aller-retour)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = frame.copy()
    out["timestamp"] = pd.to_datetime(out["timestamp"]).dt.strftime("%Y-%m-%dT%H:%M:%S")
    out.to_csv(path, index=False, float_format="%.17g")
    return path


def read_ledger(path: Union[str, Path]) -> pd.DataFrame:
    frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    frame["timestamp"] = pd.to_datetime(frame["timestamp"])
    return frame
