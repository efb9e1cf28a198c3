"""
Séries de prix de l'électricité
===============================

Import CSV (``timestamp,price_eur_mwh``), rééchantillonnage sur une grille
cible et générateur synthétique déterministe.

Générateur synthétique :

    c(t) = base + A·cos(2π(h − 8)/12) + σ·z_t

avec ``h`` l'heure fractionnaire du jour, ce qui place les pointes à 08:00 et
20:00 et les creux à 02:00 et 14:00 ; ``z_t`` provient de
``numpy.random.default_rng(seed).standard_normal(n)`` (PCG64).
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd
from loguru import logger

from core.errors import FormatError, GapError, ParameterError
from core.system import TimeGrid

PathLike = Union[str, Path]

HEADER = ["timestamp", "price_eur_mwh"]
PEAK_HOUR = 8.0
PEAK_PERIOD_H = 12.0


def _naive_utc(index: pd.DatetimeIndex) -> pd.DatetimeIndex:
    if index.tz is not None:
        return index.tz_convert("UTC").tz_localize(None)
    return index


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Prix par pas de la grille [€/MWh] ; les prix négatifs sont admis"""
    grid: TimeGrid
    prices: np.ndarray

    def __post_init__(self):
        prices = np.array(self.prices, dtype=float)
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)
        if len(prices) != self.grid.n_steps:
            raise ParameterError("nombre de prix différent du nombre de pas", "prices")
        if not np.all(np.isfinite(prices)):
            raise ParameterError("prix non finis", "prices")

    def __len__(self) -> int:
        return self.grid.n_steps

    def slice(self, start: int, n_steps: int) -> "PriceSeries":
        if start < 0 or start + n_steps > self.grid.n_steps:
            raise ParameterError(f"tranche [{start}, {start + n_steps}) hors de la série", "prices")
        return PriceSeries(self.grid.sub(start, n_steps), self.prices[start:start + n_steps])

    def resample(self, target: TimeGrid) -> "PriceSeries":
        """Rééchantillonnage sur ``target`` (voir ``resample_prices``)"""
        return PriceSeries(target, resample_prices(self.grid, self.prices, target))

    def time_weighted_mean(self) -> float:
        return float(np.mean(self.prices))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"timestamp": self.grid.timestamps(), "price_eur_mwh": self.prices})

    def to_csv(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = self.to_frame()
        frame["timestamp"] = frame["timestamp"].dt.strftime("%Y-%m-%dT%H:%M:%S")
        frame.to_csv(path, index=False, float_format="%.17g")
        return path


def resample_prices(source: TimeGrid, prices: np.ndarray, target: TimeGrid) -> np.ndarray:
    """
    Prix moyens pondérés dans le temps sur chaque pas de ``target``

    Lorsque le pas cible divise le pas source et que les grilles sont alignées,
    c'est un bloqueur d'ordre zéro exact (chaque prix répété). Lorsque le pas
    cible est un multiple du pas source, c'est la moyenne des blocs. Sinon,
    intégration de la fonction en escalier.
    """
    src_ns = int(source.step.value)
    tgt_ns = int(target.step.value)
    offset_ns = int((target.t_start - source.t_start).value)

    if offset_ns < 0:
        raise GapError(f"série de prix absente à {target.t_start}", target.t_start)
    if target.t_end > source.t_end:
        missing = max(source.t_end, target.t_start)
        raise GapError(f"série de prix absente à partir de {missing}", missing)

    if src_ns % tgt_ns == 0 and offset_ns % tgt_ns == 0:
        starts = offset_ns + tgt_ns * np.arange(target.n_steps, dtype=np.int64)
        return np.asarray(prices)[starts // src_ns].copy()

    if tgt_ns % src_ns == 0 and offset_ns % src_ns == 0:
        ratio = tgt_ns // src_ns
        first = offset_ns // src_ns
        block = np.asarray(prices)[first:first + ratio * target.n_steps]
        return block.reshape(target.n_steps, ratio).mean(axis=1)

    # Intégrale cumulée de la fonction en escalier, linéaire entre bords source
    edges = np.arange(source.n_steps + 1, dtype=float) * source.dt
    integral = np.concatenate([[0.0], np.cumsum(np.asarray(prices) * source.dt)])
    bounds = offset_ns / 1e9 + np.arange(target.n_steps + 1, dtype=float) * target.dt
    return np.diff(np.interp(bounds, edges, integral)) / target.dt


def load_prices(path: PathLike, target_grid: TimeGrid) -> PriceSeries:
    """
    Lecture d'un CSV ``timestamp,price_eur_mwh`` et rééchantillonnage

    Horodatages ISO-8601 strictement croissants, pas uniforme. Les horodatages
    avec fuseau sont convertis en UTC naïf.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FormatError(f"CSV de prix illisible ({path}): {e}")

    if list(frame.columns) != HEADER:
        raise FormatError(f"en-tête attendu '{','.join(HEADER)}'", line=1)
    if frame.empty:
        raise FormatError("CSV de prix vide", line=2)

    stamps = pd.to_datetime(frame["timestamp"], errors="coerce", format="ISO8601", utc=True)
    values = pd.to_numeric(frame["price_eur_mwh"], errors="coerce")
    bad = stamps.isna() | values.isna() | ~np.isfinite(values.fillna(0.0))
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise FormatError(f"ligne illisible: {frame.iloc[row].tolist()}", line=row + 2)

    index = _naive_utc(pd.DatetimeIndex(stamps))
    steps = np.diff(index.asi8)
    if np.any(steps <= 0):
        row = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise FormatError("horodatages non strictement croissants", line=row + 2)

    if len(steps) == 0:
        step_ns = int(target_grid.step.value)
    else:
        step_ns = int(steps.min())
        if np.any(steps % step_ns != 0):
            row = int(np.flatnonzero(steps % step_ns != 0)[0]) + 1
            raise FormatError("pas de temps non uniforme", line=row + 2)
        if np.any(steps != step_ns):
            row = int(np.flatnonzero(steps != step_ns)[0])
            gap_start = index[row] + pd.Timedelta(step_ns, unit="ns")
            raise GapError(f"intervalle manquant à partir de {gap_start}", gap_start)

    source = TimeGrid(index[0], step_ns / 1e9, len(index))
    prices = values.to_numpy(dtype=float)
    logger.debug(f"{len(index)} prix lus depuis {path} (pas {source.dt:g} s)")
    return PriceSeries(target_grid, resample_prices(source, prices, target_grid))


def synth_prices(
    seed: int,
    grid: TimeGrid,
    base: float = 100.0,
    daily_amplitude: float = 50.0,
    noise_sd: float = 0.0,
) -> PriceSeries:
    """Série synthétique déterministe (forme fermée en tête de module)"""
    if daily_amplitude < 0:
        raise ParameterError("daily_amplitude doit être >= 0", "daily_amplitude")
    if noise_sd < 0:
        raise ParameterError("noise_sd doit être >= 0", "noise_sd")

    stamps = grid.timestamps()
    hours = (stamps - stamps.normalize()).total_seconds().to_numpy() / 3600.0
    shape = np.cos(2.0 * np.pi * (hours - PEAK_HOUR) / PEAK_PERIOD_H)
    noise = np.random.default_rng(seed).standard_normal(grid.n_steps)

    return PriceSeries(grid, base + daily_amplitude * shape + noise_sd * noise)
