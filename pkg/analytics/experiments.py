"""
Campagnes d'expériences : benchmark et sensibilité
==================================================

Chaque run MPC est indépendant ; les runs sont répartis sur un pool de
processus et les résultats sont remis dans l'ordre déclaré avant émission.
"""

import concurrent.futures
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, Field

from control.mpc import MpcConfig, RunResult, mpc_run
from control.persist import save_run, write_json
from core.errors import ParameterError, UndefinedMetricError
from core.schema import SystemConfigFile
from core.system import Scenario, SystemSpec
from market.prices import PriceSeries

from .efficiency import fit_efficiencies
from .metrics import correlation, loss_decomposition, power_cdf, share_above, to_long_csv

PathLike = Union[str, Path]

SWEEP_KINDS = {
    "lp-eta": (0.90, 0.97),
    "nl-r-factor": (0.5, 1.5),
}
HIGH_POWER_SHARE = 0.9
CDF_BINS = 101


@dataclass(frozen=True)
class SweepSpec:
    """Balayage : η du LP ou facteur de résistance du modèle NL"""
    kind: str
    values: Tuple[float, ...]
    scenario: Scenario = field(default_factory=Scenario)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.kind not in SWEEP_KINDS:
            raise ParameterError(f"balayage inconnu: {self.kind}", "kind")
        if not self.values:
            raise ParameterError("balayage vide", "values")
        lo, hi = SWEEP_KINDS[self.kind]
        outside = [v for v in self.values if not lo - 1e-12 <= v <= hi + 1e-12]
        if outside:
            raise ParameterError(f"valeurs hors de [{lo}, {hi}]: {outside}", "values")

    @property
    def optimizer(self) -> str:
        return "lp" if self.kind == "lp-eta" else "nl"


class BenchmarkCell(BaseModel):
    """Une case du tableau de benchmark (optimiseur × scénario)"""
    optimizer: str
    scenario: str
    soh_r: float
    revenue_eur: float
    rte: Optional[float] = None
    e_imb_wh: float
    fec_used: float
    loss_battery_wh: float
    loss_converter_wh: float
    loss_battery_share: float = Field(..., description="Pertes batterie / énergie AC chargée")
    loss_converter_share: float = Field(..., description="Pertes onduleur / énergie AC chargée")
    high_power_share: float = Field(..., description="Part du temps à |p| > 0.9·p_rated")


class BenchmarkSummary(BaseModel):
    cells: List[BenchmarkCell]
    revenue_rte_correlation: Optional[float] = None
    seed: Optional[int] = None


class SweepPoint(BaseModel):
    """Un point de balayage et ses écarts à la référence"""
    kind: str
    value: float
    baseline: bool = False
    scenario: str
    revenue_eur: float
    e_imb_wh: float
    rte: Optional[float] = None
    delta_revenue_eur: float
    delta_e_imb_wh: float


@dataclass(eq=False)
class BenchmarkResult:
    summary: BenchmarkSummary
    runs: List[RunResult]
    cdf: pd.DataFrame

    @property
    def cells(self) -> List[BenchmarkCell]:
        return self.summary.cells

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([c.model_dump() for c in self.cells])


@dataclass(eq=False)
class SweepResult:
    points: List[SweepPoint]
    runs: List[RunResult]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([p.model_dump() for p in self.points])


def _run(job: Tuple[MpcConfig, SystemSpec, Scenario, PriceSeries, float]) -> RunResult:
    config, spec, scenario, prices, soc0 = job
    return mpc_run(config, spec, scenario, prices, soc0)


def run_jobs(jobs: Sequence[Tuple[MpcConfig, SystemSpec, Scenario, PriceSeries, float]], workers: int = 1) -> List[RunResult]:
    """Exécution des runs, en parallèle si workers > 1 ; ordre des jobs conservé"""
    if workers <= 1 or len(jobs) <= 1:
        return [_run(job) for job in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as executor:
        return list(executor.map(_run, jobs))


def _cell(result: RunResult, spec: SystemSpec) -> BenchmarkCell:
    losses = loss_decomposition(result.ledger)
    summary = result.summary
    return BenchmarkCell(
        optimizer=summary.optimizer,
        scenario=summary.scenario,
        soh_r=summary.soh_r,
        revenue_eur=summary.revenue_eur,
        rte=summary.rte,
        e_imb_wh=summary.e_imb_wh,
        fec_used=summary.fec_used,
        loss_battery_wh=losses.battery_wh,
        loss_converter_wh=losses.converter_wh,
        loss_battery_share=losses.battery_share,
        loss_converter_share=losses.converter_share,
        high_power_share=share_above(result.ledger, HIGH_POWER_SHARE * spec.p_max),
    )


def run_benchmark(
    spec: SystemSpec,
    scenarios: Sequence[Scenario],
    prices: PriceSeries,
    config: MpcConfig,
    soc0: float = 0.5,
    workers: int = 1,
    optimizers: Sequence[str] = ("lp", "nl"),
    seed: Optional[int] = None,
) -> BenchmarkResult:
    """Les deux optimiseurs sur tous les scénarios ; corrélation recette / RTE"""
    if not scenarios:
        raise ParameterError("au moins un scénario", "scenarios")

    jobs = [
        (replace(config, optimizer=optimizer), spec, scenario, prices, soc0)
        for optimizer in optimizers
        for scenario in scenarios
    ]
    logger.info(f"Benchmark : {len(jobs)} runs sur {workers} processus")
    runs = run_jobs(jobs, workers)
    cells = [_cell(run, spec) for run in runs]

    r = None
    pairs = [(c.revenue_eur, c.rte) for c in cells if c.rte is not None]
    if len(pairs) >= 2:
        try:
            r = correlation([p[0] for p in pairs], [p[1] for p in pairs])
        except UndefinedMetricError as e:
            logger.warning(f"Corrélation recette/RTE indéfinie: {e}")

    bins = np.linspace(0.0, spec.p_max, CDF_BINS)
    cdf = pd.concat(
        [
            power_cdf(run.ledger, bins, spec.p_max).assign(
                optimizer=run.summary.optimizer, scenario=run.summary.scenario
            )
            for run in runs
        ],
        ignore_index=True,
    )[["optimizer", "scenario", "power_w", "cdf"]]

    logger.success(f"Benchmark terminé ({len(cells)} cases, r = {r if r is None else round(r, 4)})")
    return BenchmarkResult(BenchmarkSummary(cells=cells, revenue_rte_correlation=r, seed=seed), runs, cdf)


def run_sensitivity(
    spec: SystemSpec,
    sweep: SweepSpec,
    prices: PriceSeries,
    config: MpcConfig,
    soc0: float = 0.5,
    workers: int = 1,
) -> SweepResult:
    """
    Balayage de sensibilité

    lp-eta : η du LP imposé, référence au η ajusté sur la courbe de rendement.
    nl-r-factor : l'installation garde sa résistance vraie, le modèle NL
    utilise facteur·R ; référence au facteur 1. La référence est toujours le
    premier point, avec des écarts nuls.
    """
    scenario = sweep.scenario
    if sweep.kind == "lp-eta":
        baseline = config.eta if config.eta is not None else fit_efficiencies(spec, scenario)[0]
        field_name = "eta"
    else:
        baseline = 1.0
        field_name = "r_factor"

    values = [baseline] + [v for v in sweep.values if v != baseline]
    jobs = [
        (replace(config, optimizer=sweep.optimizer, **{field_name: value}), spec, scenario, prices, soc0)
        for value in values
    ]
    logger.info(f"Sensibilité {sweep.kind} ({scenario.label}) : {len(jobs)} runs")
    runs = run_jobs(jobs, workers)

    base = runs[0].summary
    points = [
        SweepPoint(
            kind=sweep.kind,
            value=value,
            baseline=index == 0,
            scenario=scenario.label,
            revenue_eur=run.summary.revenue_eur,
            e_imb_wh=run.summary.e_imb_wh,
            rte=run.summary.rte,
            delta_revenue_eur=run.summary.revenue_eur - base.revenue_eur,
            delta_e_imb_wh=run.summary.e_imb_wh - base.e_imb_wh,
        )
        for index, (value, run) in enumerate(zip(values, runs))
    ]
    logger.success(f"Sensibilité {sweep.kind} terminée")
    return SweepResult(points, runs)


def _run_dir_name(run: RunResult) -> str:
    summary = run.summary
    label = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in summary.scenario)
    return f"{summary.optimizer}_{label}"


def write_benchmark(
    result: BenchmarkResult,
    out_dir: PathLike,
    cfg: SystemConfigFile,
    run_args: Dict[str, Any],
) -> Path:
    """Tableau CSV, résumé JSON, FdR de puissance et un répertoire par run"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = result.frame()
    frame.to_csv(out_dir / "benchmark.csv", index=False, float_format="%.17g")
    to_long_csv(frame, out_dir / "benchmark_long.csv", id_vars=["optimizer", "scenario"])
    result.cdf.to_csv(out_dir / "power_cdf.csv", index=False, float_format="%.17g")
    write_json(out_dir / "summary.json", result.summary)
    for run in result.runs:
        save_run(run, out_dir / _run_dir_name(run), cfg, run_args)
    return out_dir


def write_sweep(result: SweepResult, out_dir: PathLike, cfg: SystemConfigFile, run_args: Dict[str, Any]) -> Path:
    """Tableau CSV du balayage (large et long) et résumé JSON"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = result.frame()
    frame.to_csv(out_dir / "sweep.csv", index=False, float_format="%.17g")
    to_long_csv(frame.drop(columns=["baseline"]), out_dir / "sweep_long.csv", id_vars=["kind", "scenario", "value"])
    write_json(out_dir / "summary.json", {"points": [p.model_dump(mode="json") for p in result.points]})
    for index, run in enumerate(result.runs):
        save_run(run, out_dir / f"{_run_dir_name(run)}_{index:02d}", cfg, run_args)
    return out_dir
