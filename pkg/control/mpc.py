"""
Commande prédictive en boucle fermée
====================================

À chaque itération : tranche de prix sur l'horizon, budget de cycles du
jour, optimisation depuis le SOC vrai de l'installation, exécution des
premiers pas du plan (bloqueur d'ordre zéro au pas de simulation), puis
avance de l'horizon d'action. Prévision parfaite : la tranche de prix est
la vérité.
"""

import time
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, Field

from analytics.efficiency import fit_efficiencies
from analytics.metrics import energy_shortfall, fec_used, revenue, rte
from core.errors import (
    ConfigurationError,
    GapError,
    InfeasibleError,
    ParameterError,
    SolverError,
    UndefinedMetricError,
)
from core.schema import MpcSection
from core.system import Scenario, Schedule, SystemSpec, TimeGrid, apply_soh
from market.prices import PriceSeries
from optim.lp import LpParams, lp_solve
from optim.nl import NlParams, nl_optimize
from plant.simulator import PlantSimulator, PlantState, StepResult, ledger_frame, log_clipping

from .budget import FecBudget, daily_throughput, fec_budget_remaining

OPTIMIZERS = ("lp", "nl")
TERMINAL_TOL = 1e-6
DISCREPANCY_TOL = 1e-6


@dataclass(frozen=True)
class MpcConfig:
    """Paramètres d'un run MPC"""
    optimizer: str = "lp"
    horizon_h: float = 12.0
    action_min: float = 15.0
    opt_dt: float = 900.0     # s
    sim_dt: float = 60.0      # s
    fec_per_day: float = 1.5
    days: float = 7.0
    terminal_soc: bool = True
    terminal_soc_min: Optional[float] = None  # défaut : SOC initial du run
    eta: Optional[float] = None               # LP ; ajusté si absent
    eta_conv: Optional[float] = None          # NL ; ajusté si absent
    r_factor: float = 1.0                     # NL : résistance du modèle = r_factor · R vraie
    max_iter: int = 100

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ParameterError(f"optimiseur inconnu: {self.optimizer}", "optimizer")
        if self.horizon_h <= 0 or self.action_min <= 0 or self.days <= 0:
            raise ParameterError("horizon_h, action_min et days doivent être > 0", "horizon_h")
        if self.action_min * 60.0 > self.horizon_h * 3600.0:
            raise ParameterError("l'horizon d'action dépasse l'horizon d'optimisation", "action_min")
        if not 0 < self.sim_dt <= self.opt_dt:
            raise ParameterError("il faut 0 < sim_dt <= opt_dt", "sim_dt")
        if self.fec_per_day < 0:
            raise ParameterError("fec_per_day doit être >= 0", "fec_per_day")
        if self.r_factor < 0:
            raise ParameterError("r_factor doit être >= 0", "r_factor")

    @classmethod
    def from_section(cls, section: MpcSection, optimizer: str, **overrides) -> "MpcConfig":
        values = dict(
            optimizer=optimizer,
            horizon_h=section.horizon_h,
            action_min=section.action_horizon_min,
            opt_dt=section.opt_dt_s,
            sim_dt=section.sim_dt_s,
            fec_per_day=section.fec_per_day,
            days=section.days,
            terminal_soc=section.terminal_soc,
            eta=section.eta,
            eta_conv=section.eta_conv,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def _steps(self, seconds: float, unit: float, name: str) -> int:
        count = seconds / unit
        if abs(count - round(count)) > 1e-9 or round(count) < 1:
            raise ConfigurationError(f"{name} ({seconds:g} s) n'est pas un multiple de {unit:g} s")
        return int(round(count))

    @property
    def horizon_steps(self) -> int:
        return self._steps(self.horizon_h * 3600.0, self.opt_dt, "horizon")

    @property
    def action_steps(self) -> int:
        return self._steps(self.action_min * 60.0, self.opt_dt, "horizon d'action")

    @property
    def run_steps(self) -> int:
        return self._steps(self.days * 86400.0, self.opt_dt, "durée du run")

    @property
    def sim_per_opt(self) -> int:
        return self._steps(self.opt_dt, self.sim_dt, "pas d'optimisation")


class SolveStats(BaseModel):
    """Statistiques des résolutions d'un run"""
    solves: int = 0
    iterations: int = 0
    degraded: int = 0
    projections: int = 0
    terminal_relaxed: int = 0
    failures: int = 0


class RunSummary(BaseModel):
    """Résumé d'un run, sérialisé en JSON (clés triées)"""
    optimizer: str = Field(..., description="lp ou nl")
    scenario: str = Field(..., description="Libellé du scénario")
    soh_r: float = Field(..., description="R / R_BOL")
    r_factor: float = Field(1.0, description="Facteur de résistance du modèle NL")
    eta: Optional[float] = Field(None, description="Rendement constant utilisé par le LP")
    eta_conv: Optional[float] = Field(None, description="Rendement onduleur utilisé par le NL")
    revenue_eur: float = Field(..., description="Recette −Σ c·p_livré·Δt")
    rte: Optional[float] = Field(None, description="Rendement aller-retour (None si indéfini)")
    e_imb_wh: float = Field(..., description="Écart cumulé planifié / livré")
    fec_used: float = Field(..., description="Cycles livrés")
    fec_scheduled: float = Field(..., description="Cycles planifiés exécutés")
    fec_discrepancy_max: float = Field(..., description="Écart journalier max planifié − livré [cycles]")
    soc_start: float
    soc_end: float
    steps: int = Field(..., description="Pas de simulation")
    stats: SolveStats = Field(default_factory=SolveStats)


@dataclass(eq=False)
class RunResult:
    """Résultat d'un run MPC : journal, résumé et durée de calcul"""
    ledger: pd.DataFrame
    summary: RunSummary
    config: MpcConfig
    wall_time_s: float = 0.0

    @property
    def revenue(self) -> float:
        return self.summary.revenue_eur

    @property
    def rte(self) -> Optional[float]:
        return self.summary.rte

    @property
    def e_imb(self) -> float:
        return self.summary.e_imb_wh

    @property
    def fec_used(self) -> float:
        return self.summary.fec_used


@dataclass
class _Window:
    """Paramètres d'une résolution"""
    prices: PriceSeries
    budget: FecBudget
    head_steps: Optional[int]
    terminal_step: Optional[int]
    terminal_soc_min: Optional[float]


class _Controller:
    """Un optimiseur paramétré pour un scénario, appelé à chaque itération"""

    def __init__(self, config: MpcConfig, spec: SystemSpec, eta: Optional[float], eta_conv: Optional[float]):
        self.config = config
        self.spec = spec
        self.eta = eta
        self.eta_conv = eta_conv
        self.stats = SolveStats()
        self._currents: Optional[np.ndarray] = None

    def _lp(self, window: _Window, soc: float, terminal: bool) -> Schedule:
        params = LpParams.from_system(
            self.spec,
            eta=self.eta,
            dt=self.config.opt_dt,
            fec_budget=window.budget.total,
            terminal_soc_min=window.terminal_soc_min if terminal else None,
            terminal_step=window.terminal_step if terminal else None,
            head_steps=window.head_steps,
            head_fec=window.budget.today if window.head_steps is not None else None,
        )
        solution = lp_solve(params, window.prices, soc)
        self.stats.iterations += solution.iterations
        self.stats.projections += solution.projections
        return solution.schedule

    def _nl(self, window: _Window, soc: float) -> Schedule:
        params = NlParams.from_system(
            self.spec,
            eta_conv=self.eta_conv,
            dt=self.config.opt_dt,
            fec_budget=window.budget.total,
            r_factor=self.config.r_factor,
            terminal_soc_min=window.terminal_soc_min,
            terminal_step=window.terminal_step,
            head_steps=window.head_steps,
            head_fec=window.budget.today if window.head_steps is not None else None,
            max_iter=self.config.max_iter,
        )
        warm = None
        if self._currents is not None:
            shift = self.config.action_steps
            warm = np.concatenate([self._currents[shift:], np.zeros(shift)])
        solution = nl_optimize(params, window.prices, soc, warm_start=warm)
        self._currents = solution.i
        self.stats.iterations += solution.iterations
        self.stats.projections += solution.projections
        if solution.degraded:
            self.stats.degraded += 1
        return solution.schedule

    def solve(self, window: _Window, soc: float) -> Schedule:
        self.stats.solves += 1
        try:
            if self.config.optimizer == "lp":
                try:
                    return self._lp(window, soc, terminal=True)
                except InfeasibleError:
                    if window.terminal_step is None:
                        raise
                    logger.warning("Borne de SOC final infaisable, résolution sans cette borne")
                    self.stats.terminal_relaxed += 1
                    return self._lp(window, soc, terminal=False)

            schedule = self._nl(window, soc)
            if window.terminal_step is not None:
                reached = schedule.soc_pred[window.terminal_step]
                if reached < window.terminal_soc_min - TERMINAL_TOL:
                    logger.warning(f"SOC final {reached:.4f} sous la borne {window.terminal_soc_min:.4f}")
                    self.stats.terminal_relaxed += 1
            return schedule
        except (SolverError, InfeasibleError) as e:
            # Repos sur l'horizon, le run continue
            logger.warning(f"Échec de l'optimiseur ({e}), plan au repos")
            self.stats.failures += 1
            self.stats.degraded += 1
            self._currents = None
            n = window.prices.grid.n_steps
            return Schedule(window.prices.grid, np.zeros(n), np.full(n, soc), 0.0)


def _check_alignment(config: MpcConfig, t_start: pd.Timestamp) -> None:
    offset = (t_start - t_start.normalize()).total_seconds()
    action_s = config.action_steps * config.opt_dt
    if (86400.0 % action_s) > 1e-9 or (offset % action_s) > 1e-9:
        raise ConfigurationError(
            f"minuit doit coïncider avec une frontière d'horizon d'action ({action_s:g} s)"
        )


def _today(results: List[StepResult]) -> pd.DataFrame:
    """Colonnes du journal utiles au budget, pour les pas du jour courant"""
    return pd.DataFrame({
        "timestamp": [r.timestamp for r in results],
        "dt_s": [r.dt for r in results],
        "p_delivered_w": [r.p_ac_actual for r in results],
    })


def _summary_stats(ledger: pd.DataFrame, e_nom: float) -> Tuple[float, float]:
    """(cycles planifiés exécutés, écart journalier maximal planifié − livré en cycles)"""
    scheduled = daily_throughput(ledger, "p_scheduled_w") / (2.0 * e_nom)
    delivered = daily_throughput(ledger, "p_delivered_w") / (2.0 * e_nom)
    gap = (scheduled - delivered).abs()
    return float(scheduled.sum()), float(gap.max()) if len(gap) else 0.0


def mpc_run(
    config: MpcConfig,
    spec: SystemSpec,
    scenario: Scenario,
    prices: PriceSeries,
    soc0: float,
) -> RunResult:
    """
    Run MPC complet de ``config.days`` jours à partir du début de ``prices``

    La série de prix doit couvrir le run plus un horizon. Les rendements
    constants manquants sont ajustés sur la courbe de rendement du scénario.
    """
    started = time.perf_counter()
    if not spec.soc_min <= soc0 <= spec.soc_max:
        raise ParameterError(f"SOC initial {soc0} hors de [{spec.soc_min}, {spec.soc_max}]", "soc0")

    n_run = config.run_steps
    n_horizon = config.horizon_steps
    n_action = config.action_steps
    n_sub = config.sim_per_opt
    t_start = prices.grid.t_start
    _check_alignment(config, t_start)

    try:
        opt_prices = prices.resample(TimeGrid(t_start, config.opt_dt, n_run + n_horizon))
        sim_prices = prices.resample(TimeGrid(t_start, config.sim_dt, n_run * n_sub))
    except GapError as e:
        raise ConfigurationError(f"série de prix trop courte pour le run et l'horizon: {e}")

    true_spec = apply_soh(spec, scenario)
    eta, eta_conv = config.eta, config.eta_conv
    if (config.optimizer == "lp" and eta is None) or (config.optimizer == "nl" and eta_conv is None):
        fitted_eta, fitted_conv = fit_efficiencies(spec, scenario)
        eta = fitted_eta if eta is None else eta
        eta_conv = fitted_conv if eta_conv is None else eta_conv

    controller = _Controller(
        config, true_spec,
        eta if config.optimizer == "lp" else None,
        eta_conv if config.optimizer == "nl" else None,
    )
    plant = PlantSimulator(true_spec)
    state = PlantState(soc=soc0, clock=t_start)
    terminal_level = config.terminal_soc_min if config.terminal_soc_min is not None else soc0

    logger.info(
        f"Run MPC {config.optimizer.upper()} {scenario.label}: {config.days:g} j, "
        f"horizon {config.horizon_h:g} h, action {config.action_min:g} min"
    )

    results: List[StepResult] = []
    day_start = 0
    for k in range(0, n_run, n_action):
        window_prices = opt_prices.slice(k, n_horizon)
        if state.clock == state.clock.normalize():
            day_start = len(results)
        budget = fec_budget_remaining(
            _today(results[day_start:]), state.clock, config.fec_per_day, spec.e_nom, config.horizon_h
        )
        today_steps = int(round(budget.hours_today * 3600.0 / config.opt_dt))
        # borne de SOC final sur la seule dernière itération du run
        last = k + n_action >= n_run
        terminal_step = n_run - k - 1 if config.terminal_soc and last else None

        window = _Window(
            prices=window_prices,
            budget=budget,
            head_steps=today_steps if today_steps < n_horizon else None,
            terminal_step=terminal_step,
            terminal_soc_min=terminal_level if terminal_step is not None else None,
        )
        schedule = controller.solve(window, state.soc)

        n_exec = min(n_action, n_run - k)
        targets = np.repeat(schedule.p_ac[:n_exec], n_sub)
        executed, state = plant.run(state, targets, config.sim_dt)
        results.extend(executed)

    log_clipping(results)
    ledger = ledger_frame(results)
    ledger["price_eur_mwh"] = sim_prices.prices[:len(ledger)]

    try:
        run_rte: Optional[float] = rte(ledger, spec.e_nom)
    except UndefinedMetricError:
        run_rte = None

    fec_scheduled, discrepancy = _summary_stats(ledger, spec.e_nom)
    if discrepancy > DISCREPANCY_TOL:
        logger.warning(f"Écart de débit journalier planifié/livré jusqu'à {discrepancy:.4f} cycle")

    summary = RunSummary(
        optimizer=config.optimizer,
        scenario=scenario.label,
        soh_r=scenario.soh_r,
        r_factor=config.r_factor,
        eta=eta if config.optimizer == "lp" else None,
        eta_conv=eta_conv if config.optimizer == "nl" else None,
        revenue_eur=revenue(ledger),
        rte=run_rte,
        e_imb_wh=energy_shortfall(ledger),
        fec_used=fec_used(ledger, spec.e_nom),
        fec_scheduled=fec_scheduled,
        fec_discrepancy_max=discrepancy,
        soc_start=soc0,
        soc_end=float(ledger["soc_end"].iloc[-1]),
        steps=len(ledger),
        stats=controller.stats,
    )
    wall = time.perf_counter() - started
    logger.success(
        f"Run {config.optimizer.upper()} {scenario.label} terminé en {wall:.1f} s : "
        f"recette {summary.revenue_eur:.2f} €, E_imb {summary.e_imb_wh / 1000:.3f} kWh"
    )
    return RunResult(ledger=ledger, summary=summary, config=config, wall_time_s=wall)


def config_dict(config: MpcConfig) -> Dict[str, Any]:
    """Paramètres du run pour l'instantané de configuration"""
    return asdict(config)
