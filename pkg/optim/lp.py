"""
Optimiseur linéaire à rendement constant
========================================

Variables : puissances de charge et de décharge par pas, en p.u. de p_max.

    soc_t = soc_{t-1} + (η·p_ch,t − p_dch,t / η)·Δt / E_N
    min Σ c_t·(p_ch,t − p_dch,t)·Δt
    Σ (p_ch,t + p_dch,t)·Δt ≤ 2·E_N·FEC

Résolution par ``scipy.optimize.linprog`` (HiGHS, simplexe dual) sur des
matrices creuses.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sps
from loguru import logger
from scipy.optimize import linprog

from core.errors import InfeasibleError, ParameterError, RangeError, SocBoundError, SolverError
from core.system import Schedule, SystemSpec
from market.prices import PriceSeries

from .debug import write_lp_model

SIMULTANEITY_TOL = 1e-7
SOC_TOL = 1e-9
HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}


@dataclass(frozen=True)
class LpParams:
    """Paramètres du modèle linéaire"""
    eta: float
    e_nom: float        # Wh
    p_max: float        # W
    soc_min: float
    soc_max: float
    fec_budget: float   # cycles sur l'horizon
    dt: float           # s
    terminal_soc_min: Optional[float] = None
    terminal_step: Optional[int] = None   # indice du pas portant la borne finale
    head_steps: Optional[int] = None      # premiers pas soumis à head_fec
    head_fec: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ParameterError("il faut 0 < eta <= 1", "eta")
        if self.fec_budget < 0:
            raise ParameterError("fec_budget doit être >= 0", "fec_budget")
        if self.e_nom <= 0 or self.p_max <= 0 or self.dt <= 0:
            raise ParameterError("e_nom, p_max et dt doivent être > 0", "e_nom")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise ParameterError("il faut 0 <= soc_min < soc_max <= 1", "soc_min")
        if self.head_fec is not None and self.head_fec < 0:
            raise ParameterError("head_fec doit être >= 0", "head_fec")

    @classmethod
    def from_system(cls, spec: SystemSpec, eta: float, dt: float, fec_budget: float, **kwargs) -> "LpParams":
        return cls(
            eta=eta,
            e_nom=spec.e_nom,
            p_max=spec.p_max,
            soc_min=spec.soc_min,
            soc_max=spec.soc_max,
            fec_budget=fec_budget,
            dt=dt,
            **kwargs,
        )

    @property
    def dt_h(self) -> float:
        return self.dt / 3600.0

    @property
    def soc_gain(self) -> float:
        """Variation de SOC pour un pas à p_max sans pertes"""
        return self.p_max * self.dt_h / self.e_nom


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Solution détaillée du modèle linéaire"""
    schedule: Schedule
    p_ch: np.ndarray
    p_dch: np.ndarray
    projections: int    # pas corrigés pour charge/décharge simultanées
    iterations: int


def lp_schedule_soc(params: LpParams, p_ac: np.ndarray, soc0: float) -> np.ndarray:
    """Trajectoire de SOC de fin de pas pour une puissance nette donnée"""
    p = np.asarray(p_ac, dtype=float)
    if np.any(np.abs(p) > params.p_max * (1 + 1e-9)):
        raise RangeError("puissance au-delà de p_max", "p_ac")

    increments = (params.eta * np.maximum(p, 0.0) - np.maximum(-p, 0.0) / params.eta)
    soc = soc0 + np.cumsum(increments * params.dt_h / params.e_nom)

    bad = np.flatnonzero((soc < params.soc_min - SOC_TOL) | (soc > params.soc_max + SOC_TOL))
    if len(bad):
        step = int(bad[0])
        raise SocBoundError(f"SOC {soc[step]:.6f} hors de [{params.soc_min}, {params.soc_max}]", step)
    return soc


def _cumulative(n: int) -> sps.csr_matrix:
    return sps.csr_matrix(np.tril(np.ones((n, n))))


def build_lp(params: LpParams, prices: np.ndarray, soc0: float):
    """Matrices du problème en p.u. : (c, A_ub, b_ub, bornes, libellés des lignes)"""
    n = len(prices)
    k = params.soc_gain
    eta = params.eta
    cum = _cumulative(n)
    soc_rows = sps.hstack([k * eta * cum, -(k / eta) * cum]).tocsr()

    blocks = [soc_rows, -soc_rows]
    rhs = [np.full(n, params.soc_max - soc0), np.full(n, soc0 - params.soc_min)]
    labels = [f"soc_max[{t}]" for t in range(n)] + [f"soc_min[{t}]" for t in range(n)]

    unit = params.p_max * params.dt_h
    blocks.append(sps.csr_matrix(np.ones((1, 2 * n))))
    rhs.append(np.array([2.0 * params.e_nom * params.fec_budget / unit]))
    labels.append("fec")

    if params.head_steps is not None and params.head_fec is not None and params.head_steps < n:
        head = np.zeros((1, 2 * n))
        head[0, :params.head_steps] = 1.0
        head[0, n:n + params.head_steps] = 1.0
        blocks.append(sps.csr_matrix(head))
        rhs.append(np.array([2.0 * params.e_nom * params.head_fec / unit]))
        labels.append("fec_head")

    if params.terminal_soc_min is not None:
        step = n - 1 if params.terminal_step is None else params.terminal_step
        if not 0 <= step < n:
            raise ParameterError(f"terminal_step {step} hors de l'horizon", "terminal_step")
        blocks.append(-soc_rows[step])
        rhs.append(np.array([soc0 - params.terminal_soc_min]))
        labels.append(f"soc_terminal[{step}]")

    scale = max(1.0, float(np.max(np.abs(prices))))
    c = np.concatenate([prices, -prices]) / scale
    a_ub = sps.vstack(blocks).tocsr()
    bounds = [(0.0, 1.0)] * (2 * n)
    return c, a_ub, np.concatenate(rhs), bounds, labels


def _repair(params: LpParams, x: np.ndarray, y: np.ndarray, soc0: float) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Suppression de la charge/décharge simultanée

    Projection (p_ch, p_dch) → (max(p, 0), max(−p, 0)) à puissance nette
    constante, puis passe avant réduisant la charge (ou la décharge) là où
    le SOC sortirait des bornes.
    """
    x = np.clip(x, 0.0, 1.0)
    y = np.clip(y, 0.0, 1.0)
    simultaneous = np.minimum(x, y) > SIMULTANEITY_TOL
    net = x - y
    x, y = np.maximum(net, 0.0), np.maximum(-net, 0.0)

    k, eta = params.soc_gain, params.eta
    soc = soc0
    for t in range(len(x)):
        nxt = soc + k * (eta * x[t] - y[t] / eta)
        if nxt > params.soc_max:
            x[t] = max(0.0, (params.soc_max - soc) / (k * eta))
            nxt = min(soc + k * eta * x[t], params.soc_max)
        elif nxt < params.soc_min:
            y[t] = max(0.0, (soc - params.soc_min) * eta / k)
            nxt = max(soc - k * y[t] / eta, params.soc_min)
        soc = nxt
    return x, y, int(np.sum(simultaneous))


def lp_solve(
    params: LpParams,
    prices: PriceSeries,
    soc0: float,
    debug_path: Optional[Union[str, Path]] = None,
) -> LpSolution:
    """Résolution du modèle linéaire avec détails de la solution"""
    if abs(prices.grid.dt - params.dt) > 1e-9:
        raise ParameterError(f"pas des prix ({prices.grid.dt} s) différent de dt ({params.dt} s)", "dt")
    if not params.soc_min - SOC_TOL <= soc0 <= params.soc_max + SOC_TOL:
        raise InfeasibleError(f"SOC initial {soc0} hors de [{params.soc_min}, {params.soc_max}]")
    soc0 = min(max(soc0, params.soc_min), params.soc_max)

    c_eur = prices.prices
    c, a_ub, b_ub, bounds, labels = build_lp(params, c_eur, soc0)
    if debug_path is not None:
        write_lp_model(debug_path, c, a_ub, b_ub, bounds, labels)

    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs-ds", options=HIGHS_OPTIONS)
    if res.status == 2:
        raise InfeasibleError(f"problème linéaire infaisable: {res.message}")
    if res.status != 0:
        raise SolverError(
            f"échec du solveur linéaire: {res.message}",
            {"status": res.status, "iterations": getattr(res, "nit", None)},
        )

    n = prices.grid.n_steps
    x, y, projections = _repair(params, res.x[:n], res.x[n:], soc0)
    if projections:
        logger.warning(f"Charge et décharge simultanées sur {projections} pas, projection sur la puissance nette")

    p_ac = (x - y) * params.p_max
    soc = lp_schedule_soc(params, p_ac, soc0)
    objective = float(np.sum(c_eur * p_ac) * params.dt_h / 1e6)
    schedule = Schedule(prices.grid, p_ac, soc, objective)

    logger.debug(f"LP résolu en {res.nit} itérations, objectif {objective:.4f} €")
    return LpSolution(schedule, x * params.p_max, y * params.p_max, projections, int(res.nit))


def lp_optimize(params: LpParams, prices: PriceSeries, soc0: float) -> Schedule:
    """Plan optimal du modèle linéaire (objectif négatif = bénéfice)"""
    return lp_solve(params, prices, soc0).schedule
