"""
Oracles de vérification par programmation dynamique
===================================================

Utilisés par les tests pour borner la qualité des optimiseurs sur de petites
instances :

- ``lp_grid_oracle`` : énumération exacte du modèle linéaire lorsque la
  puissance est restreinte aux multiples de p_max / levels ;
- ``dp_oracle`` : programmation dynamique rétrograde du modèle non linéaire
  sur une grille de SOC et de courant.

Le plafond de cycles n'est pas pris en compte par ``dp_oracle`` ; les tests
l'utilisent avec un budget non contraignant.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger

from core.errors import OracleError, ParameterError
from market.prices import PriceSeries

from .lp import LpParams
from .nl import NlParams

MAX_ORACLE_STEPS = 24
GRID_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Meilleur plan discrétisé"""
    objective: float          # €
    p_ac: np.ndarray          # W
    soc: np.ndarray           # SOC de fin de pas
    i: Optional[np.ndarray] = None  # A, oracle non linéaire uniquement


def _shift(values: np.ndarray, offset: int, axis: int) -> np.ndarray:
    """values[k - offset] le long de ``axis``, +inf en dehors"""
    out = np.full_like(values, np.inf)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    src[axis] = slice(0, values.shape[axis] - offset)
    dst[axis] = slice(offset, None)
    out[tuple(dst)] = values[tuple(src)]
    return out


def _trailing_min(values: np.ndarray, width: int, axis: int) -> np.ndarray:
    """min(values[k - width + 1 .. k]) le long de ``axis`` (doublement de fenêtre)"""
    span = 1
    result = values
    while 2 * span <= width:
        result = np.minimum(result, _shift(result, span, axis))
        span *= 2
    if span < width:
        result = np.minimum(result, _shift(result, width - span, axis))
    return result


def lp_grid_oracle(params: LpParams, prices: PriceSeries, soc0: float, levels: int = 200) -> OracleResult:
    """
    Optimum du modèle linéaire sur la grille de puissance p_max·j/levels

    L'état est le couple (A, B) des unités cumulées de charge et de décharge ;
    le SOC et le débit en découlent exactement. L'optimum continu est donc
    toujours au moins aussi bon que le résultat.
    """
    n = prices.grid.n_steps
    if n > MAX_ORACLE_STEPS:
        raise ParameterError(f"oracle limité à {MAX_ORACLE_STEPS} pas", "n_steps")
    if levels < 1:
        raise ParameterError("levels doit être >= 1", "levels")

    m = levels
    size = m * n + 1
    eta, k = params.eta, params.soc_gain
    unit_eur = params.p_max / m * params.dt_h / 1e6

    a_units = np.arange(size, dtype=float)[:, None]
    b_units = np.arange(size, dtype=float)[None, :]
    soc = soc0 + k * (eta * a_units - b_units / eta) / m

    mask = (soc >= params.soc_min - 1e-12) & (soc <= params.soc_max + 1e-12)
    cap_units = 2.0 * params.e_nom * params.fec_budget / (params.p_max * params.dt_h) * m
    mask &= (a_units + b_units) <= cap_units + 1e-9

    head_mask = None
    if params.head_steps is not None and params.head_fec is not None and params.head_steps < n:
        head_units = 2.0 * params.e_nom * params.head_fec / (params.p_max * params.dt_h) * m
        head_mask = (a_units + b_units) <= head_units + 1e-9

    terminal_step = None
    if params.terminal_soc_min is not None:
        terminal_step = n - 1 if params.terminal_step is None else params.terminal_step
        terminal_mask = soc >= params.terminal_soc_min - 1e-12

    value = np.full((size, size), np.inf)
    value[0, 0] = 0.0
    history = [value]
    for t in range(n):
        w = prices.prices[t] * unit_eur
        charge = w * a_units + _trailing_min(value - w * a_units, m + 1, axis=0)
        discharge = -w * b_units + _trailing_min(value + w * b_units, m + 1, axis=1)
        value = np.minimum(charge, discharge)
        value[~mask] = np.inf
        if head_mask is not None and t == params.head_steps - 1:
            value[~head_mask] = np.inf
        if terminal_step == t:
            value[~terminal_mask] = np.inf
        history.append(value)

    best = float(np.min(value))
    if not np.isfinite(best):
        raise OracleError("aucune trajectoire admissible sur la grille de puissance")

    a, b = np.unravel_index(int(np.argmin(value)), value.shape)
    units = np.zeros(n, dtype=int)
    for t in range(n - 1, -1, -1):
        w = prices.prices[t] * unit_eur
        prev = history[t]
        steps = np.arange(0, m + 1)
        ch_steps = steps[steps <= a]
        dch_steps = steps[steps <= b]
        ch = prev[a - ch_steps, b] + w * ch_steps
        dch = prev[a, b - dch_steps] - w * dch_steps
        if np.min(ch) <= np.min(dch):
            j = int(ch_steps[int(np.argmin(ch))])
            units[t] = j
            a -= j
        else:
            j = int(dch_steps[int(np.argmin(dch))])
            units[t] = -j
            b -= j

    p_ac = units * params.p_max / m
    increments = np.where(units > 0, eta * units, units / eta) * k / m
    return OracleResult(best, p_ac, soc0 + np.cumsum(increments))


def _soc_grid(params: NlParams, soc0: float, soc_grid_n: int):
    delta = (params.soc_max - params.soc_min) / (soc_grid_n - 1)
    k_lo = int(np.ceil((params.soc_min - soc0) / delta - GRID_TOL))
    k_hi = int(np.floor((params.soc_max - soc0) / delta + GRID_TOL))
    return delta, k_lo, soc0 + delta * np.arange(k_lo, k_hi + 1)


def dp_oracle(
    params: NlParams,
    prices: PriceSeries,
    soc0: float,
    soc_grid_n: int = 401,
    i_grid_n: int = 81,
) -> OracleResult:
    """
    Programmation dynamique rétrograde du modèle non linéaire

    La grille de SOC est ancrée sur ``soc0`` ; les niveaux de courant sont les
    multiples du courant qui déplace le SOC d'un nombre entier de mailles en
    un pas, ce qui rend chaque transition exacte. Raffiner les deux grilles
    (2·n − 1 points) ajoute des états et des actions sans en retirer.
    """
    n = prices.grid.n_steps
    if n > MAX_ORACLE_STEPS:
        raise ParameterError(f"oracle limité à {MAX_ORACLE_STEPS} pas", "n_steps")
    if soc_grid_n < 2 or i_grid_n < 2:
        raise ParameterError("grilles d'au moins deux points", "soc_grid_n")

    p = params
    delta, k_lo, socs = _soc_grid(p, soc0, soc_grid_n)
    n_states = len(socs)
    start = -k_lo
    if not 0 <= start < n_states:
        raise OracleError(f"SOC initial {soc0} hors de la grille")

    quantum = delta * p.pack.q_n / p.dt_h
    j_max = int(np.floor(p.pack.i_max / quantum + GRID_TOL))
    if j_max < 1:
        raise OracleError("grille de SOC trop grossière pour le courant maximal")
    stride = int(np.ceil(2 * j_max / (i_grid_n - 1)))
    moves = np.arange(-j_max, j_max + 1)
    moves = moves[(moves % stride == 0) | (np.abs(moves) == j_max)]

    # Transitions indépendantes du temps
    current = moves * quantum
    s_start = socs[:, None]
    target = np.arange(n_states)[:, None] + moves[None, :]
    inside = (target >= 0) & (target < n_states)

    v = p.ocv(s_start) + p.r_model * current[None, :]
    p_dc = v * current[None, :]
    p_ac = np.where(p_dc >= 0, p_dc / p.eta_conv, p.eta_conv * p_dc)

    feasible = inside & (np.abs(p_ac) <= p.p_max * (1 + GRID_TOL))
    feasible &= (v >= p.pack.v_min * (1 - GRID_TOL)) & (v <= p.pack.v_max * (1 + GRID_TOL))
    target = np.where(feasible, target, 0)

    terminal_step = None
    if p.terminal_soc_min is not None:
        terminal_step = n - 1 if p.terminal_step is None else p.terminal_step
        terminal_ok = socs >= p.terminal_soc_min - GRID_TOL

    value = np.zeros(n_states)
    if terminal_step == n - 1:
        value = np.where(terminal_ok, 0.0, np.inf)
    choice = np.zeros((n, n_states), dtype=int)
    for t in range(n - 1, -1, -1):
        if terminal_step is not None and terminal_step == t and t != n - 1:
            value = np.where(terminal_ok, value, np.inf)
        cost = prices.prices[t] * p_ac * p.dt_h / 1e6 + value[target]
        cost = np.where(feasible, cost, np.inf)
        choice[t] = np.argmin(cost, axis=1)
        value = cost[np.arange(n_states), choice[t]]

    best = float(value[start])
    if not np.isfinite(best):
        raise OracleError("aucune transition admissible sur les grilles")

    state = start
    plan_p, plan_soc, plan_i = np.zeros(n), np.zeros(n), np.zeros(n)
    for t in range(n):
        j = choice[t, state]
        plan_p[t] = p_ac[state, j]
        plan_i[t] = current[j]
        state = int(target[state, j])
        plan_soc[t] = socs[state]

    logger.debug(
        f"Oracle DP : {n_states} états, {len(moves)} courants (pas {quantum * stride:.3f} A), objectif {best:.6f} €"
    )
    return OracleResult(best, plan_p, plan_soc, plan_i)
