"""
Optimiseur non linéaire à circuit équivalent
============================================

Le courant du pack est la variable de décision :

    soc_t = soc_{t-1} + i_t·Δt / Q_N
    v_t   = ocv(soc_{t-1}) + i_t·R
    p_dc  = v_t·i_t
    η_conv·p_ch − p_dch / η_conv = p_dc,   p_ac = p_ch − p_dch

Méthode : programmation linéaire séquentielle à région de confiance sur le
courant. Le terme ocv(soc_{t-1})·i est linéarisé autour de l'itéré, le terme convexe
R·i² est approché par des coupes tangentes raffinées à chaque sous-problème.
Les contraintes non linéaires (couplage onduleur, tensions, SOC final) sont
élastiques et pénalisées dans la fonction de mérite. Un passage final recalcule
les puissances exactement à partir des courants.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sps
from loguru import logger
from scipy.optimize import brentq, linprog

from core.errors import InfeasibleError, ParameterError, SolverError
from core.system import OcvCurve, PackParams, Schedule, SystemSpec, pack_params
from market.prices import PriceSeries

from .debug import write_trace

HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}

INITIAL_CUTS = np.linspace(-1.0, 1.0, 9)
RADIUS_INIT = 2.0
RADIUS_MAX = 2.0
RADIUS_MIN = 1e-9
ACCEPT_RATIO = 1e-3
EXPAND_RATIO = 0.75
SHRINK_RATIO = 0.1
CUT_TOL = 1e-10
MAX_CUT_ROUNDS = 20
SIMULTANEITY_TOL = 1e-7
VERIFY_TOL = 1e-6


@dataclass(frozen=True)
class NlParams:
    """Paramètres du modèle non linéaire"""
    pack: PackParams
    ocv: OcvCurve          # courbe à l'échelle du pack
    eta_conv: float
    p_max: float           # W
    soc_min: float
    soc_max: float
    fec_budget: float
    dt: float              # s
    r_model: float         # Ohm, résistance vue par l'optimiseur
    e_nom: float           # Wh, référence des cycles équivalents
    terminal_soc_min: Optional[float] = None
    terminal_step: Optional[int] = None
    head_steps: Optional[int] = None
    head_fec: Optional[float] = None
    max_iter: int = 100
    kkt_tol: float = 1e-5

    def __post_init__(self):
        if not 0 < self.eta_conv <= 1:
            raise ParameterError("il faut 0 < eta_conv <= 1", "eta_conv")
        if self.r_model < 0:
            raise ParameterError("r_model doit être >= 0", "r_model")
        if self.fec_budget < 0:
            raise ParameterError("fec_budget doit être >= 0", "fec_budget")
        if self.p_max <= 0 or self.dt <= 0 or self.e_nom <= 0:
            raise ParameterError("p_max, dt et e_nom doivent être > 0", "p_max")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise ParameterError("il faut 0 <= soc_min < soc_max <= 1", "soc_min")
        if self.max_iter < 1:
            raise ParameterError("max_iter doit être >= 1", "max_iter")

    @classmethod
    def from_system(
        cls,
        spec: SystemSpec,
        eta_conv: float,
        dt: float,
        fec_budget: float,
        r_factor: float = 1.0,
        **kwargs,
    ) -> "NlParams":
        """Paramètres à partir de l'installation ; r_model = r_factor · R_pack"""
        if r_factor < 0:
            raise ParameterError("r_factor doit être >= 0", "r_factor")
        pack = pack_params(spec)
        return cls(
            pack=pack,
            ocv=spec.pack_ocv,
            eta_conv=eta_conv,
            p_max=spec.p_max,
            soc_min=spec.soc_min,
            soc_max=spec.soc_max,
            fec_budget=fec_budget,
            dt=dt,
            r_model=pack.r * r_factor,
            e_nom=spec.e_nom,
            **kwargs,
        )

    @property
    def dt_h(self) -> float:
        return self.dt / 3600.0

    @property
    def soc_per_amp(self) -> float:
        """Variation de SOC pour 1 A pendant un pas"""
        return self.dt_h / self.pack.q_n


@dataclass(frozen=True, eq=False)
class NlSolution:
    """Solution du modèle non linéaire"""
    schedule: Schedule
    i: np.ndarray        # A
    v: np.ndarray        # V
    p_dc: np.ndarray     # W
    kkt_residual: float
    iterations: int = 0
    degraded: bool = False
    projections: int = 0
    trace: Tuple[Dict[str, Any], ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class Violation:
    name: str
    step: int
    residual: float


@dataclass(frozen=True)
class NlReport:
    """Résidus des contraintes recalculés indépendamment du solveur"""
    max_residual: float
    residuals: Dict[str, float]
    violations: Tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first_violation(self) -> Optional[Violation]:
        return min(self.violations, key=lambda v: v.step) if self.violations else None


@dataclass
class _Point:
    """Évaluation exacte du modèle pour une trajectoire de courant"""
    i: np.ndarray
    soc_start: np.ndarray
    soc_end: np.ndarray
    v: np.ndarray
    p_dc: np.ndarray
    x: np.ndarray            # p_ch en p.u.
    y: np.ndarray            # p_dch en p.u.
    objective: float         # €
    merit: float
    violation: float         # somme des violations pénalisées


class _Problem:
    """Sous-problèmes linéaires et fonction de mérite pour une instance"""

    def __init__(self, params: NlParams, prices: np.ndarray, soc0: float):
        self.params = params
        self.prices = np.asarray(prices, dtype=float)
        self.soc0 = soc0
        self.n = n = len(prices)

        p = params
        self.i_max = p.pack.i_max
        self.g = p.soc_per_amp
        self.big_g = self.g * self.i_max
        self.rho = p.r_model * self.i_max ** 2 / p.p_max
        self.v_scale = p.r_model * self.i_max
        self.energy_unit = p.p_max * p.dt_h / 1e6
        self.mu = 10.0 * (float(np.max(np.abs(self.prices))) + 1.0) * self.energy_unit
        self.mu_terminal = self.mu / self.big_g

        self.cap = 2.0 * p.e_nom * p.fec_budget / (p.p_max * p.dt_h)
        self.head_cap = None
        if p.head_steps is not None and p.head_fec is not None and p.head_steps < n:
            self.head_cap = 2.0 * p.e_nom * p.head_fec / (p.p_max * p.dt_h)
        self.terminal = None
        if p.terminal_soc_min is not None:
            step = n - 1 if p.terminal_step is None else p.terminal_step
            if not 0 <= step < n:
                raise ParameterError(f"terminal_step {step} hors de l'horizon", "terminal_step")
            self.terminal = (step, p.terminal_soc_min)

        self.cuts: List[List[float]] = [list(INITIAL_CUTS) for _ in range(n)]
        self._static = self._static_rows()

    # Indices des blocs de variables : I, X, Y, Q, S, WH, WL, U
    def _block(self, k: int) -> slice:
        return slice(k * self.n, (k + 1) * self.n)

    @property
    def n_var(self) -> int:
        return 7 * self.n + 1

    def _row(self, blocks: Dict[int, sps.spmatrix], rows: int, terminal: Optional[np.ndarray] = None):
        parts = [blocks.get(k, sps.csr_matrix((rows, self.n))) for k in range(7)]
        parts.append(sps.csr_matrix(terminal if terminal is not None else np.zeros((rows, 1))))
        return sps.hstack(parts).tocsr()

    def _static_rows(self):
        n, p = self.n, self.params
        cum = sps.csr_matrix(np.tril(np.ones((n, n))))
        ones = sps.csr_matrix(np.ones((1, n)))
        rows, rhs = [], []

        rows.append(self._row({0: self.big_g * cum}, n))
        rhs.append(np.full(n, p.soc_max - self.soc0))
        rows.append(self._row({0: -self.big_g * cum}, n))
        rhs.append(np.full(n, self.soc0 - p.soc_min))

        rows.append(self._row({1: ones, 2: ones}, 1))
        rhs.append(np.array([self.cap]))

        if self.head_cap is not None:
            head = np.zeros((1, n))
            head[0, :p.head_steps] = 1.0
            head = sps.csr_matrix(head)
            rows.append(self._row({1: head, 2: head}, 1))
            rhs.append(np.array([self.head_cap]))

        if self.terminal is not None:
            step, level = self.terminal
            row = np.zeros((1, n))
            row[0, :step + 1] = -self.big_g
            rows.append(self._row({0: sps.csr_matrix(row)}, 1, terminal=np.array([[-1.0]])))
            rhs.append(np.array([self.soc0 - level]))

        return sps.vstack(rows).tocsr(), np.concatenate(rhs)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_var)
        c[self._block(1)] = self.prices * self.energy_unit
        c[self._block(2)] = -self.prices * self.energy_unit
        c[self._block(4)] = self.mu
        c[self._block(5)] = self.mu
        c[self._block(6)] = self.mu
        c[-1] = self.mu_terminal
        return c

    def evaluate(self, i: np.ndarray) -> _Point:
        """Modèle exact, fonction de mérite et violations"""
        p = self.params
        eta = p.eta_conv
        i = np.asarray(i, dtype=float)

        soc_end = self.soc0 + self.g * np.cumsum(i)
        soc_start = np.concatenate([[self.soc0], soc_end[:-1]])
        v = p.ocv(soc_start) + p.r_model * i
        p_dc = v * i

        x_need = np.maximum(p_dc, 0.0) / (eta * p.p_max)
        x = np.minimum(x_need, 1.0)
        y = np.minimum(eta * np.maximum(-p_dc, 0.0) / p.p_max, 1.0)
        charge_excess = eta * np.maximum(x_need - 1.0, 0.0)

        violation = float(np.sum(charge_excess))
        if self.v_scale > 0:
            violation += float(np.sum(np.maximum(v - p.pack.v_max, 0.0)) / self.v_scale)
            violation += float(np.sum(np.maximum(p.pack.v_min - v, 0.0)) / self.v_scale)

        violation += max(float(np.sum(x + y)) - self.cap, 0.0)
        if self.head_cap is not None:
            head = p.head_steps
            violation += max(float(np.sum(x[:head] + y[:head])) - self.head_cap, 0.0)

        objective = float(np.sum(self.prices * (x - y))) * self.energy_unit
        merit = objective + self.mu * violation
        if self.terminal is not None:
            step, level = self.terminal
            merit += self.mu_terminal * max(level - soc_end[step], 0.0)

        return _Point(i, soc_start, soc_end, v, p_dc, x, y, objective, merit, violation)

    def _linear_rows(self, point: _Point):
        """Couplage onduleur, coupes et tensions linéarisés autour de ``point``"""
        n, p = self.n, self.params
        i, g = point.i, self.g
        ocv_start = p.ocv(point.soc_start)
        slope_start = p.ocv.slope(point.soc_start)

        # F_t = ocv(soc_{t-1})·i_t et sa jacobienne (strictement triangulaire hors diagonale)
        f = ocv_start * i
        jac = np.tril(np.tile((i * slope_start * g)[:, None], (1, n)), k=-1)
        jac[np.diag_indices(n)] = ocv_start
        jac_pu = jac * self.i_max / p.p_max
        f_pu = f / p.p_max
        eye = sps.identity(n, format="csr")

        rows = [self._row({
            0: sps.csr_matrix(jac_pu),
            1: -p.eta_conv * eye,
            2: eye / p.eta_conv,
            3: eye,
            4: -eye,
        }, n)]
        rhs = [jac_pu @ (i / self.i_max) - f_pu]

        if self.rho > 0:
            cut_t, cut_a = [], []
            for t, cuts in enumerate(self.cuts):
                cut_t.extend([t] * len(cuts))
                cut_a.extend(cuts)
            cut_t = np.asarray(cut_t)
            cut_a = np.asarray(cut_a)
            m = len(cut_t)
            sel = sps.csr_matrix((np.ones(m), (np.arange(m), cut_t)), shape=(m, n))
            rows.append(self._row({0: sps.diags(2.0 * self.rho * cut_a) @ sel, 3: -sel}, m))
            rhs.append(self.rho * cut_a ** 2)

        if self.v_scale > 0:
            # v_t = ocv(soc_{t-1}) + R·i_t, linéarisée en les courants passés
            prev = np.tril(np.ones((n, n)), k=-1)
            prev_totals = np.concatenate([[0.0], np.cumsum(i)[:-1]])
            lin = (slope_start * g * self.i_max)[:, None] * prev + np.eye(n) * p.r_model * self.i_max
            const = ocv_start - slope_start * g * prev_totals
            lin_pu = sps.csr_matrix(lin / self.v_scale)
            rows.append(self._row({0: lin_pu, 5: -eye}, n))
            rhs.append((p.pack.v_max - const) / self.v_scale)
            rows.append(self._row({0: -lin_pu, 6: -eye}, n))
            rhs.append((const - p.pack.v_min) / self.v_scale)

        a_static, b_static = self._static
        return sps.vstack([a_static] + rows).tocsr(), np.concatenate([b_static] + rhs)

    def _bounds(self, centre: np.ndarray, radius: float) -> np.ndarray:
        bounds = np.zeros((self.n_var, 2))
        bounds[:, 1] = np.inf
        bounds[self._block(0), 0] = np.maximum(-1.0, centre - radius)
        bounds[self._block(0), 1] = np.minimum(1.0, centre + radius)
        bounds[self._block(1), 1] = 1.0
        bounds[self._block(2), 1] = 1.0
        return bounds

    def add_cut(self, t: int, a: float):
        if self.rho > 0 and all(abs(a - b) > 1e-12 for b in self.cuts[t]):
            self.cuts[t].append(float(a))

    def solve(self, point: _Point, radius: float) -> Tuple[float, np.ndarray]:
        """Sous-problème linéaire, coupes raffinées jusqu'à précision ; renvoie (valeur, solution)"""
        centre = point.i / self.i_max
        c = self.objective_vector()
        scale = max(float(np.max(np.abs(c))), 1e-12)
        bounds = self._bounds(centre, radius)

        for _ in range(MAX_CUT_ROUNDS):
            a_ub, b_ub = self._linear_rows(point)
            res = linprog(c / scale, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs-ds", options=HIGHS_OPTIONS)
            if res.status != 0:
                raise SolverError(
                    f"sous-problème linéaire en échec: {res.message}",
                    {"status": res.status, "radius": radius, "merit": point.merit},
                )
            i_new = res.x[self._block(0)]
            q_new = res.x[self._block(3)]
            gap = self.rho * i_new ** 2 - q_new
            missing = np.flatnonzero(gap > CUT_TOL * max(1.0, self.rho))
            if len(missing) == 0:
                break
            for t in missing:
                self.add_cut(int(t), float(i_new[t]))

        return float(res.fun) * scale, res.x

    def simultaneous(self, solution: np.ndarray) -> int:
        x = solution[self._block(1)]
        y = solution[self._block(2)]
        return int(np.sum(np.minimum(x, y) > SIMULTANEITY_TOL))


def _feasible_currents(params: NlParams, soc0: float, i: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    Passe avant rendant la trajectoire exactement admissible

    Chaque courant est ramené dans l'intervalle respectant courant maximal,
    bornes de SOC, tension du pas et puissance AC maximale.
    """
    p = params
    g, r, eta = p.soc_per_amp, p.r_model, p.eta_conv
    i_max = p.pack.i_max
    out = np.array(i, dtype=float)
    changed = 0
    soc = soc0

    def p_dc(soc_start: float, cur: float) -> float:
        return (float(p.ocv(soc_start)) + r * cur) * cur

    def upper(soc_start: float, cur: float) -> float:
        return (p_dc(soc_start, cur) / eta - p.p_max) / p.p_max

    def lower(soc_start: float, cur: float) -> float:
        return (-p.p_max - eta * p_dc(soc_start, cur)) / p.p_max

    for t in range(len(out)):
        lo = max(-i_max, (p.soc_min - soc) / g)
        hi = min(i_max, (p.soc_max - soc) / g)
        if r > 0:
            e0 = float(p.ocv(soc))
            lo = max(lo, (p.pack.v_min - e0) / r)
            hi = min(hi, (p.pack.v_max - e0) / r)
        cur = float(min(max(out[t], min(lo, 0.0)), max(hi, 0.0)))

        if cur > 0 and upper(soc, cur) > 0:
            cur = 0.0 if upper(soc, 0.0) >= 0 else brentq(lambda z: upper(soc, z), 0.0, cur, xtol=1e-12 * i_max)
            while cur > 0 and upper(soc, cur) > 0:
                cur = max(cur - 1e-9 * i_max, 0.0)
        elif cur < 0 and lower(soc, cur) > 0:
            cur = 0.0 if lower(soc, 0.0) >= 0 else brentq(lambda z: lower(soc, z), cur, 0.0, xtol=1e-12 * i_max)
            while cur < 0 and lower(soc, cur) > 0:
                cur = min(cur + 1e-9 * i_max, 0.0)

        if abs(cur - out[t]) > 1e-9 * i_max:
            changed += 1
        out[t] = cur
        soc = soc + g * cur

    return out, changed


def _converter_power(p_dc: np.ndarray, eta: float) -> np.ndarray:
    """Couplage à rendement constant, sans charge/décharge simultanée"""
    return np.where(p_dc >= 0, p_dc / eta, eta * p_dc)


def nl_optimize(
    params: NlParams,
    prices: PriceSeries,
    soc0: float,
    warm_start: Optional[Sequence[float]] = None,
    trace_path: Optional[Union[str, Path]] = None,
) -> NlSolution:
    """
    Plan du modèle non linéaire

    L'itéré initial est la trajectoire à courant nul, ou ``warm_start``
    (courants en A) rendu admissible. Après ``max_iter`` itérations le meilleur
    point est renvoyé avec ``degraded=True``.
    """
    p = params
    if abs(prices.grid.dt - p.dt) > 1e-9:
        raise ParameterError(f"pas des prix ({prices.grid.dt} s) différent de dt ({p.dt} s)", "dt")
    if not p.soc_min - 1e-9 <= soc0 <= p.soc_max + 1e-9:
        raise InfeasibleError(f"SOC initial {soc0} hors de [{p.soc_min}, {p.soc_max}]")
    soc0 = min(max(soc0, p.soc_min), p.soc_max)

    problem = _Problem(p, prices.prices, soc0)
    n = problem.n

    start = np.zeros(n)
    if warm_start is not None:
        start = np.zeros(n)
        given = np.asarray(warm_start, dtype=float)[:n]
        start[:len(given)] = given
        start, _ = _feasible_currents(p, soc0, start)

    point = problem.evaluate(start)
    radius = RADIUS_INIT
    trace: List[Dict[str, Any]] = []
    converged = False
    chi = np.inf
    last_solution = None
    iteration = 0

    for iteration in range(1, p.max_iter + 1):
        for t in range(n):
            problem.add_cut(t, point.i[t] / problem.i_max)

        base_value, _ = problem.solve(point, 0.0)
        value, solution = problem.solve(point, radius)
        pred = base_value - value
        tol = p.kkt_tol * (1.0 + abs(point.merit))

        if pred <= tol:
            if radius >= 1.0:
                chi = max(pred, 0.0)
            else:
                full_value, _ = problem.solve(point, 1.0)
                chi = max(base_value - full_value, 0.0)
            if chi <= tol:
                converged = True
                trace.append(_trace_row(iteration, point, radius, np.nan, True))
                break

        candidate = problem.evaluate(solution[problem._block(0)] * problem.i_max)
        ared = point.merit - candidate.merit
        ratio = ared / pred if pred > 0 else -1.0
        step = float(np.max(np.abs(candidate.i - point.i))) / problem.i_max
        accepted = ratio >= ACCEPT_RATIO
        trace.append(_trace_row(iteration, candidate if accepted else point, radius, ratio, accepted))
        logger.debug(
            f"NL it {iteration}: mérite {point.merit:.6f} → {candidate.merit:.6f}, "
            f"ratio {ratio:.3f}, rayon {radius:.2e}"
        )

        if accepted:
            point = candidate
            last_solution = solution
            if ratio > EXPAND_RATIO and step >= 0.99 * radius:
                radius = min(2.0 * radius, RADIUS_MAX)
        if ratio < SHRINK_RATIO:
            radius = 0.25 * min(radius, max(step, RADIUS_MIN))

        if radius < RADIUS_MIN:
            full_value, _ = problem.solve(point, 1.0)
            base_value, _ = problem.solve(point, 0.0)
            chi = max(base_value - full_value, 0.0)
            converged = True
            logger.debug(f"Région de confiance réduite à {radius:.1e}, arrêt")
            break

    degraded = not converged
    if degraded:
        full_value, _ = problem.solve(point, 1.0)
        base_value, _ = problem.solve(point, 0.0)
        chi = max(base_value - full_value, 0.0)
        logger.warning(f"NL non convergé après {p.max_iter} itérations, meilleur point renvoyé")

    simultaneous = problem.simultaneous(last_solution) if last_solution is not None else 0
    currents, changed = _feasible_currents(p, soc0, point.i)
    final = problem.evaluate(currents)
    if simultaneous:
        logger.warning(f"Charge et décharge simultanées sur {simultaneous} pas, projection sur la puissance nette")

    p_ac = _converter_power(final.p_dc, p.eta_conv)
    p_ac = np.clip(p_ac, -p.p_max, p.p_max)
    objective = float(np.sum(prices.prices * p_ac) * p.dt_h / 1e6)
    schedule = Schedule(prices.grid, p_ac, final.soc_end, objective)

    if trace_path is not None:
        write_trace(trace_path, trace)

    return NlSolution(
        schedule=schedule,
        i=currents,
        v=final.v,
        p_dc=final.p_dc,
        kkt_residual=float(chi / (1.0 + abs(final.merit))),
        iterations=iteration,
        degraded=degraded,
        projections=simultaneous + changed,
        trace=tuple(trace),
    )


def _trace_row(iteration: int, point: _Point, radius: float, ratio: float, accepted: bool) -> Dict[str, Any]:
    return {
        "iteration": iteration,
        "objective": point.objective,
        "merit": point.merit,
        "max_residual": point.violation,
        "trust_radius": radius,
        "ratio": ratio,
        "accepted": accepted,
    }


def nl_verify(params: NlParams, solution: NlSolution, soc0: Optional[float] = None) -> NlReport:
    """
    Vérification indépendante d'une solution

    Recalcule la récurrence de SOC, p_dc = v·i, v = ocv(soc_{t-1}) + i·R, les bornes
    de courant, de tension, de SOC et de puissance, le couplage onduleur et
    le plafond de cycles. Résidus normalisés (SOC absolu, puissances par
    p_max, tensions par v_max, courants par i_max).
    """
    p = params
    sched = solution.schedule
    i = np.asarray(solution.i, dtype=float)
    v = np.asarray(solution.v, dtype=float)
    p_dc = np.asarray(solution.p_dc, dtype=float)
    soc_end = np.asarray(sched.soc_pred, dtype=float)
    g = p.soc_per_amp

    if soc0 is None:
        soc0 = float(soc_end[0] - g * i[0])
    soc_start = np.concatenate([[soc0], soc_end[:-1]])

    checks: List[Tuple[str, np.ndarray]] = [
        ("soc_recursion", np.abs(soc_end - soc_start - g * i)),
        ("power_model", np.abs(p_dc - v * i) / p.p_max),
        ("voltage_model", np.abs(v - p.ocv(soc_start) - p.r_model * i) / p.pack.v_max),
        ("current_bound", np.maximum(np.abs(i) - p.pack.i_max, 0.0) / p.pack.i_max),
        ("soc_bound", np.maximum(soc_end - p.soc_max, 0.0) + np.maximum(p.soc_min - soc_end, 0.0)),
        ("power_bound", np.maximum(np.abs(sched.p_ac) - p.p_max, 0.0) / p.p_max),
        ("converter_coupling", np.abs(sched.p_ac - _converter_power(p_dc, p.eta_conv)) / p.p_max),
    ]
    excess = np.maximum(v - p.pack.v_max, 0.0) + np.maximum(p.pack.v_min - v, 0.0)
    checks.append(("voltage_bound", excess / p.pack.v_max))

    throughput = np.abs(sched.p_ac) * p.dt_h
    cap = 2.0 * p.e_nom * p.fec_budget
    fec = np.zeros(len(i))
    fec[-1] = max(float(np.sum(throughput)) - cap, 0.0) / max(cap, p.p_max * p.dt_h)
    checks.append(("fec_budget", fec))

    residuals: Dict[str, float] = {}
    violations: List[Violation] = []
    for name, values in checks:
        residuals[name] = float(np.max(values)) if len(values) else 0.0
        for step in np.flatnonzero(values > VERIFY_TOL):
            violations.append(Violation(name, int(step), float(values[step])))

    return NlReport(
        max_residual=max(residuals.values()),
        residuals=residuals,
        violations=tuple(sorted(violations, key=lambda v: v.step)),
    )
