"""
Tests de l'optimiseur non linéaire, de sa vérification et de l'oracle DP
"""

from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from core.errors import InfeasibleError, OracleError, ParameterError
from core.system import OcvCurve, Scenario, apply_soh, pack_params
from optim.debug import TRACE_COLUMNS
from optim.lp import LpParams, lp_optimize
from optim.nl import NlParams, nl_optimize, nl_verify
from optim.oracle import dp_oracle

ETA_CONV = 0.97388
QUARTER_PRICES = [30.0, 20.0, 150.0, 160.0, 25.0, 20.0, 170.0, 180.0]
ALTERNATING_PRICES = [10.0, 120.0, 10.0, 120.0, 10.0, 120.0]


@pytest.fixture
def nl_params(spec):
    return NlParams.from_system(spec, eta_conv=ETA_CONV, dt=900.0, fec_budget=10.0)


@pytest.fixture
def quarter_prices(make_prices):
    return make_prices(QUARTER_PRICES, dt=900.0)


def test_params_from_system(spec, nl_params):
    assert nl_params.r_model == pytest.approx(0.10647)
    assert nl_params.pack.i_max == pytest.approx(376.0)
    assert nl_params.soc_per_amp == pytest.approx(0.25 / 188.0)
    doubled = NlParams.from_system(spec, eta_conv=ETA_CONV, dt=900.0, fec_budget=1.0, r_factor=2.0)
    assert doubled.r_model == pytest.approx(2 * 0.10647)
    with pytest.raises(ParameterError):
        NlParams.from_system(spec, eta_conv=ETA_CONV, dt=900.0, fec_budget=1.0, r_factor=-1.0)


def test_solution_is_feasible(nl_params, quarter_prices):
    solution = nl_optimize(nl_params, quarter_prices, 0.5)
    report = nl_verify(nl_params, solution, 0.5)
    assert report.ok, report.first_violation
    assert report.max_residual <= 1e-6
    assert not solution.degraded
    assert solution.schedule.objective_value < 0
    solution.schedule.check(nl_params.p_max, nl_params.soc_min, nl_params.soc_max)


def test_close_to_dp_oracle(nl_params, quarter_prices):
    oracle = dp_oracle(nl_params, quarter_prices, 0.5)
    solution = nl_optimize(nl_params, quarter_prices, 0.5)
    dp = oracle.objective
    assert solution.schedule.objective_value <= dp + 0.005 * abs(dp)


def test_dp_oracle_grid(nl_params, quarter_prices):
    oracle = dp_oracle(nl_params, quarter_prices, 0.5)
    steps = np.round(oracle.i / 1.88).astype(int)
    np.testing.assert_allclose(oracle.i, steps * 1.88, atol=1e-9)
    assert np.all(np.abs(oracle.i) <= 376.0 + 1e-9)
    assert oracle.soc.min() >= 0.0 and oracle.soc.max() <= 1.0
    assert oracle.objective < 0


@pytest.mark.slow
def test_dp_oracle_refinement_never_worse(nl_params, quarter_prices):
    coarse = dp_oracle(nl_params, quarter_prices, 0.5, 401, 81)
    fine = dp_oracle(nl_params, quarter_prices, 0.5, 801, 161)
    assert fine.objective <= coarse.objective + 1e-9


def test_dp_oracle_without_transitions(nl_params, quarter_prices):
    with pytest.raises(OracleError):
        dp_oracle(replace(nl_params, terminal_soc_min=1.0, p_max=1000.0), quarter_prices, 0.0)


def test_flat_prices_stay_idle(nl_params, make_prices):
    solution = nl_optimize(nl_params, make_prices([100.0] * 8, dt=900.0), 0.5)
    np.testing.assert_allclose(solution.schedule.p_ac, 0.0, atol=1.0)
    assert solution.schedule.objective_value == pytest.approx(0.0, abs=1e-3)


def test_terminal_soc(nl_params, quarter_prices):
    params = replace(nl_params, terminal_soc_min=0.5)
    solution = nl_optimize(params, quarter_prices, 0.5)
    assert solution.schedule.soc_pred[-1] >= 0.5 - 1e-4


def test_fec_budget(nl_params, quarter_prices):
    params = replace(nl_params, fec_budget=0.1)
    solution = nl_optimize(params, quarter_prices, 0.5)
    throughput = np.sum(np.abs(solution.schedule.p_ac)) * params.dt_h
    assert throughput <= 2 * params.e_nom * 0.1 * (1 + 1e-4)
    assert nl_verify(params, solution, 0.5).residuals["fec_budget"] <= 1e-4


def test_iteration_cap_marks_degraded(nl_params, quarter_prices):
    solution = nl_optimize(replace(nl_params, max_iter=1), quarter_prices, 0.5)
    assert solution.degraded
    assert solution.iterations == 1
    solution.schedule.check(nl_params.p_max, nl_params.soc_min, nl_params.soc_max)


def test_warm_start(nl_params, quarter_prices):
    cold = nl_optimize(nl_params, quarter_prices, 0.5)
    warm = nl_optimize(nl_params, quarter_prices, 0.5, warm_start=cold.i)
    assert warm.schedule.objective_value <= cold.schedule.objective_value + 0.005 * abs(cold.schedule.objective_value)


def test_verify_detects_tampering(nl_params, quarter_prices):
    solution = nl_optimize(nl_params, quarter_prices, 0.5)
    tampered = replace(solution, i=solution.i * 1.1)
    report = nl_verify(nl_params, tampered, 0.5)
    assert not report.ok
    assert report.residuals["soc_recursion"] > 1e-6


def test_trace_dump(tmp_path, nl_params, quarter_prices):
    path = tmp_path / "trace.csv"
    solution = nl_optimize(nl_params, quarter_prices, 0.5, trace_path=path)
    trace = pd.read_csv(path)
    assert list(trace.columns) == TRACE_COLUMNS
    assert len(trace) == len(solution.trace)


def test_invalid_inputs(nl_params, quarter_prices, make_prices):
    with pytest.raises(InfeasibleError):
        nl_optimize(nl_params, quarter_prices, 1.2)
    with pytest.raises(ParameterError):
        nl_optimize(nl_params, make_prices(QUARTER_PRICES, dt=3600.0), 0.5)


@pytest.mark.parametrize("seed", range(10))
def test_matches_lp_without_losses(spec, make_prices, seed):
    pack = pack_params(spec)
    volts = 956.8
    params = NlParams(
        pack=pack,
        ocv=OcvCurve((0.0, 1.0), (volts, volts + 1e-5)),
        eta_conv=1.0,
        p_max=180000.0,
        soc_min=0.0,
        soc_max=1.0,
        fec_budget=10.0,
        dt=900.0,
        r_model=0.0,
        e_nom=volts * pack.q_n,
    )
    lp = LpParams(eta=1.0, e_nom=volts * pack.q_n, p_max=180000.0, soc_min=0.0, soc_max=1.0, fec_budget=10.0, dt=900.0)
    prices = make_prices(np.random.default_rng(seed).uniform(10.0, 200.0, 6), dt=900.0)
    expected = lp_optimize(lp, prices, 0.3).objective_value
    assert nl_optimize(params, prices, 0.3).schedule.objective_value == pytest.approx(expected, rel=1e-5, abs=1e-3)


def _soc_start(solution, soc0):
    return np.concatenate([[soc0], solution.schedule.soc_pred[:-1]])


def test_voltage_at_start_of_step(nl_params, quarter_prices):
    solution = nl_optimize(nl_params, quarter_prices, 0.5)
    expected = nl_params.ocv(_soc_start(solution, 0.5)) + nl_params.r_model * solution.i
    assert np.max(np.abs(solution.v - expected)) / nl_params.pack.v_max <= 1e-6
    assert nl_verify(nl_params, solution, 0.5).residuals["voltage_model"] <= 1e-6


def test_ohmic_and_ocv_energy_balance(nl_params, quarter_prices):
    p = nl_params
    solution = nl_optimize(p, quarter_prices, 0.5)
    soc_start = _soc_start(solution, 0.5)
    ohmic = solution.i ** 2 * p.r_model * p.dt_h
    assert np.all(ohmic >= 0)
    stored = p.ocv(soc_start) * p.pack.q_n * (solution.schedule.soc_pred - soc_start)
    dc_energy = solution.p_dc * p.dt_h
    scale = p.p_max * p.dt_h
    np.testing.assert_allclose((dc_energy - ohmic - stored) / scale, 0.0, atol=1e-6)


def test_verify_locates_voltage_error(nl_params, quarter_prices):
    solution = nl_optimize(nl_params, quarter_prices, 0.5)
    v = solution.v.copy()
    v[3] += 1.0
    report = nl_verify(nl_params, replace(solution, v=v), 0.5)
    assert ("voltage_model", 3) in {(x.name, x.step) for x in report.violations}
    assert report.first_violation.step == 3
    assert report.residuals["voltage_model"] == pytest.approx(1.0 / nl_params.pack.v_max)


def test_verify_locates_current_excess(nl_params, quarter_prices):
    solution = nl_optimize(nl_params, quarter_prices, 0.5)
    step = int(np.argmax(np.abs(solution.i)))
    i = solution.i.copy()
    i[step] = np.sign(i[step]) * (nl_params.pack.i_max + 1.0)
    report = nl_verify(nl_params, replace(solution, i=i), 0.5)
    flagged = [x for x in report.violations if x.name == "current_bound"]
    assert [x.step for x in flagged] == [step]
    assert flagged[0].residual == pytest.approx(1.0 / nl_params.pack.i_max)
    assert {x.step for x in report.violations} == {step}


def test_aged_alternating_prices_close_to_dp(spec, make_prices):
    aged = apply_soh(spec, Scenario(3.0))
    params = NlParams.from_system(aged, eta_conv=ETA_CONV, dt=900.0, fec_budget=10.0)
    prices = make_prices(ALTERNATING_PRICES, dt=900.0)
    dp = dp_oracle(params, prices, 0.5, 401, 81).objective
    solution = nl_optimize(params, prices, 0.5)
    assert nl_verify(params, solution, 0.5).ok
    assert solution.schedule.objective_value <= dp + 0.005 * abs(dp)
    assert solution.schedule.objective_value >= dp - 0.01 * abs(dp)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_random_instances_close_to_dp(nl_params, make_prices, seed):
    rng = np.random.default_rng(seed)
    prices = make_prices(rng.uniform(0.0, 200.0, 6), dt=900.0)
    soc0 = float(rng.uniform(0.2, 0.8))
    dp = dp_oracle(nl_params, prices, soc0).objective
    solution = nl_optimize(nl_params, prices, soc0)
    assert solution.schedule.objective_value <= dp + 0.005 * abs(dp) + 1e-6


def test_profit_non_increasing_in_resistance(nl_params, quarter_prices):
    values = [
        nl_optimize(replace(nl_params, r_model=nl_params.r_model * factor), quarter_prices, 0.5).schedule.objective_value
        for factor in (0.0, 0.5, 1.0, 2.0, 3.0)
    ]
    for low, high in zip(values, values[1:]):
        assert high >= low - 1e-4 * abs(low)


def test_high_power_share_non_increasing_in_resistance(nl_params, quarter_prices):
    shares = []
    for factor in (0.5, 1.0, 2.0, 3.0):
        schedule = nl_optimize(replace(nl_params, r_model=nl_params.r_model * factor), quarter_prices, 0.5).schedule
        shares.append(float(np.mean(np.abs(schedule.p_ac) > 0.9 * nl_params.p_max)))
    assert all(b <= a for a, b in zip(shares, shares[1:]))


def test_high_soc_discharge_needs_less_current(spec, make_prices):
    params = NlParams.from_system(spec, eta_conv=ETA_CONV, dt=60.0, fec_budget=10.0)
    prices = make_prices([200.0], dt=60.0)
    high = nl_optimize(params, prices, 0.9)
    low = nl_optimize(params, prices, 0.1)
    assert high.p_dc[0] == pytest.approx(low.p_dc[0], rel=1e-4)
    assert high.p_dc[0] < 0
    assert abs(high.i[0]) < abs(low.i[0])
