"""
Tests des campagnes benchmark et sensibilité
"""

import json
from dataclasses import replace

import pandas as pd
import pytest

from analytics.experiments import SweepSpec, run_benchmark, run_jobs, run_sensitivity, write_benchmark, write_sweep
from control.budget import daily_throughput
from control.mpc import MpcConfig
from core.errors import ParameterError
from core.system import Scenario, TimeGrid, apply_soh
from market.prices import synth_prices

SHORT = MpcConfig(optimizer="lp", days=0.25, horizon_h=3.0, action_min=15.0, opt_dt=900.0, sim_dt=300.0)
WEEK = MpcConfig(optimizer="lp", days=7.0, horizon_h=12.0, action_min=15.0, opt_dt=900.0, sim_dt=60.0)


@pytest.fixture(scope="module")
def week_benchmark(spec, scenarios):
    grid = TimeGrid(pd.Timestamp("2021-03-01"), 900.0, 7 * 96 + 48)
    prices = synth_prices(42, grid, 100.0, 50.0, 10.0)
    return run_benchmark(spec, scenarios, prices, WEEK, workers=3, seed=42)


def _by_soh(result, optimizer):
    return sorted((c for c in result.cells if c.optimizer == optimizer), key=lambda c: c.soh_r)


def test_sweep_spec_validation():
    assert SweepSpec("lp-eta", (0.9, 0.95)).optimizer == "lp"
    assert SweepSpec("nl-r-factor", (0.5,)).optimizer == "nl"
    with pytest.raises(ParameterError):
        SweepSpec("lp-eta", (0.5,))
    with pytest.raises(ParameterError):
        SweepSpec("nl-r-factor", (2.0,))
    with pytest.raises(ParameterError):
        SweepSpec("milp", (1.0,))
    with pytest.raises(ParameterError):
        SweepSpec("lp-eta", ())


def test_benchmark_lp_only(tmp_path, spec, week_prices, system_cfg):
    scenarios = [Scenario(1.0, "BOL"), Scenario(3.0, "seconde-vie")]
    result = run_benchmark(spec, scenarios, week_prices, replace(SHORT, days=0.5), optimizers=("lp",), seed=42)
    assert [(c.optimizer, c.scenario) for c in result.cells] == [("lp", "BOL"), ("lp", "seconde-vie")]
    assert result.summary.seed == 42
    bol, aged = result.cells
    assert aged.loss_battery_share > bol.loss_battery_share > 0
    assert 0.0 <= bol.high_power_share <= 1.0
    assert set(result.cdf.columns) == {"optimizer", "scenario", "power_w", "cdf"}
    assert result.cdf.groupby("scenario")["cdf"].max().tolist() == pytest.approx([1.0, 1.0])

    out = write_benchmark(result, tmp_path, system_cfg, {"command": "benchmark", "params": {}})
    frame = pd.read_csv(out / "benchmark.csv")
    assert len(frame) == 2
    assert (out / "benchmark_long.csv").exists()
    assert (out / "lp_BOL" / "ledger.csv").exists()
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert len(summary["cells"]) == 2


def test_benchmark_needs_scenarios(spec, week_prices):
    with pytest.raises(ParameterError):
        run_benchmark(spec, [], week_prices, SHORT)


def test_lp_eta_sweep_baseline_first(tmp_path, spec, week_prices, system_cfg):
    sweep = SweepSpec("lp-eta", (0.90, 0.97), Scenario(3.0))
    result = run_sensitivity(spec, sweep, week_prices, SHORT)
    assert len(result.points) == 3
    base = result.points[0]
    assert base.baseline
    assert base.value == pytest.approx(0.92836, abs=5e-4)
    assert base.delta_revenue_eur == 0.0 and base.delta_e_imb_wh == 0.0
    assert [p.value for p in result.points[1:]] == [0.90, 0.97]

    out = write_sweep(result, tmp_path, system_cfg, {"command": "sweep", "params": {}})
    assert len(pd.read_csv(out / "sweep.csv")) == 3


def test_nl_r_factor_sweep(spec, week_prices):
    config = replace(SHORT, days=0.125, horizon_h=1.0)
    result = run_sensitivity(spec, SweepSpec("nl-r-factor", (1.0, 1.5), Scenario(2.0)), week_prices, config)
    assert [p.value for p in result.points] == [1.0, 1.5]
    assert result.runs[1].summary.r_factor == 1.5
    assert result.runs[1].summary.optimizer == "nl"


def test_parallel_jobs_keep_order(spec, week_prices):
    config = replace(SHORT, days=0.125)
    jobs = [(config, spec, Scenario(s), week_prices, 0.5) for s in (1.0, 2.0, 3.0)]
    serial = run_jobs(jobs, workers=1)
    parallel = run_jobs(jobs, workers=2)
    assert [r.summary for r in parallel] == [r.summary for r in serial]


def test_benchmark_summary_is_reproducible(tmp_path, spec, week_prices, system_cfg):
    config = replace(SHORT, days=0.125, horizon_h=1.0)
    written = []
    for name in ("a", "b"):
        result = run_benchmark(spec, [Scenario(2.0)], week_prices, config, seed=42)
        out = write_benchmark(result, tmp_path / name, system_cfg, {"command": "benchmark", "params": {}})
        written.append((out / "summary.json").read_bytes())
    assert written[0] == written[1]


@pytest.mark.slow
def test_week_benchmark_revenue_trends(week_benchmark):
    lp, nl = _by_soh(week_benchmark, "lp"), _by_soh(week_benchmark, "nl")
    assert [c.soh_r for c in lp] == [c.soh_r for c in nl] == [1.0, 2.0, 3.0]
    for cells in (lp, nl):
        revenues = [c.revenue_eur for c in cells]
        assert all(b < a for a, b in zip(revenues, revenues[1:]))
    gaps = [n.revenue_eur - l.revenue_eur for l, n in zip(lp, nl)]
    assert all(g >= 0 for g in gaps)
    assert all(b > a for a, b in zip(gaps, gaps[1:]))
    assert week_benchmark.summary.revenue_rte_correlation > 0.9


@pytest.mark.slow
def test_week_benchmark_efficiency_and_shortfall(week_benchmark):
    lp, nl = _by_soh(week_benchmark, "lp"), _by_soh(week_benchmark, "nl")
    for l, n in zip(lp, nl):
        if l.soh_r >= 2.0:
            assert n.rte > l.rte
    assert nl[-1].e_imb_wh <= 0.05 * lp[-1].e_imb_wh


@pytest.mark.slow
def test_week_benchmark_power_distribution(week_benchmark):
    nl_shares = [c.high_power_share for c in _by_soh(week_benchmark, "nl")]
    lp_shares = [c.high_power_share for c in _by_soh(week_benchmark, "lp")]
    assert all(b < a for a, b in zip(nl_shares, nl_shares[1:]))
    assert max(lp_shares) - min(lp_shares) <= 0.02


@pytest.mark.slow
def test_week_benchmark_ledgers(week_benchmark, spec, energy_residual):
    cap = 2.0 * spec.e_nom * 1.5 * (1 + 1e-6)
    for run in week_benchmark.runs:
        true_spec = apply_soh(spec, Scenario(run.summary.soh_r))
        assert energy_residual(run.ledger, true_spec).max() <= 1e-6
        daily = daily_throughput(run.ledger)
        assert len(daily) == 7
        assert (daily <= cap).all()


@pytest.mark.slow
def test_lp_eta_sweep_revenue_is_flat(spec, week_prices):
    sweep = SweepSpec("lp-eta", (0.90, 0.92, 0.94, 0.96, 0.97), Scenario(3.0))
    result = run_sensitivity(spec, sweep, week_prices, WEEK, workers=3)
    revenues = [p.revenue_eur for p in result.points]
    assert (max(revenues) - min(revenues)) / max(revenues) < 0.02


@pytest.mark.slow
def test_nl_r_factor_sweep_shapes(spec, week_prices):
    sweep = SweepSpec("nl-r-factor", (0.5, 1.5), Scenario(3.0))
    base, low, high = run_sensitivity(spec, sweep, week_prices, WEEK, workers=3).points
    assert base.value == 1.0 and low.value == 0.5 and high.value == 1.5
    assert low.e_imb_wh > base.e_imb_wh
    assert high.revenue_eur < base.revenue_eur
    assert high.e_imb_wh <= 1.01 * base.e_imb_wh + 1.0
