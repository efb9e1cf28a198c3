"""
Tests de la boucle MPC et de la persistance des runs
"""

import numpy as np
import pandas as pd
import pytest

from control.budget import daily_throughput
from control.mpc import MpcConfig, _Controller, config_dict, mpc_run
from control.persist import load_run, save_run
from core.errors import ConfigurationError, ParameterError
from core.system import Scenario, TimeGrid, apply_soh
from market.prices import synth_prices

FAST = dict(days=1.0, horizon_h=12.0, action_min=15.0, opt_dt=900.0, sim_dt=300.0)
SHORT_NL = dict(optimizer="nl", days=0.25, horizon_h=2.0, action_min=15.0, opt_dt=900.0, sim_dt=300.0)


@pytest.fixture(scope="module")
def lp_day(spec):
    grid = TimeGrid(pd.Timestamp("2021-03-01"), 900.0, 7 * 96 + 48)
    prices = synth_prices(42, grid, 100.0, 50.0, 10.0)
    return mpc_run(MpcConfig(optimizer="lp", **FAST), spec, Scenario(2.0), prices, 0.5)


def test_lp_day_run(lp_day):
    summary = lp_day.summary
    assert len(lp_day.ledger) == 288
    assert summary.steps == 288
    assert summary.stats.solves == 96
    assert summary.stats.failures == 0
    assert summary.revenue_eur > 0
    assert summary.eta == pytest.approx(0.94418, abs=5e-4)
    assert summary.eta_conv is None
    assert summary.fec_used <= 1.5 * (1 + 1e-6)
    assert summary.fec_used <= summary.fec_scheduled + 1e-9
    assert "price_eur_mwh" in lp_day.ledger.columns


def test_ledger_is_zero_order_hold(lp_day):
    scheduled = lp_day.ledger["p_scheduled_w"].to_numpy().reshape(-1, 3)
    assert np.all(scheduled == scheduled[:, :1])


def test_run_is_deterministic(spec, lp_day, week_prices):
    again = mpc_run(MpcConfig(optimizer="lp", **FAST), spec, Scenario(2.0), week_prices, 0.5)
    pd.testing.assert_frame_equal(again.ledger, lp_day.ledger)
    assert again.summary == lp_day.summary


def test_save_and_load(tmp_path, lp_day, system_cfg):
    save_run(lp_day, tmp_path, system_cfg, {"command": "mpc-run", "params": config_dict(lp_day.config)})
    ledger, summary = load_run(tmp_path)
    assert summary == lp_day.summary
    np.testing.assert_array_equal(ledger["p_delivered_w"].to_numpy(), lp_day.ledger["p_delivered_w"].to_numpy())
    assert (tmp_path / "config_snapshot.yaml").exists()


def test_zero_cycle_budget_stays_idle(spec, week_prices):
    config = MpcConfig(optimizer="lp", fec_per_day=0.0, eta=0.95, **dict(FAST, days=0.25))
    result = mpc_run(config, spec, Scenario(1.0), week_prices, 0.5)
    assert result.summary.fec_used == pytest.approx(0.0, abs=1e-9)
    assert result.summary.revenue_eur == pytest.approx(0.0, abs=1e-9)
    assert result.summary.rte is None
    assert result.summary.eta == 0.95


def test_nl_short_run(spec, week_prices):
    result = mpc_run(MpcConfig(**SHORT_NL), spec, Scenario(3.0), week_prices, 0.5)
    summary = result.summary
    assert summary.stats.solves == 24
    assert summary.eta_conv == pytest.approx(0.97388, abs=5e-4)
    assert summary.e_imb_wh >= 0
    assert summary.steps == 72
    assert 0.0 <= summary.soc_end <= 1.0


def test_misaligned_start(spec, week_prices):
    shifted = week_prices.slice(0, 200).resample(TimeGrid(pd.Timestamp("2021-03-01T00:05:00"), 300.0, 300))
    with pytest.raises(ConfigurationError):
        mpc_run(MpcConfig(optimizer="lp", **dict(FAST, days=0.25)), spec, Scenario(1.0), shifted, 0.5)


def test_prices_too_short(spec, week_prices):
    with pytest.raises(ConfigurationError):
        mpc_run(MpcConfig(optimizer="lp", **FAST), spec, Scenario(1.0), week_prices.slice(0, 96), 0.5)


def test_config_validation(system_cfg):
    with pytest.raises(ParameterError):
        MpcConfig(optimizer="milp")
    with pytest.raises(ParameterError):
        MpcConfig(horizon_h=0.1, action_min=15.0)
    with pytest.raises(ConfigurationError):
        MpcConfig(opt_dt=900.0, sim_dt=700.0).sim_per_opt

    config = MpcConfig.from_section(system_cfg.mpc, "nl", r_factor=1.5, eta=None)
    assert config.r_factor == 1.5
    assert config.horizon_steps == 48
    assert config.action_steps == 1
    assert config.sim_per_opt == 15
    assert config.run_steps == 7 * 96


@pytest.mark.slow
def test_week_lp_against_nl_on_aged_battery(spec, week_prices, energy_residual):
    base = dict(days=7.0, horizon_h=12.0, action_min=15.0, opt_dt=900.0, sim_dt=60.0)
    lp = mpc_run(MpcConfig(optimizer="lp", **base), spec, Scenario(3.0), week_prices, 0.5)
    nl = mpc_run(MpcConfig(optimizer="nl", **base), spec, Scenario(3.0), week_prices, 0.5)
    assert nl.summary.e_imb_wh < 0.1 * lp.summary.e_imb_wh
    assert lp.summary.fec_used <= 7 * 1.5 * (1 + 1e-6)
    assert nl.summary.fec_used <= 7 * 1.5 * (1 + 1e-6)

    aged = apply_soh(spec, Scenario(3.0))
    for run in (lp, nl):
        assert energy_residual(run.ledger, aged).max() <= 1e-6
        assert (daily_throughput(run.ledger) <= 2.0 * spec.e_nom * 1.5 * (1 + 1e-6)).all()


def test_terminal_bound_on_last_iteration_only(spec, week_prices, monkeypatch):
    windows = []
    solve = _Controller.solve

    def recording(self, window, soc):
        windows.append((window.terminal_step, window.terminal_soc_min))
        return solve(self, window, soc)

    monkeypatch.setattr(_Controller, "solve", recording)
    config = MpcConfig(optimizer="lp", eta=0.95, **dict(FAST, days=0.25))
    result = mpc_run(config, spec, Scenario(1.0), week_prices, 0.4)
    assert len(windows) == 24
    assert windows[:-1] == [(None, None)] * 23
    assert windows[-1] == (0, 0.4)
    assert result.summary.stats.solves == 24


def test_terminal_bound_disabled(spec, week_prices, monkeypatch):
    steps = []
    solve = _Controller.solve

    def recording(self, window, soc):
        steps.append(window.terminal_step)
        return solve(self, window, soc)

    monkeypatch.setattr(_Controller, "solve", recording)
    config = MpcConfig(optimizer="lp", eta=0.95, terminal_soc=False, **dict(FAST, days=0.125))
    mpc_run(config, spec, Scenario(1.0), week_prices, 0.5)
    assert steps == [None] * 12
