"""
Fixtures partagées : installation livrée, scénarios et petites séries de prix
"""

import numpy as np
import pandas as pd
import pytest

from core.loader import build_scenarios, build_system, read_config_file
from core.system import Scenario, TimeGrid, pack_params
from market.prices import PriceSeries, synth_prices
from plant.converter import converter_loss

START = pd.Timestamp("2021-03-01T00:00:00")


@pytest.fixture(scope="session")
def system_cfg():
    return read_config_file()


@pytest.fixture(scope="session")
def spec(system_cfg):
    return build_system(system_cfg)


@pytest.fixture(scope="session")
def scenarios(system_cfg):
    return build_scenarios(system_cfg)


@pytest.fixture
def bol():
    return Scenario(1.0, "BOL")


def price_series(values, dt=900.0, start=START):
    values = np.asarray(values, dtype=float)
    return PriceSeries(TimeGrid(start, dt, len(values)), values)


@pytest.fixture
def hourly_prices():
    """Deux creux et deux pointes sur 8 h au pas horaire"""
    return price_series([40.0, 30.0, 120.0, 150.0, 20.0, 25.0, 140.0, 160.0], dt=3600.0)


@pytest.fixture
def week_prices():
    """Prix synthétiques au pas de 15 min couvrant 7 jours plus un horizon de 12 h"""
    grid = TimeGrid(START, 900.0, 7 * 96 + 48)
    return synth_prices(42, grid, 100.0, 50.0, 10.0)


@pytest.fixture
def make_prices():
    return price_series


def ledger_energy_residual(ledger, spec):
    """
    Bilan AC − pertes onduleur − pertes ohmiques − énergie OCV par pas

    Chaque terme est recalculé depuis les colonnes de puissance, de courant
    et de SOC du journal avec les paramètres de ``spec`` (installation vieillie
    comprise) ; résidu relatif à p_rated·Δt.
    """
    pack = pack_params(spec)
    hours = ledger["dt_s"].to_numpy(dtype=float) / 3600.0
    p_ac = ledger["p_delivered_w"].to_numpy(dtype=float)
    i = ledger["i_a"].to_numpy(dtype=float)
    soc_start = ledger["soc_start"].to_numpy(dtype=float)
    soc_end = ledger["soc_end"].to_numpy(dtype=float)

    converter = np.asarray(converter_loss(spec.converter, p_ac)) * hours
    ohmic = i * i * pack.r * hours
    stored = spec.pack_ocv(soc_start) * pack.q_n * (soc_end - soc_start)
    return np.abs(p_ac * hours - converter - ohmic - stored) / (spec.converter.p_rated * hours)


@pytest.fixture
def energy_residual():
    return ledger_energy_residual
