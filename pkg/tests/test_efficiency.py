"""
Tests de la carte de rendement et des rendements constants ajustés
"""

import numpy as np
import pytest

from analytics.efficiency import EfficiencyMap, characterize, default_power_grid, fit_constant_eta, fit_efficiencies
from core.errors import FitError, ParameterError
from core.system import Scenario


def test_power_grid():
    grid = default_power_grid(180000.0)
    assert len(grid) == 20
    assert grid[0] == pytest.approx(9000.0)
    assert grid[-1] == pytest.approx(180000.0)


def test_map_is_consistent(spec):
    efficiency_map = characterize(spec, Scenario(1.0))
    assert efficiency_map.system.shape == (3, 20)
    np.testing.assert_allclose(efficiency_map.system, efficiency_map.battery * efficiency_map.converter)
    assert np.all(efficiency_map.system < efficiency_map.converter)
    # Rendement batterie décroissant avec la puissance
    assert np.all(np.diff(efficiency_map.battery, axis=1) < 0)


@pytest.mark.parametrize("soh, expected", [(1.0, 0.95933), (2.0, 0.94418), (3.0, 0.92836)])
def test_fitted_system_efficiency(spec, soh, expected):
    eta, eta_conv = fit_efficiencies(spec, Scenario(soh))
    assert eta == pytest.approx(expected, abs=5e-4)
    assert eta_conv == pytest.approx(0.97388, abs=5e-4)


def test_ageing_lowers_efficiency(spec):
    etas = [fit_efficiencies(spec, Scenario(s))[0] for s in (1.0, 2.0, 3.0)]
    assert etas[0] > etas[1] > etas[2]


def test_to_frame_long_format(spec):
    frame = characterize(spec, Scenario(2.0), soc_grid=(0.5,)).to_frame()
    assert list(frame.columns) == ["soc", "power_w", "component", "efficiency"]
    assert len(frame) == 3 * 20
    assert set(frame["component"]) == {"system", "battery", "converter"}


def test_fit_requires_row(spec):
    efficiency_map = characterize(spec, Scenario(1.0), soc_grid=(0.1, 0.9))
    with pytest.raises(FitError):
        fit_constant_eta(efficiency_map)


def test_fit_with_no_points():
    nan = np.full((1, 2), np.nan)
    empty = EfficiencyMap(np.array([0.5]), np.array([1.0, 2.0]), nan, nan, nan)
    with pytest.raises(FitError):
        fit_constant_eta(empty)


def test_invalid_grids(spec):
    with pytest.raises(ParameterError):
        characterize(spec, Scenario(1.0), soc_grid=(1.5,))
    with pytest.raises(ParameterError):
        characterize(spec, Scenario(1.0), power_grid=(200000.0,))
