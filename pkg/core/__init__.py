"""
Core Module - bessopt
=====================

Types du domaine, configuration, erreurs et logging partagés par tous les modules.
"""

__version__ = "1.0.0"

from .config import Config, config
from .errors import BessError
from .system import (
    CellSpec,
    ConverterSpec,
    OcvCurve,
    PackLayout,
    PackParams,
    Scenario,
    Schedule,
    SystemSpec,
    TimeGrid,
    apply_soh,
    ocv_eval,
    pack_params,
)

__all__ = [
    "Config",
    "config",
    "BessError",
    "CellSpec",
    "ConverterSpec",
    "OcvCurve",
    "PackLayout",
    "PackParams",
    "Scenario",
    "Schedule",
    "SystemSpec",
    "TimeGrid",
    "apply_soh",
    "ocv_eval",
    "pack_params",
]
