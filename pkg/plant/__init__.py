"""
Plant Module - bessopt
======================

Émulateur de l'installation réelle : onduleur à pertes quadratiques et
batterie à circuit équivalent.
"""

from .battery import BatteryStep, battery_step
from .converter import converter_ac_to_dc, converter_dc_to_ac, converter_efficiency, converter_loss
from .simulator import (
    LEDGER_COLUMNS,
    PlantSimulator,
    PlantState,
    StepResult,
    ledger_frame,
    log_clipping,
    read_ledger,
    simulate,
    write_ledger,
)

__all__ = [
    "BatteryStep",
    "battery_step",
    "converter_ac_to_dc",
    "converter_dc_to_ac",
    "converter_efficiency",
    "converter_loss",
    "PlantSimulator",
    "PlantState",
    "StepResult",
    "LEDGER_COLUMNS",
    "ledger_frame",
    "log_clipping",
    "read_ledger",
    "simulate",
    "write_ledger",
]
