"""
Persistance d'un run dans son répertoire
========================================

    <run_dir>/ledger.csv            journal au pas de simulation
    <run_dir>/summary.json          RunSummary, clés triées
    <run_dir>/config_snapshot.yaml  configuration complète + paramètres du run
"""

import json
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import pandas as pd
from loguru import logger
from pydantic import BaseModel

from core.loader import write_snapshot
from core.schema import SystemConfigFile
from plant.simulator import read_ledger, write_ledger

from .mpc import RunResult, RunSummary

PathLike = Union[str, Path]

LEDGER_FILE = "ledger.csv"
SUMMARY_FILE = "summary.json"
SNAPSHOT_FILE = "config_snapshot.yaml"


def write_json(path: PathLike, model: Union[BaseModel, Dict[str, Any]]) -> Path:
    """JSON déterministe (clés triées, indentation fixe)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = model.model_dump(mode="json") if isinstance(model, BaseModel) else model
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def save_run(result: RunResult, run_dir: PathLike, cfg: SystemConfigFile, run: Dict[str, Any]) -> Path:
    """Écriture du journal, du résumé et de l'instantané de configuration"""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    write_ledger(result.ledger, run_dir / LEDGER_FILE)
    write_json(run_dir / SUMMARY_FILE, result.summary)
    write_snapshot(run_dir / SNAPSHOT_FILE, cfg, run)
    logger.info(f"Run enregistré dans {run_dir}")
    return run_dir


def load_run(run_dir: PathLike) -> Tuple[pd.DataFrame, RunSummary]:
    """Relecture du journal et du résumé d'un run"""
    run_dir = Path(run_dir)
    ledger = read_ledger(run_dir / LEDGER_FILE)
    summary = RunSummary.model_validate_json((run_dir / SUMMARY_FILE).read_text(encoding="utf-8"))
    return ledger, summary
