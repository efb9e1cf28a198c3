"""
Chargement de la configuration de l'installation
================================================

Lecture du fichier YAML, validation par le schéma Pydantic, construction des
types du domaine et instantané de configuration pour le rejeu.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import pandas as pd
import yaml
from loguru import logger
from pydantic import ValidationError

from .config import DEFAULT_SYSTEM_CONFIG
from .errors import FormatError, ParameterError
from .schema import SystemConfigFile
from .system import CellSpec, ConverterSpec, OcvCurve, PackLayout, Scenario, SystemSpec

PathLike = Union[str, Path]


def _validation_error(exc: ValidationError) -> ParameterError:
    first = exc.errors()[0]
    field = ".".join(str(part) for part in first["loc"])
    return ParameterError(f"{field}: {first['msg']}", field)


def load_ocv_csv(path: PathLike, interpolation: str = "linear") -> OcvCurve:
    """Courbe OCV depuis un CSV à deux colonnes ``soc,voltage_v``"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str)
    except (OSError, pd.errors.ParserError) as e:
        raise FormatError(f"CSV OCV illisible ({path}): {e}")

    if list(frame.columns) != ["soc", "voltage_v"]:
        raise FormatError(f"en-tête attendu 'soc,voltage_v' dans {path}", line=1)

    socs, volts = [], []
    for idx, row in enumerate(frame.itertuples(index=False)):
        try:
            socs.append(float(row.soc))
            volts.append(float(row.voltage_v))
        except (TypeError, ValueError):
            raise FormatError(f"valeur non numérique dans {path}", line=idx + 2)

    return OcvCurve(tuple(socs), tuple(volts), interpolation)


def read_config_file(path: Optional[PathLike] = None) -> SystemConfigFile:
    """
    Lecture et validation du fichier YAML

    La courbe OCV d'un CSV est chargée en ligne ; le chemin du CSV de prix
    est rendu relatif au répertoire du fichier YAML.
    """
    path = Path(path) if path else DEFAULT_SYSTEM_CONFIG
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise FormatError(f"fichier de configuration introuvable: {path} ({e})")
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise FormatError(f"YAML invalide: {e}", line=mark.line + 1 if mark else None)

    try:
        cfg = SystemConfigFile.model_validate(raw or {})
    except ValidationError as e:
        raise _validation_error(e)

    if cfg.ocv.csv is not None:
        curve = load_ocv_csv(path.parent / cfg.ocv.csv, cfg.ocv.interpolation)
        ocv = cfg.ocv.model_copy(update={"soc": list(curve.soc), "voltage_v": list(curve.voltage), "csv": None})
        cfg = cfg.model_copy(update={"ocv": ocv})

    if cfg.market.csv is not None and not Path(cfg.market.csv).is_absolute():
        market = cfg.market.model_copy(update={"csv": str((path.parent / cfg.market.csv).resolve())})
        cfg = cfg.model_copy(update={"market": market})

    logger.debug(f"Configuration chargée depuis {path}")
    return cfg


def build_system(cfg: SystemConfigFile) -> SystemSpec:
    """Construction du SystemSpec à partir d'une configuration validée"""
    if cfg.ocv.soc is None or cfg.ocv.voltage_v is None:
        raise ParameterError("courbe OCV non résolue", "ocv")

    return SystemSpec(
        cell=CellSpec(
            q_nom=cfg.cell.q_nom_ah,
            v_nom=cfg.cell.v_nom_v,
            v_min=cfg.cell.v_min_v,
            v_max=cfg.cell.v_max_v,
            r_internal=cfg.cell.r_internal_ohm,
            c_rate_max=cfg.cell.c_rate_max_per_h,
            i_max=cfg.cell.i_max_a,
        ),
        layout=PackLayout(cfg.layout.series, cfg.layout.parallel),
        converter=ConverterSpec(
            p_rated=cfg.converter.p_rated_w,
            a=cfg.converter.loss_a_pu,
            b=cfg.converter.loss_b_pu,
            c=cfg.converter.loss_c_pu,
        ),
        ocv=OcvCurve(tuple(cfg.ocv.soc), tuple(cfg.ocv.voltage_v), cfg.ocv.interpolation),
        soc_min=cfg.window.soc_min,
        soc_max=cfg.window.soc_max,
        e_nom=cfg.window.e_nom_wh,
        v_nom_system=cfg.window.v_nom_system_v,
    )


def build_scenarios(cfg: SystemConfigFile) -> List[Scenario]:
    return [Scenario(s.soh_r, s.label) for s in cfg.scenarios]


def load_system(path: Optional[PathLike] = None) -> Tuple[SystemSpec, List[Scenario]]:
    """Installation et scénarios depuis un fichier YAML (défaut : fichier livré)"""
    cfg = read_config_file(path)
    return build_system(cfg), build_scenarios(cfg)


def write_snapshot(path: PathLike, cfg: SystemConfigFile, run: Dict[str, Any]) -> Path:
    """
    Instantané de configuration

    Contient la configuration complète (OCV en ligne) et les paramètres de la
    commande, suffisants pour rejouer le run à l'identique.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"system": cfg.model_dump(mode="json"), "run": run}
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(payload, f, sort_keys=True, allow_unicode=True)
    return path


def read_snapshot(path: PathLike) -> Tuple[SystemConfigFile, Dict[str, Any]]:
    """Relecture d'un instantané écrit par ``write_snapshot``"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise FormatError(f"instantané illisible ({path}): {e}")

    if not isinstance(payload, dict) or "system" not in payload or "run" not in payload:
        raise FormatError(f"instantané incomplet: {path}")
    try:
        cfg = SystemConfigFile.model_validate(payload["system"])
    except ValidationError as e:
        raise _validation_error(e)
    return cfg, dict(payload["run"])


def override_config(cfg: SystemConfigFile, section: str, values: Dict[str, Any]) -> SystemConfigFile:
    """
    Surcharge d'une section par des valeurs explicites (options de la ligne de commande)

    Les valeurs ``None`` sont ignorées ; le résultat est revalidé.
    """
    values = {k: v for k, v in values.items() if v is not None}
    if not values:
        return cfg
    merged = {**getattr(cfg, section).model_dump(), **values}
    try:
        updated = type(getattr(cfg, section)).model_validate(merged)
    except ValidationError as e:
        error = _validation_error(e)
        raise ParameterError(f"{section}.{error}", f"{section}.{error.field}")
    return cfg.model_copy(update={section: updated})
