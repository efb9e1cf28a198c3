"""
Configuration d'exécution de bessopt
"""

import os
from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

PACKAGE_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_SYSTEM_CONFIG = PACKAGE_ROOT / "config" / "system.yaml"


class Config(BaseSettings):
    """Configuration principale (variables d'environnement BESSOPT_*)"""

    model_config = SettingsConfigDict(
        env_prefix="BESSOPT_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = "bessopt"
    version: str = "1.0.0"

    # Logging
    log_level: str = Field(default="INFO")
    log_file: Optional[str] = Field(default=None)

    # Exécution
    output_dir: Path = Field(default=Path("runs"))
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    seed: int = Field(default=42)

    # Système
    system_config: Path = Field(default=DEFAULT_SYSTEM_CONFIG)


# Instance globale de configuration
config = Config()
