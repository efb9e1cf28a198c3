"""
Hiérarchie d'exceptions de bessopt
==================================

Toutes les erreurs métier dérivent de ``BessError`` ; la CLI les convertit en
code de sortie 1.
"""

from typing import Any, Dict, Optional


class BessError(Exception):
    """Erreur de base du domaine"""


class ParameterError(BessError):
    """Paramètre invalide ou invariant violé"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class DomainError(ParameterError):
    """Argument hors du domaine de définition (ex. SOC hors de [0, 1])"""


class RangeError(ParameterError):
    """Puissance au-delà de la puissance nominale"""


class FormatError(BessError):
    """Fichier d'entrée illisible"""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"ligne {line}: {message}")
        self.line = line


class GapError(BessError):
    """Intervalle manquant dans une série temporelle"""

    def __init__(self, message: str, timestamp: Any = None):
        super().__init__(message)
        self.timestamp = timestamp


class ConfigurationError(BessError):
    """Configuration incohérente détectée avant le lancement d'un run"""


class InfeasibleError(BessError):
    """Problème d'optimisation infaisable"""


class SolverError(BessError):
    """Échec du solveur, avec diagnostics de l'itéré"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SocBoundError(BessError):
    """Trajectoire de SOC hors des bornes"""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (pas {step})")
        self.step = step


class OracleError(BessError):
    """L'oracle de programmation dynamique n'admet aucune transition"""


class UndefinedMetricError(BessError):
    """Métrique non définie (dénominateur nul ou négatif)"""


class FitError(BessError):
    """Ajustement impossible (données vides)"""
