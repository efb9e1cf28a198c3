"""
Modèle d'onduleur à pertes quadratiques
=======================================

    loss(p) = p_rated · (a + b·|p|/p_rated + c·(p/p_rated)²)    pour p ≠ 0

avec ``p`` la puissance AC. En charge p_dc = p_ac − loss, en décharge
|p_ac| = |p_dc| − loss. Au repos (p_ac = 0) l'onduleur ne consomme rien.
"""

from typing import Union

import numpy as np

from core.errors import RangeError
from core.system import ConverterSpec

Power = Union[float, np.ndarray]

RATING_TOLERANCE = 1e-9


def _out(values: np.ndarray) -> Power:
    return float(values) if np.ndim(values) == 0 else values


def converter_loss(spec: ConverterSpec, p_ac: Power) -> Power:
    """Pertes [W] pour une puissance AC donnée"""
    p = np.abs(np.asarray(p_ac, dtype=float))
    x = p / spec.p_rated
    loss = spec.p_rated * (spec.a + spec.b * x + spec.c * x * x)
    return _out(np.where(p > 0, loss, 0.0))


def converter_ac_to_dc(spec: ConverterSpec, p_ac: Power) -> Power:
    """Puissance DC côté batterie (charge > 0)"""
    p = np.asarray(p_ac, dtype=float)
    if np.any(np.abs(p) > spec.p_rated * (1 + RATING_TOLERANCE)):
        raise RangeError(f"puissance AC au-delà de la puissance nominale ({spec.p_rated:g} W)", "p_ac")
    loss = np.asarray(converter_loss(spec, p))
    return _out(p - loss)


def converter_dc_to_ac(spec: ConverterSpec, p_dc: Power) -> Power:
    """
    Inverse de ``converter_ac_to_dc`` en forme fermée

    Pour p_dc < 0 on résout x + loss(x) = |p_dc| ; une puissance DC inférieure
    aux pertes à vide ne produit aucune puissance AC. Pour p_dc > 0 on prend la
    plus petite racine de x − loss(x) = p_dc.
    """
    q = np.asarray(p_dc, dtype=float)
    p_r, a, b, c = spec.p_rated, spec.a, spec.b, spec.c
    k = c / p_r

    # Décharge : k·x² + (1 + b)·x − (q − a·p_r) = 0
    net = np.maximum(-q - a * p_r, 0.0)
    x_dch = 2.0 * net / ((1.0 + b) + np.sqrt((1.0 + b) ** 2 + 4.0 * k * net))

    # Charge : k·x² − (1 − b)·x + (q + a·p_r) = 0
    rhs = np.maximum(q, 0.0) + a * p_r
    disc = (1.0 - b) ** 2 - 4.0 * k * rhs
    if np.any((q > 0) & (disc < 0)):
        raise RangeError("puissance DC de charge hors de portée de l'onduleur", "p_dc")
    x_ch = 2.0 * rhs / ((1.0 - b) + np.sqrt(np.maximum(disc, 0.0)))

    p_ac = np.where(q > 0, x_ch, np.where(q < 0, -x_dch, 0.0))
    if np.any(np.abs(p_ac) > p_r * (1 + RATING_TOLERANCE)):
        raise RangeError(f"puissance AC résultante au-delà de {p_r:g} W", "p_dc")
    return _out(p_ac)


def converter_efficiency(spec: ConverterSpec, p_ac: Power) -> Power:
    """Rendement en décharge |p_ac| / |p_dc| ; 0 à puissance nulle si a > 0"""
    p = np.abs(np.asarray(p_ac, dtype=float))
    loss = np.asarray(converter_loss(spec, p))
    with np.errstate(divide="ignore", invalid="ignore"):
        eff = np.where(p > 0, p / (p + loss), 1.0 if spec.a == 0 else 0.0)
    return _out(eff)
