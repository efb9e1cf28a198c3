"""
Modèle de batterie à circuit équivalent (source OCV + résistance série)
=====================================================================

    p_dc = v·i,   v = ocv(soc) + i·R,   soc' = soc + i·Δt / Q_N

Courant positif en charge. L'OCV est évaluée en début de pas.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.system import OcvCurve, PackParams

# Ordre d'application des limites ; en cas d'égalité la dernière l'emporte
LIMIT_ORDER = ("power", "current", "voltage", "soc")


@dataclass(frozen=True)
class BatteryStep:
    """Résultat d'un pas batterie"""
    i: float             # A
    v: float             # V
    p_dc: float          # W
    soc: float           # SOC de fin de pas
    ocv: float           # V, début de pas
    loss_wh: float       # pertes ohmiques
    stored_wh: float     # énergie stockée dans la source OCV
    clip_reason: Optional[str] = None

    @property
    def clipped(self) -> bool:
        return self.clip_reason is not None


def current_for_power(ocv: float, r: float, p_dc: float) -> float:
    """
    Courant réalisant ``p_dc`` (racine de R·i² + ocv·i − p = 0 du côté physique)

    Forme stable 2p / (ocv + sqrt(ocv² + 4Rp)) ; tend vers p/ocv quand R → 0.
    Renvoie NaN si la puissance de décharge dépasse ocv² / 4R.
    """
    disc = ocv * ocv + 4.0 * r * p_dc
    if disc < 0:
        return float("nan")
    return 2.0 * p_dc / (ocv + np.sqrt(disc))


def energy_content_wh(pack: PackParams, ocv: OcvCurve, soc: float) -> float:
    """Énergie de la source OCV au-dessus de SOC = 0 : Q_N·∫_0^soc ocv [Wh]"""
    return pack.q_n * float(ocv.integral(soc))


def _window(pack: PackParams, ocv: float, soc: float, dt_h: float, soc_min: float, soc_max: float):
    """Bornes de courant (lo, hi) par limite, dans l'ordre d'application"""
    if pack.r > 0:
        v_lo, v_hi = (pack.v_min - ocv) / pack.r, (pack.v_max - ocv) / pack.r
    else:
        v_lo, v_hi = -np.inf, np.inf
    return [
        ("current", -pack.i_max, pack.i_max),
        ("voltage", v_lo, v_hi),
        ("soc", (soc_min - soc) * pack.q_n / dt_h, (soc_max - soc) * pack.q_n / dt_h),
    ]


def battery_step(
    pack: PackParams,
    ocv: OcvCurve,
    soc: float,
    p_dc_target: float,
    dt: float,
    soc_min: float = 0.0,
    soc_max: float = 1.0,
) -> BatteryStep:
    """
    Un pas du modèle ECM pour une consigne de puissance DC

    ``ocv`` est la courbe à l'échelle du pack. Les limites de courant, de
    tension et de SOC réduisent |i| au maximum admissible ; la limite
    retenue est celle qui fixe le courant final.
    """
    dt_h = dt / 3600.0
    e0 = float(ocv(soc))

    reason = None
    i_req = current_for_power(e0, pack.r, p_dc_target)
    if np.isnan(i_req):
        # Au-delà du point de puissance maximale
        i_req = -e0 / (2.0 * pack.r)
        reason = "power"

    limits = _window(pack, e0, soc, dt_h, soc_min, soc_max)
    lo = max(max(bound[1] for bound in limits), min(0.0, i_req))
    hi = min(min(bound[2] for bound in limits), max(0.0, i_req))
    i = float(min(max(i_req, lo), hi))

    if i != i_req:
        bound_index = 1 if i > i_req else 2
        for name, *bounds in reversed(limits):
            if bounds[bound_index - 1] == i:
                reason = name
                break

    v = e0 + i * pack.r
    p_dc = p_dc_target if reason is None else v * i
    return BatteryStep(
        i=i,
        v=v,
        p_dc=p_dc,
        soc=soc + i * dt_h / pack.q_n,
        ocv=e0,
        loss_wh=i * i * pack.r * dt_h,
        stored_wh=e0 * i * dt_h,
        clip_reason=reason,
    )
