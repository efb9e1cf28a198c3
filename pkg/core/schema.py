"""
Schéma du fichier de configuration de l'installation
====================================================

Modèles Pydantic validant le fichier YAML. Les unités figurent dans le nom
de chaque champ.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class CellSection(BaseModel):
    """Fiche technique d'une cellule"""
    q_nom_ah: float = Field(..., gt=0, description="Capacité nominale")
    v_nom_v: float = Field(..., gt=0, description="Tension nominale")
    v_min_v: float = Field(..., gt=0, description="Tension minimale")
    v_max_v: float = Field(..., gt=0, description="Tension maximale")
    r_internal_ohm: float = Field(..., ge=0, description="Résistance interne en début de vie")
    c_rate_max_per_h: float = Field(..., gt=0, description="C-rate maximal charge/décharge")
    i_max_a: Optional[float] = Field(None, gt=0, description="Courant maximal propre à la cellule")

    @model_validator(mode="after")
    def check_voltages(self):
        if not self.v_min_v < self.v_nom_v < self.v_max_v:
            raise ValueError("il faut v_min_v < v_nom_v < v_max_v")
        return self


class LayoutSection(BaseModel):
    """Montage du pack"""
    series: int = Field(..., ge=1, description="Cellules en série")
    parallel: int = Field(..., ge=1, description="Branches en parallèle")


class ConverterSection(BaseModel):
    """Onduleur et courbe de pertes"""
    p_rated_w: float = Field(..., gt=0, description="Puissance AC nominale")
    loss_a_pu: float = Field(0.0035, ge=0, description="Pertes constantes (p.u.)")
    loss_b_pu: float = Field(0.014, ge=0, description="Pertes linéaires (p.u.)")
    loss_c_pu: float = Field(0.009, ge=0, description="Pertes quadratiques (p.u.)")


class OcvSection(BaseModel):
    """Courbe OCV de la cellule, en ligne ou depuis un CSV (soc,voltage_v)"""
    soc: Optional[List[float]] = Field(None, description="Points de SOC [0, 1]")
    voltage_v: Optional[List[float]] = Field(None, description="Tensions de cellule")
    csv: Optional[str] = Field(None, description="Chemin du CSV, relatif au fichier YAML")
    interpolation: Literal["linear", "cubic"] = Field("linear", description="Interpolation")

    @model_validator(mode="after")
    def check_source(self):
        inline = self.soc is not None or self.voltage_v is not None
        if inline == (self.csv is not None):
            raise ValueError("la courbe OCV doit être définie soit en ligne, soit par csv")
        if inline and (self.soc is None or self.voltage_v is None):
            raise ValueError("soc et voltage_v doivent être fournis ensemble")
        return self


class WindowSection(BaseModel):
    """Fenêtre d'exploitation et capacité déclarée"""
    soc_min: float = Field(0.0, ge=0, le=1)
    soc_max: float = Field(1.0, ge=0, le=1)
    e_nom_wh: float = Field(..., gt=0, description="Capacité énergétique nominale")
    v_nom_system_v: Optional[float] = Field(None, gt=0, description="Tension nominale déclarée")


class ScenarioSection(BaseModel):
    """Scénario de vieillissement"""
    soh_r: float = Field(1.0, gt=0, description="R / R_BOL")
    label: str = Field("", description="Libellé")


class MarketSection(BaseModel):
    """Source de prix : CSV ou générateur synthétique"""
    csv: Optional[str] = Field(None, description="CSV timestamp,price_eur_mwh, relatif au fichier YAML")
    start: str = Field("2021-03-01T00:00:00", description="Début de la série synthétique")
    base_eur_mwh: float = Field(100.0, description="Niveau moyen")
    daily_amplitude_eur_mwh: float = Field(50.0, ge=0, description="Amplitude journalière")
    noise_sd_eur_mwh: float = Field(10.0, ge=0, description="Écart-type du bruit")
    seed: int = Field(42, description="Graine du bruit")


class MpcSection(BaseModel):
    """Paramètres de la boucle MPC"""
    horizon_h: float = Field(12.0, gt=0)
    action_horizon_min: float = Field(15.0, gt=0)
    opt_dt_s: float = Field(900.0, gt=0)
    sim_dt_s: float = Field(60.0, gt=0)
    fec_per_day: float = Field(1.5, ge=0)
    terminal_soc: bool = Field(True, description="SOC final >= SOC initial du run")
    days: float = Field(7.0, gt=0, description="Durée d'un run")
    eta: Optional[float] = Field(None, gt=0, le=1, description="η du LP, ajusté si absent")
    eta_conv: Optional[float] = Field(None, gt=0, le=1, description="η_conv du NL, ajusté si absent")

    @model_validator(mode="after")
    def check_steps(self):
        if self.action_horizon_min * 60.0 > self.horizon_h * 3600.0:
            raise ValueError("action_horizon_min doit être <= horizon_h")
        if self.sim_dt_s > self.opt_dt_s:
            raise ValueError("sim_dt_s doit être <= opt_dt_s")
        return self


class SystemConfigFile(BaseModel):
    """Fichier de configuration complet"""
    cell: CellSection
    layout: LayoutSection
    converter: ConverterSection
    ocv: OcvSection
    window: WindowSection
    scenarios: List[ScenarioSection] = Field(
        default_factory=lambda: [ScenarioSection(soh_r=s) for s in (1.0, 2.0, 3.0)]
    )
    market: MarketSection = Field(default_factory=MarketSection)
    mpc: MpcSection = Field(default_factory=MpcSection)

    @field_validator("scenarios")
    def validate_scenarios(cls, v):
        if not v:
            raise ValueError("au moins un scénario est requis")
        return v
