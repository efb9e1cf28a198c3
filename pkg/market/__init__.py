"""
Market Module - bessopt
=======================

Séries de prix : import CSV, rééchantillonnage et génération synthétique.
"""

from .prices import PriceSeries, load_prices, resample_prices, synth_prices

__all__ = ["PriceSeries", "load_prices", "resample_prices", "synth_prices"]
