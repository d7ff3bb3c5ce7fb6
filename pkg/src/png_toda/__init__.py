"""Exact transition probabilities of polynuclear growth and their Toda structure."""

__version__ = "0.1.0"

from .fredholm import FredholmResult, png_cdf
from .heightfn import NEG_INF, HeightFunction, flat, narrow_wedge, parse_initial_data, two_step

__all__ = [
    "FredholmResult",
    "HeightFunction",
    "NEG_INF",
    "flat",
    "narrow_wedge",
    "parse_initial_data",
    "png_cdf",
    "two_step",
]
