"""Validated-numerics toolkit for periodic waves of the FitzHugh-Nagumo ODE."""

from .intervals import (
    Interval,
    IntervalMatrix,
    IntervalVector,
    hull,
    intersect,
    linear_solve,
    poly_eval,
    split_box,
)

__all__ = [
    "Interval",
    "IntervalVector",
    "IntervalMatrix",
    "hull",
    "intersect",
    "linear_solve",
    "poly_eval",
    "split_box",
]
