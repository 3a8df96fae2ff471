"""Directional bounded complexity of Z^q-actions, measured at finite scale."""

from __future__ import annotations

__version__ = "0.1.0"

from .covering import BOUNDED, GROWING, INCONCLUSIVE, classify, cover_exact, cover_greedy, separated_lower
from .lattice import Direction, strip_window, time_window
from .metrics import MetricSeq
from .systems import FullShift, PermutationSystem, RotationSystem, SkewShift, make_system, sample_measure

__all__ = [
    "BOUNDED",
    "GROWING",
    "INCONCLUSIVE",
    "Direction",
    "FullShift",
    "MetricSeq",
    "PermutationSystem",
    "RotationSystem",
    "SkewShift",
    "classify",
    "cover_exact",
    "cover_greedy",
    "make_system",
    "sample_measure",
    "separated_lower",
    "strip_window",
    "time_window",
]
