"""Direction vectors and the lattice strips they cut out of Z^q.

A direction ``v = (1, beta_2, ..., beta_q)`` together with half-widths
``b = (b_2, ..., b_q)`` defines the strip of integer points ``w`` with
``beta_i * w_1 - b_i <= w_i <= beta_i * w_1 + b_i`` for every ``i >= 2``.
Truncating the first coordinate to ``0..k-1`` gives the finite window that
every directional metric averages or maximises over.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

Slope = Union[Fraction, float]


def parse_slope(value: object) -> Slope:
    """Turn a config value into a slope.

    Integers and ``"p/r"`` strings become exact fractions; floats stay floats
    and are treated as irrational.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("slope cannot be a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad rational slope {value!r}; expected 'p/r'") from exc
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"slope must be finite, got {value}")
        return value
    raise TypeError(f"unsupported slope type {type(value).__name__}")


def slope_to_json(value: Slope) -> object:
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return value


def slope_label(value: Slope) -> str:
    """Short text form used in CSV rows."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return repr(value)


def _column_bounds(beta: Slope, b: float, m: int) -> tuple[int, int]:
    """Inclusive integer range of ``[beta*m - b, beta*m + b]``."""
    if isinstance(beta, Fraction):
        # Fraction(float) is exact, so boundary points are decided exactly.
        fb = Fraction(b)
        centre = beta * m
        return math.ceil(centre - fb), math.floor(centre + fb)
    centre = beta * m
    return math.ceil(centre - b), math.floor(centre + b)


@dataclass(frozen=True)
class Direction:
    """Direction ``(1, beta)`` in Z^q plus strip half-widths ``b``."""

    q: int
    beta: tuple[Slope, ...]
    b: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.q < 2:
            raise ValueError(f"q must be >= 2, got {self.q}")
        beta = tuple(parse_slope(x) for x in self.beta)
        b = tuple(float(x) for x in self.b)
        if len(beta) != self.q - 1 or len(b) != self.q - 1:
            raise ValueError(f"beta and b need {self.q - 1} entries for q={self.q}")
        if any(not (x > 0) or not math.isfinite(x) for x in b):
            raise ValueError(f"half-widths must be positive, got {b}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "b", b)

    @classmethod
    def planar(cls, beta: object, b: float = 1.0) -> "Direction":
        return cls(2, (beta,), (b,))

    @classmethod
    def from_json(cls, data: dict) -> "Direction":
        q = int(data.get("q", 2))
        beta = data["beta"]
        b = data.get("b", [1.0])
        if not isinstance(beta, list):
            beta = [beta]
        if not isinstance(b, list):
            b = [b]
        return cls(q, tuple(beta), tuple(b))

    def to_json(self) -> dict:
        return {"q": self.q, "beta": [slope_to_json(x) for x in self.beta], "b": list(self.b)}

    def with_b(self, b: float | Sequence[float]) -> "Direction":
        if isinstance(b, (int, float)):
            b = (float(b),) * (self.q - 1)
        return Direction(self.q, self.beta, tuple(b))

    @property
    def is_rational(self) -> bool:
        return all(isinstance(x, Fraction) for x in self.beta)

    def column(self, m: int) -> list[tuple[int, int]]:
        return [_column_bounds(beta, b, m) for beta, b in zip(self.beta, self.b)]

    def contains(self, w: Sequence[int]) -> bool:
        return strip_contains(self, w)

    def label(self) -> tuple[str, str]:
        return (
            ";".join(slope_label(x) for x in self.beta),
            ";".join(repr(x) for x in self.b),
        )


@dataclass(frozen=True)
class StripWindow:
    """Integer points of the strip with first coordinate in ``0..k-1``.

    ``points`` is an ``(n, q)`` integer array in lexicographic order;
    ``column_sizes[m]`` counts the points whose first coordinate is ``m``.
    """

    direction: Direction | None
    k: int
    points: np.ndarray
    column_sizes: tuple[int, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def empty_columns(self) -> list[int]:
        return [m for m, c in enumerate(self.column_sizes) if c == 0]

    def as_tuples(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in p) for p in self.points]

    def reach(self) -> int:
        """Largest absolute coordinate appearing in the window."""
        if len(self.points) == 0:
            return 0
        return int(np.abs(self.points).max())


def strip_window(d: Direction, k: int) -> StripWindow:
    if k < 1:
        raise ValueError(f"depth k must be >= 1, got {k}")
    pts: list[tuple[int, ...]] = []
    sizes = []
    for m in range(k):
        ranges = [range(lo, hi + 1) for lo, hi in d.column(m)]
        col = [(m, *rest) for rest in itertools.product(*ranges)]
        sizes.append(len(col))
        pts.extend(col)
    arr = np.array(pts, dtype=np.int64).reshape(len(pts), d.q)
    return StripWindow(d, k, arr, tuple(sizes))


def time_window(k: int) -> StripWindow:
    """The window ``0..k-1`` of a Z-action, shaped like a one-dimensional strip."""
    if k < 1:
        raise ValueError(f"depth k must be >= 1, got {k}")
    return StripWindow(None, k, np.arange(k, dtype=np.int64).reshape(k, 1), (1,) * k)


def strip_contains(d: Direction, w: Sequence[int]) -> bool:
    if len(w) != d.q:
        raise ValueError(f"vector of dimension {len(w)} given for q={d.q}")
    m = int(w[0])
    for (lo, hi), wi in zip(d.column(m), w[1:]):
        if not lo <= int(wi) <= hi:
            return False
    return True


def strip_ratio(d: Direction, b_small: float, k: int) -> float:
    """``#window(b_small) / #window(1)`` for a planar direction with ``b = 1``."""
    if d.q != 2:
        raise ValueError("strip_ratio is defined for q = 2")
    if d.b != (1.0,):
        raise ValueError(f"reference direction must have b = 1, got {d.b}")
    if not 0 < b_small <= 1:
        raise ValueError(f"b_small must lie in (0, 1], got {b_small}")
    denom = len(strip_window(d, k))
    if denom == 0:
        raise ValueError("reference window is empty")
    return len(strip_window(d.with_b(b_small), k)) / denom
