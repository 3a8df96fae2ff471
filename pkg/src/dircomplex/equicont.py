"""Finite-scale moduli of directional equicontinuity.

For a family of metrics ``rho_k`` and a set of close pairs ``(x_i, y_i)``,
the modulus at ``eps`` is the largest grid value ``delta`` such that every
pair with ``d(x, y) < delta`` has ``rho_k(x, y) < eps`` for all tested k.
A ``delta`` that no pair falls under proves nothing and is skipped, so a
modulus of 0 means "no tested delta works".

Families:

* ``bowen`` and ``maxmean`` are nondecreasing in k, so the check over all
  ``k <= k_max`` is the check at the largest grid depth;
* ``mean-limsup`` stands in for the limsup of the mean metric by its maximum
  over the last half of the k grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .lattice import Direction, strip_window, time_window
from .metrics import paired_profiles
from .systems import ActionSystem, fit_system

FAMILIES = ("bowen", "maxmean", "mean-limsup")
DELTA_GRID = tuple(2.0 ** -j for j in range(1, 9))
PASS = "PASS"
FAIL = "FAIL"


def depth_grid(k_max: int) -> tuple[int, ...]:
    """Powers of two below ``k_max``, then ``k_max`` itself."""
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    ks = [1 << j for j in range(k_max.bit_length()) if (1 << j) < k_max]
    return tuple(ks + [k_max])


def close_pairs(sys: ActionSystem, n: int, seed, partners: int = 1) -> tuple[Any, Any]:
    """``n`` base points, each repeated ``partners`` times, and perturbed partners.

    Pairs are laid out point-major: pair ``i * partners + j`` is the j-th
    partner of base point ``i``.
    """
    if n < 1 or partners < 1:
        raise ValueError("need n >= 1 and partners >= 1")
    rng = np.random.default_rng(seed)
    base = sys.sample(n, rng)
    xs = base[np.repeat(np.arange(n), partners)]
    ys = sys.perturb(xs, rng)
    return xs, ys


def family_values(
    sys: ActionSystem, d: Direction | None, family: str, xs: Any, ys: Any, ks: Sequence[int]
) -> np.ndarray:
    """Per-pair value that the modulus compares against ``eps``."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    ks = tuple(sorted(set(int(k) for k in ks)))
    if family == "mean-limsup":
        tail = set(ks[len(ks) // 2:])
        out = None
        for k, vals in paired_profiles(sys, d, xs, ys, ks, ["mean"]):
            if k in tail:
                out = vals["mean"] if out is None else np.maximum(out, vals["mean"])
        return out
    out = None
    for _, vals in paired_profiles(sys, d, xs, ys, ks, [family]):
        out = vals[family] if out is None else np.maximum(out, vals[family])
    return out


def _delta_for(d0: np.ndarray, vals: np.ndarray, eps: float, deltas: Sequence[float]) -> float:
    for delta in sorted(deltas, reverse=True):
        close = d0 < delta
        if close.any() and np.all(vals[close] < eps):
            return float(delta)
    return 0.0


@dataclass
class ModulusCurve:
    family: str
    eps_grid: tuple[float, ...]
    delta: dict[float, float]
    k_grid: tuple[int, ...] = ()
    n_pairs: int = 0

    @property
    def positive(self) -> bool:
        return all(v > 0 for v in self.delta.values())

    @property
    def verdict(self) -> str:
        return PASS if self.positive else FAIL

    def rows(self, discarded: int = 0) -> list[dict]:
        return [
            {
                "family": self.family,
                "eps": eps,
                "delta": self.delta[eps],
                "discarded": discarded,
                "verdict": PASS if self.delta[eps] > 0 else FAIL,
            }
            for eps in self.eps_grid
        ]


def modulus_from_values(
    family: str, d0: np.ndarray, vals: np.ndarray, eps_grid: Sequence[float],
    delta_grid: Sequence[float] = DELTA_GRID, k_grid: Sequence[int] = (),
) -> ModulusCurve:
    eps_grid = tuple(sorted(float(e) for e in eps_grid))
    delta = {eps: _delta_for(np.asarray(d0), np.asarray(vals), eps, delta_grid) for eps in eps_grid}
    return ModulusCurve(family, eps_grid, delta, tuple(k_grid), len(d0))


def modulus(
    sys: ActionSystem,
    d: Direction | None,
    family: str,
    pairs: tuple[Any, Any],
    k_max: int,
    eps_grid: Sequence[float],
    delta_grid: Sequence[float] = DELTA_GRID,
) -> ModulusCurve:
    """Largest passing grid ``delta`` for each ``eps``, over all supplied pairs.

    ``sys`` must already be able to resolve the depth-``k_max`` window (see
    :func:`fitted_for`); pairs are typically made by :func:`close_pairs`.
    """
    xs, ys = pairs
    ks = depth_grid(k_max)
    d0 = sys.paired(sys.view(xs), sys.view(ys))
    vals = family_values(sys, d, family, xs, ys, ks)
    return modulus_from_values(family, d0, vals, eps_grid, delta_grid, ks)


def fitted_for(sys: ActionSystem, d: Direction | None, k_max: int) -> ActionSystem:
    window = time_window(k_max) if d is None else strip_window(d, k_max)
    return fit_system(sys, [window])


# ----------------------------------------------------------------------
# measure versions


@dataclass
class MuReport:
    family: str
    tau: float
    n: int
    budget: int
    discarded: list[int]
    curve: ModulusCurve

    @property
    def verdict(self) -> str:
        return self.curve.verdict

    def rows(self) -> list[dict]:
        return self.curve.rows(len(self.discarded))


def mu_equicontinuity_report(
    sys: ActionSystem,
    d: Direction | None,
    family: str,
    tau: float,
    n: int,
    seed,
    k_max: int,
    eps_grid: Sequence[float],
    delta_grid: Sequence[float] = DELTA_GRID,
    partners: int = 3,
) -> MuReport:
    """Modulus after greedily discarding at most ``ceil(tau * n)`` base points.

    Each round drops the retained point with the most failing pairs, summed
    over the eps values whose modulus is still 0 (lowest index on ties),
    until every eps has a positive modulus or the budget is spent.
    """
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    sys = fitted_for(sys, d, k_max)
    xs, ys = close_pairs(sys, n, seed, partners)
    ks = depth_grid(k_max)
    d0 = sys.paired(sys.view(xs), sys.view(ys)).reshape(n, partners)
    vals = family_values(sys, d, family, xs, ys, ks).reshape(n, partners)
    budget = math.ceil(tau * n)
    keep = np.ones(n, dtype=bool)
    discarded: list[int] = []

    def curve() -> ModulusCurve:
        return modulus_from_values(family, d0[keep].ravel(), vals[keep].ravel(),
                                   eps_grid, delta_grid, ks)

    cur = curve()
    while not cur.positive and len(discarded) < budget:
        failing = [eps for eps, v in cur.delta.items() if v == 0]
        degree = sum((vals >= eps).sum(axis=1) for eps in failing)
        degree = np.where(keep, degree, -1)
        worst = int(np.argmax(degree))
        if degree[worst] <= 0:
            break
        keep[worst] = False
        discarded.append(worst)
        cur = curve()
    return MuReport(family, tau, n, budget, discarded, cur)
