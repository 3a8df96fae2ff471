"""Bowen, max-mean and mean metrics along a strip (or along ``0..k-1``).

For a window ``W_k`` and base metric ``d``::

    bowen_k(x, y)   = max_{w in W_k} d(T^w x, T^w y)
    mean_k(x, y)    = (1 / #W_k) * sum_{w in W_k} d(T^w x, T^w y)
    maxmean_k(x, y) = max_{i <= k} mean_i(x, y)

All three are produced by one pass over the columns of the deepest window,
so a whole k grid costs the same as its largest depth.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from .lattice import Direction, StripWindow, strip_window, time_window
from .systems import ActionSystem

FAMILIES = ("bowen", "maxmean", "mean")

# windows beyond this many points use compensated summation
COMPENSATED_THRESHOLD = 100_000
DEFAULT_CACHE_BYTES = 256 * 2**20


def window_for(system: ActionSystem, direction: Direction | None, k: int) -> StripWindow:
    if direction is None:
        if system.q != 1:
            raise ValueError(f"Z-action metrics need a q=1 system, got q={system.q}")
        return time_window(k)
    if direction.q != system.q:
        raise ValueError(f"direction has q={direction.q} but system has q={system.q}")
    return strip_window(direction, k)


class _TranslateCache:
    """LRU store of per-translate distance arrays keyed by the action key."""

    def __init__(self, compute: Callable[[tuple], np.ndarray], capacity_bytes: int):
        self._compute = compute
        self._capacity = capacity_bytes
        self._store: OrderedDict[Any, np.ndarray] = OrderedDict()
        self._used = 0

    def get(self, key, w) -> np.ndarray:
        if key in self._store:
            self._store.move_to_end(key)
            return self._store[key]
        value = self._compute(w)
        if value.nbytes <= self._capacity:
            self._store[key] = value
            self._used += value.nbytes
            while self._used > self._capacity:
                _, old = self._store.popitem(last=False)
                self._used -= old.nbytes
        return value


class _Accumulator:
    def __init__(self, compensated: bool):
        self.total = None
        self.comp = None
        self.compensated = compensated

    def add(self, x: np.ndarray) -> None:
        if self.total is None:
            self.total = np.array(x, dtype=np.float64)
            self.comp = np.zeros_like(self.total)
            return
        if not self.compensated:
            self.total += x
            return
        # Neumaier summation
        t = self.total + x
        big = np.abs(self.total) >= np.abs(x)
        self.comp += np.where(big, (self.total - t) + x, (x - t) + self.total)
        self.total = t

    def value(self) -> np.ndarray:
        return self.total + self.comp if self.compensated else self.total


def sweep_depths(
    system: ActionSystem,
    direction: Direction | None,
    ks: Iterable[int],
    distance_of: Callable[[tuple], np.ndarray],
    families: Sequence[str] = FAMILIES,
    cache_bytes: int = DEFAULT_CACHE_BYTES,
) -> Iterator[tuple[int, dict[str, np.ndarray]]]:
    """Yield ``(k, {family: values})`` for each requested depth, in increasing k.

    ``distance_of(w)`` returns the base distances after applying ``T^w``;
    its shape (pairs or matrix) is passed straight through.
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ValueError(f"depth grid must be nonempty with k >= 1, got {ks}")
    for fam in families:
        if fam not in FAMILIES:
            raise ValueError(f"unknown metric family {fam!r}")
    window = window_for(system, direction, ks[-1])
    if len(window) == 0:
        raise ValueError("empty strip window")
    wanted = set(ks)
    cache = _TranslateCache(distance_of, cache_bytes)
    acc = _Accumulator(compensated=len(window) > COMPENSATED_THRESHOLD)
    bowen = maxmean = None
    count = 0
    start = 0
    for depth, size in enumerate(window.column_sizes, start=1):
        for w in window.points[start:start + size]:
            w = tuple(int(v) for v in w)
            dist = cache.get(system.action_key(w), w)
            bowen = np.array(dist, dtype=np.float64) if bowen is None else np.maximum(bowen, dist)
            acc.add(dist)
        start += size
        count += size
        if count == 0:
            continue
        # the clamp only removes rounding: a mean never exceeds the max
        mean = np.minimum(acc.value() / count, bowen)
        maxmean = mean.copy() if maxmean is None else np.maximum(maxmean, mean)
        if depth in wanted:
            out = {}
            if "bowen" in families:
                out["bowen"] = bowen.copy()
            if "maxmean" in families:
                out["maxmean"] = maxmean.copy()
            if "mean" in families:
                out["mean"] = mean.copy()
            yield depth, out


def matrix_profiles(
    system: ActionSystem,
    direction: Direction | None,
    pts: Any,
    ks: Iterable[int],
    families: Sequence[str] = FAMILIES,
) -> Iterator[tuple[int, dict[str, np.ndarray]]]:
    """Pairwise distance matrices over a sample for every depth in ``ks``."""

    def dist(w):
        v = system.view(system.act(w, pts))
        return system.pairwise(v, v)

    return sweep_depths(system, direction, ks, dist, families)


def paired_profiles(
    system: ActionSystem,
    direction: Direction | None,
    xs: Any,
    ys: Any,
    ks: Iterable[int],
    families: Sequence[str] = FAMILIES,
) -> Iterator[tuple[int, dict[str, np.ndarray]]]:
    """Distances ``rho_k(xs[i], ys[i])`` for every depth in ``ks``."""

    def dist(w):
        return system.paired(system.view(system.act(w, xs)), system.view(system.act(w, ys)))

    return sweep_depths(system, direction, ks, dist, families, cache_bytes=64 * 2**20)


@dataclass(frozen=True)
class MetricSeq:
    """One metric family of a system, directional or along a Z-action."""

    family: str
    system: ActionSystem
    direction: Direction | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown metric family {self.family!r}")
        if self.direction is None and self.system.q != 1:
            raise ValueError("Z-action mode needs a q=1 system; pass a direction otherwise")
        if self.direction is not None and self.direction.q != self.system.q:
            raise ValueError("direction dimension does not match the system")

    @property
    def mode(self) -> str:
        return "z_action" if self.direction is None else "directional"

    def window(self, k: int) -> StripWindow:
        return window_for(self.system, self.direction, k)

    def eval(self, x: Any, y: Any, k: int) -> float:
        xs, ys = self.system.stack([x]), self.system.stack([y])
        return float(self.paired(xs, ys, k)[0])

    def paired(self, xs: Any, ys: Any, k: int) -> np.ndarray:
        for _, vals in paired_profiles(self.system, self.direction, xs, ys, [k], [self.family]):
            return vals[self.family]
        raise AssertionError("unreachable")

    def eval_matrix(self, pts: Any, k: int) -> np.ndarray:
        if len(pts) == 0:
            raise ValueError("need at least one point")
        for _, vals in matrix_profiles(self.system, self.direction, pts, [k], [self.family]):
            return vals[self.family]
        raise AssertionError("unreachable")
