"""Z^q-actions with a finite, exact representation.

Every system works on *batches* of points (numpy arrays whose first axis
indexes points) so that a translate ``T^w`` is applied to a whole sample in
one call.  Distances are computed from a system-specific ``view`` of a
batch, which holds exactly the information the base metric looks at.

Reference systems, all acting by Z^2:

* :class:`RotationSystem`  circle rotation ``x + m*alpha + n*gamma``
* :class:`FullShift`       translation on ``A^(Z^2)``
* :class:`SkewShift`       ``A^Z`` with ``(m, n)`` acting as ``sigma^(m-n)``
* :class:`PermutationSystem`  two commuting permutations of a finite set
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Hashable, Sequence

import numpy as np

from .lattice import StripWindow


class ResolutionError(RuntimeError):
    """A finite shift window is too small for the requested translate."""


class ActionSystem(ABC):
    kind: str = "abstract"
    q: int = 2
    diameter: float = 1.0

    # -- action ---------------------------------------------------------
    @abstractmethod
    def act(self, w: Sequence[int], pts: Any) -> Any:
        """Apply ``T^w`` to every point of a batch."""

    def act_each(self, ws: np.ndarray, pts: Any) -> Any:
        """Apply ``T^{ws[i]}`` to point ``i``."""
        ws = np.asarray(ws, dtype=np.int64).reshape(len(ws), self.q)
        keys, inverse = np.unique(ws, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        groups = [np.flatnonzero(inverse == g) for g in range(len(keys))]
        moved = [self.act(tuple(int(v) for v in keys[g]), pts[idx]) for g, idx in enumerate(groups)]
        return self._merge(moved, groups, len(ws))

    def _merge(self, parts: list, groups: list[np.ndarray], n: int) -> Any:
        out = np.empty((n,) + parts[0].shape[1:], dtype=parts[0].dtype)
        for part, idx in zip(parts, groups):
            out[idx] = part
        return out

    def action_key(self, w: Sequence[int]) -> Hashable:
        """Translates with equal keys act identically (used to reuse work)."""
        return tuple(int(v) for v in w)

    # -- metric ---------------------------------------------------------
    def view(self, pts: Any) -> np.ndarray:
        return np.asarray(pts)

    @abstractmethod
    def pairwise(self, va: np.ndarray, vb: np.ndarray) -> np.ndarray:
        """Distance matrix between two viewed batches."""

    @abstractmethod
    def paired(self, va: np.ndarray, vb: np.ndarray) -> np.ndarray:
        """Elementwise distances ``d(a_i, b_i)`` between viewed batches."""

    def distance(self, x: Any, y: Any) -> float:
        return float(self.paired(self.view(self.stack([x])), self.view(self.stack([y])))[0])

    # -- points ---------------------------------------------------------
    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> Any:
        """``n`` independent draws from the designated invariant measure."""

    @abstractmethod
    def perturb(self, pts: Any, rng: np.random.Generator) -> Any:
        """A close partner for every point, at randomly chosen scales."""

    def stack(self, points: Sequence[Any]) -> Any:
        return np.stack([np.asarray(p) for p in points])

    def same(self, a: Any, b: Any, tol: float = 0.0) -> bool:
        """Batch equality at representation resolution."""
        return bool(np.all(self.paired(self.view(a), self.view(b)) <= tol))

    # -- bookkeeping ----------------------------------------------------
    def reach(self, points: np.ndarray) -> int:
        """How far a set of translates moves the origin (0 when irrelevant)."""
        return 0

    def fitted(self, reach: int) -> "ActionSystem":
        """A copy able to apply every translate of the given reach."""
        return self

    @abstractmethod
    def to_json(self) -> dict:
        ...


def sample_measure(sys: ActionSystem, n: int, seed: int | Sequence[int]) -> Any:
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    return sys.sample(n, np.random.default_rng(seed))


def orbit_segment(sys: ActionSystem, x: Any, window: StripWindow) -> list:
    if len(window) == 0:
        raise ValueError("empty strip window")
    one = sys.stack([x])
    return [sys.act(tuple(int(v) for v in w), one)[0] for w in window.points]


def fit_system(sys: ActionSystem, windows: Sequence[StripWindow]) -> ActionSystem:
    """Resize finite representations so every window translate is resolvable."""
    reach = max((sys.reach(w.points) for w in windows), default=0)
    return sys.fitted(reach)


# ----------------------------------------------------------------------
# circle rotation


def circle_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.abs(a - b)
    return np.minimum(d, 1.0 - d)


def _wrap(x: np.ndarray) -> np.ndarray:
    x = np.mod(x, 1.0)
    return np.where(x >= 1.0, 0.0, x)


@dataclass(frozen=True)
class RotationSystem(ActionSystem):
    alpha: float = (math.sqrt(5.0) - 1.0) / 2.0
    gamma: float = math.sqrt(7.0) - 2.0
    kind: str = field(default="rotation", init=False)
    q: int = field(default=2, init=False)
    diameter: float = field(default=0.5, init=False)

    def act(self, w, pts):
        m, n = int(w[0]), int(w[1])
        return _wrap(np.asarray(pts, dtype=float) + (m * self.alpha + n * self.gamma))

    def act_each(self, ws, pts):
        ws = np.asarray(ws, dtype=np.int64).reshape(-1, 2)
        return _wrap(np.asarray(pts, dtype=float) + ws[:, 0] * self.alpha + ws[:, 1] * self.gamma)

    def pairwise(self, va, vb):
        return circle_distance(va[:, None], vb[None, :])

    def paired(self, va, vb):
        return circle_distance(va, vb)

    def sample(self, n, rng):
        return rng.random(n)

    def perturb(self, pts, rng):
        n = len(pts)
        scale = 10.0 ** rng.uniform(-4.0, math.log10(0.5), size=n)
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return _wrap(np.asarray(pts) + sign * scale)

    def stack(self, points):
        return np.asarray(points, dtype=float).reshape(-1)

    def same(self, a, b, tol: float = 1e-9):
        return super().same(a, b, tol)

    def to_json(self):
        return {"kind": "rotation", "alpha": self.alpha, "gamma": self.gamma}


# ----------------------------------------------------------------------
# finite permutation systems


def _compose_power(perm: np.ndarray, e: int) -> np.ndarray:
    if e < 0:
        perm = np.argsort(perm)
        e = -e
    out = np.arange(len(perm))
    base = perm.copy()
    while e:
        if e & 1:
            out = base[out]
        base = base[base]
        e >>= 1
    return out


@dataclass(frozen=True)
class PermutationSystem(ActionSystem):
    """``T^(m,n) x = perm1^m perm2^n x`` on ``{0, ..., size-1}``, discrete metric."""

    size: int = 5
    perm1: tuple[int, ...] | None = None
    perm2: tuple[int, ...] | None = None
    kind: str = field(default="permutation", init=False)
    q: int = field(default=2, init=False)
    diameter: float = field(default=1.0, init=False)

    def __post_init__(self):
        n = self.size
        p1 = tuple((i + 1) % n for i in range(n)) if self.perm1 is None else tuple(self.perm1)
        p2 = tuple((i + 2) % n for i in range(n)) if self.perm2 is None else tuple(self.perm2)
        for p in (p1, p2):
            if sorted(p) != list(range(n)):
                raise ValueError(f"{p} is not a permutation of range({n})")
        a, b = np.array(p1), np.array(p2)
        if not np.array_equal(a[b], b[a]):
            raise ValueError("perm1 and perm2 must commute")
        object.__setattr__(self, "perm1", p1)
        object.__setattr__(self, "perm2", p2)

    @classmethod
    def identity(cls, size: int) -> "PermutationSystem":
        ident = tuple(range(size))
        return cls(size, ident, ident)

    def _map(self, w) -> np.ndarray:
        m, n = int(w[0]), int(w[1])
        return _compose_power(np.array(self.perm1), m)[_compose_power(np.array(self.perm2), n)]

    def act(self, w, pts):
        return self._map(w)[np.asarray(pts, dtype=np.int64)]

    def pairwise(self, va, vb):
        return (va[:, None] != vb[None, :]).astype(float)

    def paired(self, va, vb):
        return (va != vb).astype(float)

    def sample(self, n, rng):
        return rng.integers(0, self.size, size=n)

    def perturb(self, pts, rng):
        # under the discrete metric the only close partner is the point itself
        return np.array(pts, copy=True)

    def stack(self, points):
        return np.asarray(points, dtype=np.int64).reshape(-1)

    def to_json(self):
        return {"kind": "permutation", "size": self.size,
                "perm1": list(self.perm1), "perm2": list(self.perm2)}


# ----------------------------------------------------------------------
# symbolic systems


def _ring_order(dim: int, r: int) -> tuple[np.ndarray, list[int]]:
    """Flat indices of a radius-r box ordered by Chebyshev ring, plus ring sizes."""
    side = 2 * r + 1
    grids = np.meshgrid(*([np.arange(side) - r] * dim), indexing="ij")
    ring = np.max(np.abs(np.stack(grids)), axis=0).reshape(-1)
    order = np.argsort(ring, kind="stable")
    sizes = [int(np.sum(ring == j)) for j in range(r + 1)]
    return order, sizes


@dataclass(frozen=True)
class _Shift(ActionSystem):
    """Configurations on Z^dim stored on a centred box of the given radius.

    The base metric is ``2**-r`` with ``r`` the smallest Chebyshev radius at
    which two configurations disagree, looking no further than
    ``resolution``; agreement on the whole resolution box gives 0.
    """

    alphabet: int = 2
    radius: int = 16
    resolution: int = 5
    dim: int = field(default=2, init=False)
    diameter: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not 2 <= self.alphabet <= 256:
            raise ValueError("alphabet size must be in [2, 256]")
        if self.resolution < 0 or self.radius < self.resolution:
            raise ValueError("need 0 <= resolution <= radius")

    # offsets of a translate in the configuration lattice
    @abstractmethod
    def _offset(self, w) -> tuple[int, ...]:
        ...

    def _radius_of(self, pts: np.ndarray) -> int:
        return (pts.shape[1] - 1) // 2

    def _crop(self, pts: np.ndarray, offset: tuple[int, ...], new_r: int) -> np.ndarray:
        r = self._radius_of(pts)
        if new_r < self.resolution:
            raise ResolutionError(
                f"resolution exceeded: translate {offset} leaves radius {new_r} "
                f"< metric resolution {self.resolution} (stored radius {r})"
            )
        sl = tuple(slice(r + o - new_r, r + o + new_r + 1) for o in offset)
        return pts[(slice(None),) + sl]

    def act(self, w, pts):
        pts = np.asarray(pts)
        off = self._offset(w)
        return self._crop(pts, off, self._radius_of(pts) - max(abs(o) for o in off))

    def act_each(self, ws, pts):
        pts = np.asarray(pts)
        ws = np.asarray(ws, dtype=np.int64).reshape(len(ws), self.q)
        offs = [self._offset(w) for w in ws]
        new_r = self._radius_of(pts) - max(max(abs(o) for o in off) for off in offs)
        keys: dict[tuple, list[int]] = {}
        for i, off in enumerate(offs):
            keys.setdefault(off, []).append(i)
        out = np.empty((len(ws),) + (2 * max(new_r, 0) + 1,) * self.dim, dtype=pts.dtype)
        for off, idx in keys.items():
            out[idx] = self._crop(pts[idx], off, new_r)
        return out

    def action_key(self, w):
        return self._offset(w)

    def reach(self, points):
        if len(points) == 0:
            return 0
        return int(max(max(abs(o) for o in self._offset(w)) for w in points))

    def fitted(self, reach):
        need = reach + self.resolution + 1
        return self if self.radius >= need else replace(self, radius=need)

    # -- metric on centred resolution boxes -------------------------------
    def _layout(self):
        return _ring_order(self.dim, self.resolution)

    def view(self, pts):
        pts = np.asarray(pts)
        r = self._radius_of(pts)
        if r < self.resolution:
            raise ResolutionError(f"resolution exceeded: radius {r} < {self.resolution}")
        c = self.resolution
        box = pts[(slice(None),) + (slice(r - c, r + c + 1),) * self.dim]
        order, _ = self._layout()
        return box.reshape(len(pts), -1)[:, order]

    def _table(self) -> np.ndarray:
        return np.array([2.0 ** -j for j in range(self.resolution + 1)] + [0.0])

    def paired(self, va, vb):
        order, sizes = self._layout()
        ring = np.repeat(np.arange(len(sizes)), sizes)
        diff = va != vb
        first = np.where(diff, ring[None, :], len(sizes)).min(axis=1)
        return self._table()[first]

    def pairwise(self, va, vb):
        _, sizes = self._layout()
        both = np.concatenate([va, vb]).astype(np.int64)
        na = len(va)
        matched = np.zeros((na, len(vb)), dtype=np.int16)
        ids = np.zeros(len(both), dtype=np.int64)
        start = 0
        for size in sizes:
            block = np.column_stack([ids, both[:, start:start + size]])
            _, ids = np.unique(block, axis=0, return_inverse=True)
            ids = ids.reshape(-1)
            matched += ids[:na, None] == ids[None, na:]
            start += size
        return self._table()[matched]

    def sample(self, n, rng):
        shape = (n,) + (2 * self.radius + 1,) * self.dim
        return rng.integers(0, self.alphabet, size=shape, dtype=np.uint8)

    def perturb(self, pts, rng):
        pts = np.asarray(pts)
        n = len(pts)
        r_store = self._radius_of(pts)
        side = 2 * r_store + 1
        grids = np.meshgrid(*([np.arange(side) - r_store] * self.dim), indexing="ij")
        ring = np.max(np.abs(np.stack(grids)), axis=0)
        out = pts.copy()
        keep = rng.integers(0, max(self.resolution, 1), size=n)
        fresh = rng.integers(0, self.alphabet, size=pts.shape, dtype=pts.dtype)
        for i in range(n):
            r = int(keep[i])
            outside = ring > r
            out[i][outside] = fresh[i][outside]
            # force a disagreement on ring r+1 so d(x, y) = 2**-(r+1) exactly
            sites = np.argwhere(ring == r + 1)
            site = tuple(sites[rng.integers(len(sites))])
            bump = 1 + int(rng.integers(self.alphabet - 1))
            out[i][site] = (pts[i][site] + bump) % self.alphabet
        return out

    def same(self, a, b, tol: float = 0.0):
        a, b = np.asarray(a), np.asarray(b)
        r = min(self._radius_of(a), self._radius_of(b))
        ca = self._crop(a, (0,) * self.dim, r) if self._radius_of(a) != r else a
        cb = self._crop(b, (0,) * self.dim, r) if self._radius_of(b) != r else b
        return bool(np.array_equal(ca, cb))


@dataclass(frozen=True)
class FullShift(_Shift):
    kind: str = field(default="fullshift", init=False)
    q: int = field(default=2, init=False)
    dim: int = field(default=2, init=False)

    def _offset(self, w):
        return (int(w[0]), int(w[1]))

    def to_json(self):
        return {"kind": "fullshift", "alphabet": self.alphabet,
                "radius": self.radius, "resolution": self.resolution}


@dataclass(frozen=True)
class SkewShift(_Shift):
    """One-sided-in-time view of a Z-shift: ``(m, n)`` acts as ``sigma^(m-n)``."""

    radius: int = 48
    kind: str = field(default="skewshift", init=False)
    q: int = field(default=2, init=False)
    dim: int = field(default=1, init=False)

    def _offset(self, w):
        return (int(w[0]) - int(w[1]),)

    def to_json(self):
        return {"kind": "skewshift", "alphabet": self.alphabet,
                "radius": self.radius, "resolution": self.resolution}


_KINDS = {
    "rotation": RotationSystem,
    "fullshift": FullShift,
    "skewshift": SkewShift,
    "permutation": PermutationSystem,
}


def make_system(desc: dict) -> ActionSystem:
    """Build a system from its config descriptor, e.g. ``{"kind": "rotation"}``."""
    desc = dict(desc)
    kind = desc.pop("kind", None)
    if kind not in _KINDS:
        raise ValueError(f"unknown system kind {kind!r}; expected one of {sorted(_KINDS)}")
    if kind == "permutation":
        for key in ("perm1", "perm2"):
            if desc.get(key) is not None:
                desc[key] = tuple(int(v) for v in desc[key])
    try:
        return _KINDS[kind](**desc)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from exc
