"""Suspension of a Z^2-action along a direction ``(1, beta)``.

The phase space is ``X x [0,1)^2`` and the Z-action is::

    W^n(x, u, v) = (T^(n, floor(n*beta + v)) x, u, frac(n*beta + v))

so iterating ``W`` walks through the base action along the line of slope
``beta``, with ``v`` remembering where the line sits between lattice rows.

Points carry their third coordinate as a lift ``(v0, t)`` with
``v = frac(t*beta + v0)``; the integer part that ``W^n`` feeds to the base is
``floor((t+n)*beta + v0) - floor(t*beta + v0)``.  The jumps then telescope,
which makes ``W^(n+m) = W^n W^m`` an identity of integers rather than of
rounded floats.  For rational ``beta`` every floor is computed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .covering import INCONCLUSIVE, ComplexityProfile, classify
from .lattice import Direction, Slope, parse_slope, slope_to_json, strip_window, time_window
from .metrics import MetricSeq, paired_profiles
from .systems import ActionSystem, circle_distance, fit_system, sample_measure

CROSS_B = (0.5, 1.0, 2.0)
# finer eps needs more fibre cells than a desk-size sample can resolve
CROSS_EPS = (0.5, 0.25)


def _floors(beta: Slope, t: np.ndarray, v0: np.ndarray) -> np.ndarray:
    """``floor(t*beta + v0)`` elementwise; exact when ``beta`` is a Fraction."""
    t = np.asarray(t, dtype=np.int64)
    v0 = np.asarray(v0, dtype=float)
    if isinstance(beta, Fraction):
        p, r = beta.numerator, beta.denominator
        out = np.empty(len(t), dtype=np.int64)
        for i, (ti, vi) in enumerate(zip(t.tolist(), v0.tolist())):
            out[i] = math.floor(Fraction(ti * p, r) + Fraction(vi))
        return out
    return np.floor(t * float(beta) + v0).astype(np.int64)


def _fracs(beta: Slope, t: np.ndarray, v0: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.int64)
    v0 = np.asarray(v0, dtype=float)
    if isinstance(beta, Fraction):
        p, r = beta.numerator, beta.denominator
        out = np.empty(len(t), dtype=float)
        for i, (ti, vi) in enumerate(zip(t.tolist(), v0.tolist())):
            a = Fraction(ti * p, r) + Fraction(vi)
            out[i] = float(a - math.floor(a))
        return out
    a = t * float(beta) + v0
    f = a - np.floor(a)
    return np.where(f >= 1.0, 0.0, f)


@dataclass(frozen=True)
class SuspendedPoint:
    x: Any
    u: float
    v0: float
    t: int = 0


@dataclass(frozen=True)
class SuspendedBatch:
    """Batch of suspension points; ``x`` is a batch of the base system."""

    x: Any
    u: np.ndarray
    v0: np.ndarray
    t: np.ndarray

    def __len__(self) -> int:
        return len(self.u)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return SuspendedPoint(self.x[idx], float(self.u[idx]), float(self.v0[idx]), int(self.t[idx]))
        return SuspendedBatch(self.x[idx], self.u[idx], self.v0[idx], self.t[idx])


@dataclass(frozen=True)
class SuspensionSystem(ActionSystem):
    base: ActionSystem = None  # type: ignore[assignment]
    beta: Slope = Fraction(0)
    kind: str = field(default="suspension", init=False)
    q: int = field(default=1, init=False)

    def __post_init__(self):
        if self.base is None or self.base.q != 2:
            raise ValueError("the suspension needs a Z^2 base system")
        object.__setattr__(self, "beta", parse_slope(self.beta))

    @property
    def diameter(self) -> float:  # type: ignore[override]
        return max(self.base.diameter, 0.5)

    # -- coordinates ------------------------------------------------------
    def v(self, pts: SuspendedBatch) -> np.ndarray:
        return _fracs(self.beta, pts.t, pts.v0)

    def jumps(self, n: int, pts: SuspendedBatch) -> np.ndarray:
        """Second base coordinate of the translate ``W^n`` applies to each point."""
        t = np.asarray(pts.t, dtype=np.int64)
        return _floors(self.beta, t + n, pts.v0) - _floors(self.beta, t, pts.v0)

    def act(self, w, pts: SuspendedBatch) -> SuspendedBatch:
        n = int(w[0])
        if n == 0:
            return pts
        ws = np.column_stack([np.full(len(pts), n, dtype=np.int64), self.jumps(n, pts)])
        return SuspendedBatch(self.base.act_each(ws, pts.x), pts.u, pts.v0, pts.t + n)

    def act_each(self, ws, pts: SuspendedBatch) -> SuspendedBatch:
        ns = np.asarray(ws, dtype=np.int64).reshape(-1)
        t = np.asarray(pts.t, dtype=np.int64)
        jumps = _floors(self.beta, t + ns, pts.v0) - _floors(self.beta, t, pts.v0)
        x = self.base.act_each(np.column_stack([ns, jumps]), pts.x)
        return SuspendedBatch(x, pts.u, pts.v0, t + ns)

    # -- metric: max of the base distance and two circle distances ---------
    def view(self, pts: SuspendedBatch):
        return self.base.view(pts.x), np.asarray(pts.u, dtype=float), self.v(pts)

    def pairwise(self, va, vb):
        bx, bu, bv = vb
        ax, au, av = va
        d = self.base.pairwise(ax, bx)
        d = np.maximum(d, circle_distance(au[:, None], bu[None, :]))
        return np.maximum(d, circle_distance(av[:, None], bv[None, :]))

    def paired(self, va, vb):
        ax, au, av = va
        bx, bu, bv = vb
        d = self.base.paired(ax, bx)
        return np.maximum(np.maximum(d, circle_distance(au, bu)), circle_distance(av, bv))

    # -- points -------------------------------------------------------------
    def sample(self, n, rng):
        x = self.base.sample(n, rng)
        u = rng.random(n)
        v = rng.random(n)
        return SuspendedBatch(x, u, v, np.zeros(n, dtype=np.int64))

    def perturb(self, pts: SuspendedBatch, rng):
        # partners share the fibre coordinates (u, v)
        return SuspendedBatch(self.base.perturb(pts.x, rng), pts.u, pts.v0, pts.t)

    def stack(self, points: Sequence[Any]) -> SuspendedBatch:
        xs, us, vs, ts = [], [], [], []
        for p in points:
            if isinstance(p, SuspendedPoint):
                x, u, v0, t = p.x, p.u, p.v0, p.t
            else:
                x, u, v0 = p
                t = 0
            if not (0.0 <= u < 1.0 and 0.0 <= v0 < 1.0):
                raise ValueError(f"fibre coordinates must lie in [0, 1), got ({u}, {v0})")
            xs.append(x)
            us.append(u)
            vs.append(v0)
            ts.append(t)
        return SuspendedBatch(self.base.stack(xs), np.array(us, dtype=float),
                              np.array(vs, dtype=float), np.array(ts, dtype=np.int64))

    def same(self, a: SuspendedBatch, b: SuspendedBatch, tol: float = 1e-9) -> bool:
        if not self.base.same(a.x, b.x):
            return False
        return bool(np.all(circle_distance(a.u, b.u) <= tol)
                    and np.all(circle_distance(self.v(a), self.v(b)) <= tol))

    # -- bookkeeping --------------------------------------------------------
    def base_translates(self, reach: int) -> np.ndarray:
        """Every base translate ``W^n`` can use for ``|n| <= reach`` from ``t = 0``."""
        ns = np.arange(-reach, reach + 1, dtype=np.int64)
        lo = _floors(self.beta, ns, np.zeros(len(ns)))
        return np.concatenate([np.column_stack([ns, lo]), np.column_stack([ns, lo + 1])])

    def reach(self, points):
        points = np.asarray(points)
        return int(np.abs(points).max()) if len(points) else 0

    def fitted(self, reach):
        base = self.base.fitted(self.base.reach(self.base_translates(reach)))
        return self if base is self.base else SuspensionSystem(base, self.beta)

    def to_json(self):
        return {"kind": "suspension", "base": self.base.to_json(), "beta": slope_to_json(self.beta)}


def suspend(base: ActionSystem, beta: object) -> SuspensionSystem:
    return SuspensionSystem(base, parse_slope(beta))


def suspension_mean_metric(ss: SuspensionSystem, p1: Any, p2: Any, k: int) -> float:
    if k < 1:
        raise ValueError(f"depth k must be >= 1, got {k}")
    return MetricSeq("mean", ss).eval(p1, p2, k)


def fibre_mean(ss: SuspensionSystem, xs: Any, ys: Any, v: np.ndarray, k: int) -> np.ndarray:
    """``(1/k) sum_{i<k} d(T^(i, floor(i*beta + v)) x, T^(i, floor(i*beta + v)) y)``.

    Evaluated straight from the base action, without going through ``W``.
    """
    base = ss.base
    v = np.asarray(v, dtype=float)
    total = np.zeros(len(v))
    for i in range(k):
        rows = _floors(ss.beta, np.full(len(v), i), v)
        ws = np.column_stack([np.full(len(v), i, dtype=np.int64), rows])
        total += base.paired(base.view(base.act_each(ws, xs)), base.view(base.act_each(ws, ys)))
    return total / k


def domination_gaps(ss: SuspensionSystem, n: int, ks: Sequence[int], seed) -> np.ndarray:
    """Suspension mean metric minus the fibre average on shared-fibre pairs.

    Rows index depths, columns pairs.  Pairs are ``(x, u, v)`` and
    ``(y, u, v)`` with ``y`` a perturbation of ``x``, so every gap should be
    nonnegative (up to summation rounding).
    """
    ks = sorted(int(k) for k in ks)
    ss = fit_system(ss, [time_window(ks[-1])])
    rng = np.random.default_rng(seed)
    p1 = ss.sample(n, rng)
    p2 = ss.perturb(p1, rng)
    lhs = {k: vals["mean"] for k, vals in paired_profiles(ss, None, p1, p2, ks, ["mean"])}
    return np.stack([lhs[k] - fibre_mean(ss, p1.x, p2.x, p1.v0, k) for k in ks])


@dataclass
class CrossValidation:
    beta: Slope
    base_profiles: dict[float, ComplexityProfile]
    suspension_profile: ComplexityProfile
    base_diameter: float
    suspension_diameter: float

    @property
    def verdicts(self) -> dict[str, str]:
        out = {f"base b={b!r}": p.verdict for b, p in self.base_profiles.items()}
        out["suspension"] = self.suspension_profile.verdict
        return out

    @property
    def agreement(self) -> bool:
        kinds = set(self.verdicts.values())
        return len(kinds) == 1 and INCONCLUSIVE not in kinds

    @property
    def verdict(self) -> str:
        kinds = set(self.verdicts.values())
        return kinds.pop() if len(kinds) == 1 else INCONCLUSIVE

    def rows(self) -> list[dict]:
        out = []
        sides = [("base", b, p) for b, p in self.base_profiles.items()]
        sides.append(("susp", None, self.suspension_profile))
        for side, b, prof in sides:
            for eps in prof.eps_grid:
                verdict = str(prof.verdicts[eps])
                for k in prof.k_grid:
                    res = prof.results[(k, eps)]
                    out.append({
                        "side": side,
                        "b": "" if b is None else repr(b),
                        "k": k,
                        "eps": eps,
                        "greedy": res.greedy_upper,
                        "lower": res.separated_lower,
                        "verdict": verdict,
                    })
        return out

    def summary(self) -> dict:
        note = None
        if self.base_diameter != self.suspension_diameter:
            note = (f"diameters differ (base {self.base_diameter}, suspension "
                    f"{self.suspension_diameter}); eps grids are shared, constants are not comparable")
        return {
            "beta": slope_to_json(self.beta),
            "verdicts": self.verdicts,
            "agreement": self.agreement,
            "diameter_note": note,
        }


def cross_validate(
    base: ActionSystem,
    direction: Direction,
    eps_grid: Sequence[float],
    k_grid: Sequence[int],
    seed,
    n: int = 1000,
    bs: Sequence[float] = CROSS_B,
    exact_cap: int = 0,
) -> CrossValidation:
    """Measure complexity of the mean metrics on both sides of the suspension.

    The base runs once per half-width in ``bs`` on one shared sample; the
    suspension runs on its own sample of ``(x, u, v)``.
    """
    if direction.q != 2:
        raise ValueError("cross validation needs a planar direction")
    beta = direction.beta[0]
    kmax = max(k_grid)
    fitted = fit_system(base, [strip_window(direction.with_b(b), kmax) for b in bs])
    pts = sample_measure(fitted, n, [*_seed_list(seed), 0])
    base_profiles = {}
    for b in bs:
        ms = MetricSeq("mean", fitted, direction.with_b(b))
        base_profiles[float(b)] = classify(ms, pts, k_grid, eps_grid, "measure", exact_cap, half_scale=False)
    ss = fit_system(suspend(base, beta), [time_window(kmax)])
    spts = sample_measure(ss, n, [*_seed_list(seed), 1])
    sprof = classify(MetricSeq("mean", ss), spts, k_grid, eps_grid, "measure", exact_cap, half_scale=False)
    return CrossValidation(beta, base_profiles, sprof, base.diameter, ss.diameter)


def _seed_list(seed) -> list[int]:
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed]
    return [int(seed)]

