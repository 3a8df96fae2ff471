"""Covering numbers of finite samples under a depth-k metric.

Balls are open, ``B(x, eps) = {y : rho(x, y) < eps}``, and centres are
restricted to sample points.  Three numbers come out of each instance:

* ``exact``   minimal cover (branch-and-bound, may give up on a node budget)
* ``greedy``  max-coverage greedy cover, lowest index wins ties
* ``lower``   a packing/capacity bound valid for covers with *any* centres

For the measure version only ``need`` of the ``n`` points must be covered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .metrics import MetricSeq, matrix_profiles
from .systems import ActionSystem, sample_measure

BOUNDED = "BOUNDED"
GROWING = "GROWING"
INCONCLUSIVE = "INCONCLUSIVE"

# verdict thresholds, see judge()
GROWTH_FACTOR = 1.5
PLATEAU_SLACK = 1.25
SATURATION = 0.9
PLATEAU_DEPTHS = 3

DEFAULT_EXACT_CAP = 100_000


def _check_matrix(dm: np.ndarray) -> np.ndarray:
    dm = np.asarray(dm, dtype=float)
    if dm.ndim != 2 or dm.shape[0] != dm.shape[1] or dm.shape[0] == 0:
        raise ValueError(f"need a nonempty square distance matrix, got shape {dm.shape}")
    return dm


def _need(n: int, need: int | None) -> int:
    if need is None:
        return n
    return max(0, min(int(need), n))


def measure_need(n: int, eps: float) -> int:
    """Points a partial cover must reach: ``ceil((1 - eps) * n)``, at least one."""
    return max(1, min(n, math.ceil((1.0 - eps) * n - 1e-12)))


def cover_greedy(dm: np.ndarray, eps: float, need: int | None = None) -> tuple[int, list[int]]:
    dm = _check_matrix(dm)
    n = len(dm)
    target = _need(n, need)
    inside = dm < eps
    covered = np.zeros(n, dtype=bool)
    gains = inside.sum(axis=1).astype(np.int64)
    centers: list[int] = []
    ncov = 0
    while ncov < target:
        c = int(np.argmax(gains))
        newly = inside[c] & ~covered
        covered |= newly
        ncov += int(newly.sum())
        # inside is symmetric, so rows of the new points give column sums
        gains -= inside[newly].sum(axis=0)
        centers.append(c)
    return len(centers), centers


def separated_lower(dm: np.ndarray, eps: float) -> int:
    """Size of a greedily built set whose pairwise distances are all ``>= eps``."""
    return len(separated_set(dm, eps))


def separated_set(dm: np.ndarray, eps: float) -> list[int]:
    dm = _check_matrix(dm)
    blocked = np.zeros(len(dm), dtype=bool)
    chosen = []
    for i in range(len(dm)):
        if blocked[i]:
            continue
        chosen.append(i)
        blocked |= dm[i] < eps
    return chosen


def cover_lower(dm: np.ndarray, eps: float, need: int | None = None) -> int:
    """Lower bound on any ``eps``-cover of ``need`` sample points.

    Two arguments, both through ``2 * eps``: an open ``eps``-ball holds at
    most one point of a ``2*eps``-separated set, and everything it holds lies
    in the ``2*eps``-ball of any one of its points.
    """
    dm = _check_matrix(dm)
    n = len(dm)
    target = _need(n, need)
    if target == 0:
        return 0
    packing = separated_lower(dm, 2 * eps) - (n - target)
    sizes = np.sort((dm < 2 * eps).sum(axis=1))[::-1]
    capacity = int(np.searchsorted(np.cumsum(sizes), target)) + 1
    return max(1, packing, capacity)


def _masks(inside: np.ndarray) -> list[int]:
    packed = np.packbits(inside, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def cover_exact(
    dm: np.ndarray, eps: float, cap: int = DEFAULT_EXACT_CAP, need: int | None = None
) -> tuple[int | None, list[int]]:
    """Minimum number of sample-centred open balls covering ``need`` points.

    Branch-and-bound on the uncovered point with the fewest covering balls;
    for partial covers a point may instead be given up while the skip budget
    ``n - need`` lasts.  Returns ``(None, [])`` once more than ``cap`` nodes
    have been expanded.
    """
    dm = _check_matrix(dm)
    n = len(dm)
    target = _need(n, need)
    if target == 0:
        return 0, []
    inside = dm < eps
    sizes = inside.sum(axis=1)
    best, best_centers = cover_greedy(dm, eps, target)
    order = np.sort(sizes)[::-1]
    trivial = int(np.searchsorted(np.cumsum(order), target)) + 1
    if trivial >= best:
        return best, best_centers

    sets = _masks(inside)
    holders = [np.flatnonzero(inside[:, e]).tolist() for e in range(n)]
    by_degree = sorted(range(n), key=lambda e: (len(holders[e]), e))
    nodes = 0
    # explicit depth-first stack: covers can need more centres than the
    # interpreter allows nested calls
    stack = [(0, 0, n - target, ())]
    while stack:
        covered, skipped, skips_left, chosen = stack.pop()
        nodes += 1
        if nodes > cap:
            return None, []
        ncov = covered.bit_count()
        if ncov >= target:
            if len(chosen) < best:
                best, best_centers = len(chosen), list(chosen)
            continue
        remaining = target - ncov
        gains = sorted(((s & ~covered).bit_count() for s in sets), reverse=True)
        acc, extra = 0, 0
        for g in gains:
            if g == 0:
                break
            acc += g
            extra += 1
            if acc >= remaining:
                break
        if acc < remaining or len(chosen) + extra >= best:
            continue
        done = covered | skipped
        e = next(x for x in by_degree if not (done >> x) & 1)
        options = sorted(holders[e], key=lambda i: (-(sets[i] & ~covered).bit_count(), i))
        children = [(covered | sets[i], skipped, skips_left, chosen + (i,)) for i in options]
        if skips_left > 0:
            children.append((covered, skipped | (1 << e), skips_left - 1, chosen))
        stack.extend(reversed(children))
    return best, sorted(best_centers)


@dataclass
class CoverResult:
    epsilon: float
    k: int
    exact: int | None
    greedy_upper: int
    separated_lower: int
    centers: list[int]
    n: int = 0
    need: int = 0

    def row(self) -> dict:
        return {
            "k": self.k,
            "eps": self.epsilon,
            "exact": "" if self.exact is None else self.exact,
            "greedy": self.greedy_upper,
            "lower": self.separated_lower,
        }


def cover_result(
    dm: np.ndarray, eps: float, k: int, need: int | None = None, exact_cap: int = DEFAULT_EXACT_CAP
) -> CoverResult:
    n = len(dm)
    target = _need(n, need)
    greedy, centers = cover_greedy(dm, eps, target)
    lower = cover_lower(dm, eps, target)
    exact = None
    if lower == greedy:
        exact = greedy
    elif exact_cap > 0:
        exact, exact_centers = cover_exact(dm, eps, exact_cap, target)
        if exact is not None:
            centers = exact_centers
    return CoverResult(eps, k, exact, greedy, lower, centers, n, target)


def span_topological(
    sys: ActionSystem, ms: MetricSeq, sample: Any, k: int, eps: float,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> CoverResult:
    if ms.system is not sys:
        raise ValueError("metric sequence belongs to a different system")
    return cover_result(ms.eval_matrix(sample, k), eps, k, None, exact_cap)


def span_measure(
    sys: ActionSystem, ms: MetricSeq, k: int, eps: float, n_samples: int, seed,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> CoverResult:
    if ms.system is not sys:
        raise ValueError("metric sequence belongs to a different system")
    if n_samples < math.ceil(10 / eps):
        raise ValueError(f"need at least ceil(10/eps) = {math.ceil(10 / eps)} samples")
    pts = sample_measure(sys, n_samples, seed)
    return cover_result(ms.eval_matrix(pts, k), eps, k, measure_need(n_samples, eps), exact_cap)


# ----------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class Verdict:
    kind: str
    bound: int | None = None
    trend: tuple[int, ...] = ()

    def __str__(self) -> str:
        if self.kind == BOUNDED:
            return f"BOUNDED({self.bound})"
        if self.kind == GROWING:
            return "GROWING(" + ">".join(str(t) for t in self.trend) + ")"
        return INCONCLUSIVE


def judge(
    greedy: Sequence[int], lower: Sequence[int], ceiling: int | None = None,
    slack: float = PLATEAU_SLACK,
) -> Verdict:
    """Finite-scale boundedness verdict from covers along an increasing k grid.

    GROWING: the lower bounds rise strictly over the last three depths, by at
    least ``GROWTH_FACTOR`` overall.  Depths after the first one whose bound
    reaches ``SATURATION * ceiling`` are censored: past that point the finite
    sample, not the system, limits what can be seen.

    BOUNDED(C): over the last ``PLATEAU_DEPTHS`` depths the greedy cover
    never exceeds ``slack`` times its value at the first of them, and
    it stays under half the ceiling throughout; ``C`` is the largest greedy
    value seen.
    """
    greedy = [int(g) for g in greedy]
    lower = [int(v) for v in lower]
    if len(greedy) != len(lower) or not greedy:
        raise ValueError("need matching, nonempty greedy/lower sequences")
    cut = len(lower)
    if ceiling is not None:
        for i, v in enumerate(lower):
            if v >= SATURATION * ceiling:
                cut = i + 1
                break
    seen = lower[:cut]
    growing = False
    trend: tuple[int, ...] = ()
    if len(seen) >= 3:
        a, b, c = seen[-3:]
        growing = a < b < c and c >= GROWTH_FACTOR * a
        trend = (a, b, c)
    tail = greedy[-PLATEAU_DEPTHS:]
    bounded = max(tail) <= slack * tail[0]
    if ceiling is not None and max(greedy) > ceiling / 2:
        bounded = False
    if growing and not bounded:
        return Verdict(GROWING, trend=trend)
    if bounded and not growing:
        return Verdict(BOUNDED, bound=max(greedy))
    return Verdict(INCONCLUSIVE)


def combine(verdicts: Iterable[Verdict | str]) -> str:
    """One verdict across an eps grid: any growth refutes boundedness."""
    kinds = [v.kind if isinstance(v, Verdict) else v for v in verdicts]
    if any(v == GROWING for v in kinds):
        return GROWING
    if kinds and all(v == BOUNDED for v in kinds):
        return BOUNDED
    return INCONCLUSIVE


@dataclass
class ComplexityProfile:
    family: str
    direction: Any
    eps_grid: tuple[float, ...]
    k_grid: tuple[int, ...]
    mode: str
    results: dict[tuple[int, float], CoverResult]
    verdicts: dict[float, Verdict]
    companions: dict[tuple[int, float], CoverResult] = field(default_factory=dict)
    companion_verdicts: dict[float, Verdict] = field(default_factory=dict)
    n: int = 0

    @property
    def verdict(self) -> str:
        return combine(self.verdicts.values())

    def series(self, eps: float, attr: str) -> list[int]:
        return [getattr(self.results[(k, eps)], attr) for k in self.k_grid]


def _check_grids(ks: Sequence[int], eps_grid: Sequence[float]) -> tuple[tuple[int, ...], tuple[float, ...]]:
    ks = tuple(int(k) for k in ks)
    eps_grid = tuple(float(e) for e in eps_grid)
    if not ks or not eps_grid:
        raise ValueError("k and eps grids must be nonempty")
    if list(ks) != sorted(set(ks)) or ks[0] < 1:
        raise ValueError(f"k grid must be strictly increasing positive integers, got {ks}")
    if any(e <= 0 for e in eps_grid):
        raise ValueError("eps values must be positive")
    return ks, eps_grid


def classify(
    ms: MetricSeq,
    sample: Any,
    ks: Sequence[int],
    eps_grid: Sequence[float],
    mode: str = "topological",
    exact_cap: int = 500,
    half_scale: bool = True,
) -> ComplexityProfile:
    """Cover a fixed sample at every (k, eps) and give a verdict per eps.

    ``mode="measure"`` covers only ``measure_need(n, eps)`` points.  With
    ``half_scale`` every eps is also run at ``eps/2``, the radius at which
    sample-centred balls are guaranteed to sit inside arbitrary-centre ones;
    those rows are reported but do not drive the verdict.
    """
    ks, eps_grid = _check_grids(ks, eps_grid)
    if mode not in ("topological", "measure"):
        raise ValueError(f"mode must be 'topological' or 'measure', got {mode!r}")
    n = len(sample)

    def need_for(eps):
        return measure_need(n, eps) if mode == "measure" else n

    results: dict[tuple[int, float], CoverResult] = {}
    companions: dict[tuple[int, float], CoverResult] = {}
    for k, mats in matrix_profiles(ms.system, ms.direction, sample, ks, [ms.family]):
        dm = mats[ms.family]
        for eps in eps_grid:
            results[(k, eps)] = cover_result(dm, eps, k, need_for(eps), exact_cap)
            if half_scale:
                companions[(k, eps / 2)] = cover_result(dm, eps / 2, k, need_for(eps / 2), exact_cap)

    def verdicts_of(table, grid):
        out = {}
        for eps in grid:
            cells = [table[(k, eps)] for k in ks]
            out[eps] = judge([c.greedy_upper for c in cells], [c.separated_lower for c in cells],
                             ceiling=need_for(eps))
        return out

    return ComplexityProfile(
        family=ms.family,
        direction=ms.direction,
        eps_grid=eps_grid,
        k_grid=ks,
        mode=mode,
        results=results,
        verdicts=verdicts_of(results, eps_grid),
        companions=companions,
        companion_verdicts=verdicts_of(companions, [e / 2 for e in eps_grid]) if half_scale else {},
        n=n,
    )
