"""Empirical compactness of strip orbits of test functions in L^2.

For a test function ``f`` and a fixed sample ``z_1..z_n`` from the invariant
measure, each translate ``f o T^w`` becomes the vector
``(f(T^w z_1), ..., f(T^w z_n))``.  Empirical L^2 distances between those
vectors form a distance matrix that the covering solvers understand, so the
question "is the orbit precompact?" turns into "does its covering number stay
bounded as the strip window grows?".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .covering import (
    BOUNDED,
    DEFAULT_EXACT_CAP,
    GROWING,
    CoverResult,
    Verdict,
    combine,
    cover_result,
    judge,
    separated_lower,
)
from .lattice import Direction, strip_window
from .systems import ActionSystem, fit_system, sample_measure

DISCRETE = "DISCRETE-LIKE"
NON_DISCRETE = "NON-DISCRETE"
INCONCLUSIVE = "INCONCLUSIVE"

SPECTRAL_EPS = (0.5, 0.35, 0.25)
SPECTRAL_K = (1, 2, 4, 8, 16, 32, 64, 128, 256)
MIN_SAMPLE = 100
ZERO_CLAMP = 1e-12
# Gram-based distances below this are recomputed directly
RECHECK = 1e-4
# orbit nets are monotone but grow in discrete jumps, so they get more room
NET_SLACK = 1.5


@dataclass(frozen=True)
class TestFunction:
    """A bounded observable, evaluated on a batch of points."""

    name: str
    fn: Callable[[Any], np.ndarray] = field(repr=False)

    def __call__(self, pts: Any) -> np.ndarray:
        return np.asarray(self.fn(pts), dtype=complex)


@dataclass
class EmpiricalFunction:
    """``f`` restricted to one fixed sample of the invariant measure."""

    system: ActionSystem
    test: TestFunction
    sample: Any
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.values = self.test(self.sample)
        if np.max(np.abs(self.values), initial=0.0) > 1.0 + 1e-12:
            raise ValueError(f"test function {self.test.name!r} is not bounded by 1")

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.values) ** 2)))

    def translate(self, w: Sequence[int]) -> np.ndarray:
        """Values of ``f o T^w`` on the same sample."""
        return self.test(self.system.act(tuple(int(v) for v in w), self.sample))


def l2_distances(rows: np.ndarray) -> np.ndarray:
    """Empirical L^2 distances between the rows of an ``(m, n)`` array.

    Uses the Gram matrix, then recomputes small entries as direct row
    differences, where the Gram form loses precision to cancellation.
    """
    rows = np.asarray(rows)
    if not np.iscomplexobj(rows) or not np.any(rows.imag):
        rows = np.real(rows).astype(float)
    n = rows.shape[1]
    gram = rows @ rows.conj().T / n
    sq = np.real(np.diag(gram))
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * np.real(gram), 0.0)
    out = np.sqrt(d2)
    ii, jj = np.nonzero(np.triu(out < RECHECK, 1))
    if len(ii):
        diff = rows[ii] - rows[jj]
        exact = np.sqrt(np.mean(np.abs(diff) ** 2, axis=1))
        out[ii, jj] = exact
        out[jj, ii] = exact
    np.fill_diagonal(out, 0.0)
    out[out < ZERO_CLAMP] = 0.0
    return out


def orbit_matrix(f: EmpiricalFunction, d: Direction, k: int) -> np.ndarray:
    """Distance matrix of ``{f o T^w : w in the depth-k window}``.

    Rows follow the window order, so the matrix for a smaller depth is a
    leading block of this one.  Translates that act identically share one
    evaluation.
    """
    window = strip_window(d, k)
    if len(window) == 0:
        raise ValueError("empty strip window")
    cache: dict[Any, np.ndarray] = {}
    rows = []
    for w in window.as_tuples():
        key = f.system.action_key(w)
        if key not in cache:
            cache[key] = f.translate(w)
        rows.append(cache[key])
    return l2_distances(np.stack(rows))


def orbit_cover_number(
    sys: ActionSystem, f: EmpiricalFunction, d: Direction, k: int, eps: float,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> CoverResult:
    if f.system is not sys:
        raise ValueError("empirical function was built on a different system")
    if f.n < MIN_SAMPLE:
        raise ValueError(f"need at least {MIN_SAMPLE} sample points, got {f.n}")
    return cover_result(orbit_matrix(f, d, k), eps, k, None, exact_cap)


# ----------------------------------------------------------------------
# fixed batteries of test functions


def _cylinder(r: int, dim: int) -> TestFunction:
    def fn(pts):
        pts = np.asarray(pts)
        c = (pts.shape[1] - 1) // 2
        idx = (slice(None), slice(c - r, c + r + 1)) + (c,) * (dim - 1)
        return np.all(pts[idx] == 0, axis=1).astype(float)

    return TestFunction(f"cyl{r}", fn)


def _character(j: int) -> TestFunction:
    return TestFunction(f"chi{j}", lambda pts: np.exp(2j * np.pi * j * np.asarray(pts, dtype=float)))


def _indicator(s: int) -> TestFunction:
    return TestFunction(f"ind{s}", lambda pts: (np.asarray(pts) == s).astype(float))


def default_battery(sys: ActionSystem) -> list[TestFunction]:
    """Three test functions per system kind.

    Shifts: indicators of the all-zero word on ``[-r, r]`` along the first
    axis, ``r = 0, 1, 2``.  Circle: the characters ``exp(2 pi i j x)``,
    ``j = 1, 2, 3``.  Permutations: indicators of the states 0, 1, 2.
    """
    if sys.kind in ("fullshift", "skewshift"):
        return [_cylinder(r, sys.dim) for r in range(3)]
    if sys.kind == "rotation":
        return [_character(j) for j in (1, 2, 3)]
    if sys.kind == "permutation":
        return [_indicator(s) for s in range(min(3, sys.size))]
    raise ValueError(f"no test battery for system kind {sys.kind!r}")


TestFunction.__test__ = False  # not a pytest class


# ----------------------------------------------------------------------
# verdicts


@dataclass
class SpectrumReport:
    direction: Direction
    eps_grid: tuple[float, ...]
    k_grid: tuple[int, ...]
    results: dict[str, dict[tuple[int, float], CoverResult]]
    verdicts: dict[str, dict[float, Verdict]]
    n: int

    def function_verdict(self, name: str) -> str:
        return combine(self.verdicts[name].values())

    @property
    def verdict(self) -> str:
        kinds = [self.function_verdict(name) for name in self.verdicts]
        if any(v == GROWING for v in kinds):
            return NON_DISCRETE
        if kinds and all(v == BOUNDED for v in kinds):
            return DISCRETE
        return INCONCLUSIVE

    def rows(self) -> list[dict]:
        out = []
        for name, table in self.results.items():
            for eps in self.eps_grid:
                verdict = str(self.verdicts[name][eps])
                for k in self.k_grid:
                    res = table[(k, eps)]
                    out.append({
                        "function_id": name,
                        "k": k,
                        "eps": eps,
                        "greedy": res.greedy_upper,
                        "lower": res.separated_lower,
                        "verdict": verdict,
                    })
        return out


def _orbit_verdict(table, nets, ks, eps) -> Verdict:
    """Boundedness of one orbit at one eps.

    The plateau test runs on the index-order eps-net rather than on the
    greedy cover: windows are prefixes of each other, so the net only ever
    gains points, it is itself an open eps-cover, and it can never exceed the
    eps-packing number of the orbit closure.  Greedy covers of the same sets
    jump around as points arrive and would hide a plateau.
    """
    v = judge([nets[(k, eps)] for k in ks], [table[(k, eps)].separated_lower for k in ks],
              slack=NET_SLACK)
    if v.kind == BOUNDED:
        bound = max(max(nets[(k, eps)], table[(k, eps)].greedy_upper) for k in ks)
        return Verdict(BOUNDED, bound=bound)
    return v


def spectrum_verdict(
    sys: ActionSystem,
    d: Direction,
    tests: Sequence[TestFunction] | None,
    eps_grid: Sequence[float],
    k_grid: Sequence[int],
    seed,
    n: int = 400,
    exact_cap: int = 0,
) -> SpectrumReport:
    """Orbit covering numbers of every test function over the whole grid."""
    tests = list(default_battery(sys) if tests is None else tests)
    if len(tests) < 3:
        raise ValueError("need at least three test functions")
    ks = tuple(sorted(int(k) for k in k_grid))
    eps_grid = tuple(float(e) for e in eps_grid)
    sys = fit_system(sys, [strip_window(d, ks[-1])])
    pts = sample_measure(sys, n, seed)
    results: dict[str, dict] = {}
    verdicts: dict[str, dict] = {}
    for t in tests:
        f = EmpiricalFunction(sys, t, pts)
        table, nets = {}, {}
        full = orbit_matrix(f, d, ks[-1])
        sizes = np.cumsum(strip_window(d, ks[-1]).column_sizes)
        for k in ks:
            m = int(sizes[k - 1])
            if m == 0:
                raise ValueError(f"empty strip window at depth {k}")
            dm = full[:m, :m]
            for eps in eps_grid:
                table[(k, eps)] = cover_result(dm, eps, k, None, exact_cap)
                nets[(k, eps)] = separated_lower(dm, eps)
        results[t.name] = table
        verdicts[t.name] = {eps: _orbit_verdict(table, nets, ks, eps) for eps in eps_grid}
    return SpectrumReport(d, eps_grid, ks, results, verdicts, n)
