from __future__ import annotations

import math

import numpy as np
import pytest

from dircomplex.lattice import Direction, strip_window
from dircomplex.systems import (
    FullShift,
    PermutationSystem,
    ResolutionError,
    RotationSystem,
    SkewShift,
    fit_system,
    make_system,
    orbit_segment,
    sample_measure,
)

ZOO = [RotationSystem(), PermutationSystem(), SkewShift(radius=40), FullShift(radius=30)]


def random_ws(rng, n, lim):
    return [tuple(int(v) for v in rng.integers(-lim, lim + 1, size=2)) for _ in range(n)]


@pytest.mark.parametrize("sys_", ZOO, ids=lambda s: s.kind)
def test_group_law_and_identity(sys_):
    rng = np.random.default_rng(3)
    x = sys_.sample(50, rng)
    assert sys_.same(sys_.act((0, 0), x), x)
    lim = 5 if sys_.kind in ("fullshift", "skewshift") else 1000
    for w1, w2 in zip(random_ws(rng, 20, lim), random_ws(rng, 20, lim)):
        w = (w1[0] + w2[0], w1[1] + w2[1])
        assert sys_.same(sys_.act(w, x), sys_.act(w1, sys_.act(w2, x)))


@pytest.mark.parametrize("sys_", ZOO, ids=lambda s: s.kind)
def test_base_metric_axioms(sys_):
    rng = np.random.default_rng(4)
    a, b, c = (sys_.view(sys_.sample(300, rng)) for _ in range(3))
    dab, dbc, dac = sys_.paired(a, b), sys_.paired(b, c), sys_.paired(a, c)
    assert np.allclose(dab, sys_.paired(b, a))
    assert np.all(dac <= dab + dbc + 1e-12)
    assert np.all(sys_.paired(a, a) == 0)
    assert np.all(dab >= 0) and np.all(dab <= sys_.diameter)
    m = sys_.pairwise(a[:20], b[:30])
    assert np.allclose(m, np.array([[sys_.paired(a[i:i + 1], b[j:j + 1])[0] for j in range(30)]
                                    for i in range(20)]))


def test_rotation_orbit_segment():
    sys_ = RotationSystem(0.3, 0.1)
    win = strip_window(Direction.planar(0, 0.5), 2)
    seg = orbit_segment(sys_, 0.0, win)
    assert np.allclose(seg, [0.0, 0.3])


def test_identity_permutation_orbit_is_constant():
    sys_ = PermutationSystem.identity(4)
    win = strip_window(Direction.planar(math.sqrt(2), 1.5), 6)
    assert [int(p) for p in orbit_segment(sys_, 2, win)] == [2] * len(win)


def test_skew_orbit_along_diagonal():
    d = Direction.planar(1, 1.0)
    win = strip_window(d, 5)
    sys_ = fit_system(SkewShift(radius=8), [win])
    x = sample_measure(sys_, 1, 0)
    seg = orbit_segment(sys_, x[0], win)
    shifts = [sys_.act((j, 0), x)[0] for j in (-1, 0, 1)]
    for p in seg:
        assert any(np.array_equal(p, s) for s in shifts)
    offsets = {m - n for m, n in win.as_tuples()}
    assert offsets == {-1, 0, 1}


@pytest.mark.parametrize("b", [1, 2, 3])
def test_skew_strip_offsets(b):
    d = Direction.planar(1, float(b))
    for k in (1, 5, 17):
        assert {m - n for m, n in strip_window(d, k).as_tuples()} == set(range(-b, b + 1))


def test_samples_reproducible():
    a = sample_measure(RotationSystem(), 4, 7)
    b = sample_measure(RotationSystem(), 4, 7)
    assert np.array_equal(a, b) and np.all((a >= 0) & (a < 1))
    w = sample_measure(FullShift(radius=3, resolution=3), 1, 0)
    assert w.shape == (1, 7, 7) and set(np.unique(w)) <= {0, 1}


def test_permutation_frequencies():
    x = sample_measure(PermutationSystem(5), 1000, 11)
    freq = np.bincount(x, minlength=5) / 1000
    assert np.all(np.abs(freq - 0.2) < 0.05)


@pytest.mark.parametrize("sys_", [RotationSystem(), PermutationSystem(7)], ids=lambda s: s.kind)
def test_measure_invariance(sys_):
    rng = np.random.default_rng(5)
    x = sys_.sample(4000, rng)
    for w in random_ws(rng, 5, 50):
        y = sys_.act(w, x)
        if sys_.kind == "rotation":
            grid = np.linspace(0, 1, 21)
            gap = np.max(np.abs(np.searchsorted(np.sort(x), grid) - np.searchsorted(np.sort(y), grid))) / 4000
        else:
            gap = np.max(np.abs(np.bincount(x, minlength=7) - np.bincount(y, minlength=7))) / 4000
        assert gap < 0.05


def test_shift_truncation():
    sys_ = FullShift(radius=6, resolution=2)
    x = sys_.sample(2, np.random.default_rng(0))
    assert sys_.act((3, -2), x).shape == (2, 7, 7)
    with pytest.raises(ResolutionError):
        sys_.view(sys_.act((5, 0), x))
    big = fit_system(sys_, [strip_window(Direction.planar(0, 1.0), 40)])
    assert big.radius >= 40 + big.resolution


def test_shift_metric_values():
    sys_ = FullShift(radius=4, resolution=4)
    x = np.zeros((1, 9, 9), dtype=np.uint8)
    y = x.copy()
    y[0, 4 + 2, 4] = 1
    assert sys_.paired(sys_.view(x), sys_.view(y))[0] == 0.25
    assert sys_.paired(sys_.view(x), sys_.view(1 - x))[0] == 1.0


def test_make_system():
    assert make_system({"kind": "rotation", "alpha": 0.1}).alpha == 0.1
    assert make_system({"kind": "permutation", "size": 3, "perm1": [1, 2, 0]}).perm1 == (1, 2, 0)
    with pytest.raises(ValueError):
        make_system({"kind": "torus"})
    with pytest.raises(ValueError):
        make_system({"kind": "rotation", "beta": 1})
    with pytest.raises(ValueError):
        PermutationSystem(3, (1, 2, 0), (1, 0, 2))
