from __future__ import annotations

import math

import numpy as np
import pytest

from dircomplex.lattice import Direction, strip_window
from dircomplex.spectral import (
    DISCRETE,
    NON_DISCRETE,
    EmpiricalFunction,
    TestFunction,
    default_battery,
    l2_distances,
    orbit_cover_number,
    orbit_matrix,
    spectrum_verdict,
)
from dircomplex.systems import FullShift, PermutationSystem, RotationSystem, SkewShift, fit_system, sample_measure


def direct_l2(rows):
    rows = np.asarray(rows)
    return np.array([[np.sqrt(np.mean(np.abs(a - b) ** 2)) for b in rows] for a in rows])


def test_l2_matches_direct():
    rng = np.random.default_rng(0)
    rows = rng.random((12, 50)) + 1j * rng.random((12, 50))
    rows[3] = rows[5]
    rows[7] = rows[2] + 1e-9
    got = l2_distances(rows)
    assert np.allclose(got, direct_l2(rows), atol=1e-12)
    assert got[3, 5] == 0.0
    assert got[2, 7] == pytest.approx(1e-9, rel=1e-6)
    real = rng.random((6, 40))
    assert np.allclose(l2_distances(real), direct_l2(real), atol=1e-12)


def test_identity_action_has_single_translate():
    sys_ = PermutationSystem.identity(5)
    d = Direction.planar(math.sqrt(2), 1.0)
    f = EmpiricalFunction(sys_, default_battery(sys_)[0], sample_measure(sys_, 200, 1))
    for k in (1, 8, 32):
        assert orbit_cover_number(sys_, f, d, k, 0.1).exact == 1


def test_skew_diagonal_orbit_has_three_functions():
    d = Direction.planar(1, 1.0)
    sys_ = fit_system(SkewShift(), [strip_window(d, 64)])
    pts = sample_measure(sys_, 300, 2)
    for t in default_battery(sys_):
        f = EmpiricalFunction(sys_, t, pts)
        for k in (1, 4, 16, 64):
            assert orbit_cover_number(sys_, f, d, k, 0.05).greedy_upper <= 3


def test_fullshift_cylinder_orbit_grows():
    d = Direction.planar(0, 1.0)
    sys_ = fit_system(FullShift(), [strip_window(d, 16)])
    f = EmpiricalFunction(sys_, default_battery(sys_)[0], sample_measure(sys_, 400, 3))
    counts = [orbit_cover_number(sys_, f, d, k, 0.3).greedy_upper for k in (2, 4, 8, 16)]
    assert counts == sorted(set(counts))


def test_translates_preserve_norm():
    d = Direction.planar(math.sqrt(2), 1.0)
    sys_ = fit_system(FullShift(), [strip_window(d, 10)])
    pts = sample_measure(sys_, 2000, 4)
    f = EmpiricalFunction(sys_, default_battery(sys_)[1], pts)
    p = 0.125  # three zero symbols in a row
    sigma = math.sqrt(p * (1 - p) / 2000)
    for w in strip_window(d, 10).as_tuples():
        sq = float(np.mean(np.abs(f.translate(w)) ** 2))
        assert abs(sq - p) < 3 * sigma + 0.01


def test_orbit_matrix_prefix_blocks():
    d = Direction.planar(math.sqrt(2), 1.0)
    sys_ = RotationSystem()
    f = EmpiricalFunction(sys_, default_battery(sys_)[0], sample_measure(sys_, 100, 5))
    big = orbit_matrix(f, d, 12)
    small = orbit_matrix(f, d, 5)
    assert np.allclose(big[: len(small), : len(small)], small)


def test_counts_nondecreasing_in_k():
    d = Direction.planar(0.5, 1.0)
    sys_ = fit_system(SkewShift(), [strip_window(d, 32)])
    f = EmpiricalFunction(sys_, default_battery(sys_)[2], sample_measure(sys_, 200, 6))
    lows = [orbit_cover_number(sys_, f, d, k, 0.3, exact_cap=10**5) for k in (1, 2, 4, 8, 16, 32)]
    exact = [r.exact for r in lows if r.exact is not None]
    assert exact == sorted(exact)
    lower = [r.separated_lower for r in lows]
    assert lower == sorted(lower)


def test_guards():
    sys_ = RotationSystem()
    with pytest.raises(ValueError):
        EmpiricalFunction(sys_, TestFunction("big", lambda p: 2 * np.ones(len(p))), np.zeros(150))
    f = EmpiricalFunction(sys_, default_battery(sys_)[0], np.zeros(50))
    with pytest.raises(ValueError):
        orbit_cover_number(sys_, f, Direction.planar(0), 2, 0.3)
    with pytest.raises(ValueError):
        spectrum_verdict(sys_, Direction.planar(0), default_battery(sys_)[:2], [0.5], [1, 2, 4], 0)


@pytest.mark.parametrize("sys_,beta,want", [
    (RotationSystem(), math.sqrt(2), DISCRETE),
    (SkewShift(), 1, DISCRETE),
    (SkewShift(), 0, NON_DISCRETE),
    (FullShift(), math.sqrt(2), NON_DISCRETE),
    (PermutationSystem(), 0, DISCRETE),
], ids=lambda v: getattr(v, "kind", str(v)))
def test_spectrum_ground_truth(sys_, beta, want):
    rep = spectrum_verdict(sys_, Direction.planar(beta, 1.0), None, [0.5, 0.35, 0.25],
                           [1, 2, 4, 8, 16, 32, 64, 128, 256], 7)
    assert rep.verdict == want, {n: rep.function_verdict(n) for n in rep.verdicts}
    assert len(rep.rows()) == 3 * 3 * 9
