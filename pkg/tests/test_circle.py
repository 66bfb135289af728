import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from nctorus import circle as cd
from nctorus.afk import make_commuting_h

G = 512


def smooth_h(seed, amp=0.3, K=4, grid=G):
    rng = np.random.default_rng(seed)
    c = (rng.normal(size=K) + 1j * rng.normal(size=K)) / (np.arange(1, K + 1) ** 3)
    # keep sup |Dh - 1| = sum 2 pi k |c_k| below amp
    c *= amp / np.sum(2 * np.pi * np.arange(1, K + 1) * np.abs(c))
    return cd.CircleDiffeo(rng.random(), c, grid)


def wrap(d):
    return (d + 0.5) % 1.0 - 0.5


def test_json_roundtrip_and_direct_evaluation():
    h = smooth_h(1)
    rec = h.to_json()
    x = np.linspace(0, 1, 77)
    assert np.allclose(h(x), oracles.lift(rec, x), atol=1e-14)
    assert np.allclose(h.deriv(x), oracles.lift_deriv(rec, x), atol=1e-13)
    h2 = cd.CircleDiffeo.from_json(rec)
    assert np.array_equal(h2.coeffs, h.coeffs)


def test_non_monotone_rejected():
    with pytest.raises(cd.MonotonicityError):
        cd.CircleDiffeo(0.0, np.array([0.3 + 0j]), G)


def test_malformed_json():
    with pytest.raises(ValueError):
        cd.CircleDiffeo.from_json({"periodic": []})


def test_compose_identity_and_rotations():
    f = smooth_h(2)
    g = cd.compose(cd.identity(G), f)
    assert np.allclose(g(f.points()), f(f.points()), atol=1e-13)
    r = cd.compose(cd.rotation(0.25, G), cd.rotation(0.25, G))
    assert r.is_rotation() and r.mean_translation == 0.5


@pytest.mark.parametrize("seed", [3, 4, 5])
def test_compose_with_inverse_is_identity(seed):
    h = smooth_h(seed)
    e = cd.compose(h, cd.inverse(h))
    x = np.random.default_rng(seed).random(400)
    assert np.abs(wrap(e(x) - x)).max() < 1e-10


def test_inverse_matches_bisection():
    h = smooth_h(6)
    y = np.linspace(0, 1, 101)
    assert np.abs(cd.invert_points(h, y) - oracles.invert(h.to_json(), y)).max() < 1e-12


def test_iterate():
    f = smooth_h(7)
    assert cd.iterate(f, 0).is_rotation()
    r = cd.iterate(cd.rotation(0.3, G), 5)
    assert math.isclose(r.mean_translation, 1.5 % 1.0, abs_tol=1e-15)
    x = f.points()
    two = cd.iterate(f, 2)
    ff = cd.compose(f, f)
    assert np.abs(two(x) - ff(x)).max() < 1e-10
    back = cd.iterate(f, -3)
    assert np.abs(wrap(back(cd.iterate(f, 3)(x)) - x)).max() < 1e-9


def test_growth_of_rotation_is_one():
    assert np.all(cd.growth_sequence(cd.rotation(0.123, G), 10).values == 1.0)


@pytest.mark.parametrize("seed", [8, 9])
def test_growth_bounded_for_conjugated_rotation(seed):
    h = smooth_h(seed, amp=0.2)
    f = cd.conjugate_rotation(h, 0.3819660112501051)
    tab = cd.growth_sequence(f, 40)
    Dh = oracles.lift_deriv(h.to_json(), np.arange(4096) / 4096)
    bound = Dh.max() / Dh.min()
    assert tab.values.max() <= bound * (1 + 1e-9)


def test_growth_matches_bruteforce_oracle():
    h = smooth_h(10, amp=0.25)
    f = cd.conjugate_rotation(h, 0.2)
    brute = oracles.growth_bruteforce(f.to_json(), 6, points=G)
    assert np.allclose(cd.growth_sequence(f, 6).values, brute, rtol=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.05, 0.95))
def test_growth_submultiplicative(seed, alpha):
    f = cd.conjugate_rotation(smooth_h(seed, amp=0.3, grid=256), alpha)
    v = cd.growth_sequence(f, 12).as_array(with_zero=True)
    assert np.all(v[2:] <= v[1:-1] * v[1] * (1 + 1e-9))


def test_rotation_number():
    assert cd.rotation_number(cd.rotation(1 / 3, G))[0] == pytest.approx(1 / 3, abs=1e-15)
    assert cd.rotation_number(cd.identity(G))[0] == 0.0
    a = 0.31
    rho, tol = cd.rotation_number(cd.conjugate_rotation(smooth_h(11), a), 2000)
    assert abs(rho - a) <= tol


def test_rn_derivative():
    assert np.all(cd.rn_derivative(cd.rotation(0.2, G), 3) == 1.0)
    f = cd.conjugate_rotation(smooth_h(12), 0.41)
    d = cd.rn_derivative(f, 2)
    assert abs(d.mean() - 1.0) < 1e-10
    # cocycle: Df^-n(x) * Df^n(f^-n x) = 1
    y, dm = cd.orbit_derivative(f, -2, f.points())
    _, dp = cd.orbit_derivative(f, 2, y)
    assert np.abs(dm * dp - 1).max() < 1e-8


def test_square_root():
    assert cd.square_root_conjugated(cd.identity(G), 0.4).mean_translation == pytest.approx(0.2)
    h = smooth_h(13)
    g = cd.square_root_conjugated(h, 0.3)
    f = cd.conjugate_rotation(h, 0.3)
    x = f.points()
    assert np.abs(wrap(g(g(x)) - f(x))).max() < 1e-9
    assert cd.rotation_number(g, 2000)[0] == pytest.approx(0.15, abs=1e-3)


def test_cocycle_samples():
    s = cd.cocycle_samples(cd.rotation(0.381966, G), 2000, 0.01)
    assert s.size > 0 and np.all(s == 1.0)
    h = smooth_h(14, amp=0.2)
    f = cd.conjugate_rotation(h, 0.381966)
    gamma = cd.growth_sequence(f, 1).gamma(1)
    s = cd.cocycle_samples(f, 2000, 0.01)
    Dh = h.deriv_grid()
    bound = Dh.max() / Dh.min()
    assert s.size > 0 and s.max() <= bound and s.min() >= 1 / bound


def test_commuting_h_structure():
    assert make_commuting_h(4, 0.0, 1, G).is_rotation()
    h = make_commuting_h(4, 0.07, 1, G)
    x = np.random.default_rng(0).random(300)
    assert np.abs(h(x + 0.25) - h(x) - 0.25).max() < 1e-14
    xs = np.arange(1 << 14) / (1 << 14)
    assert abs(np.abs(h.deriv(xs) - 1).max() - 0.07) < 1e-10


def test_under_resolved_composite_warns():
    h = make_commuting_h(60, 0.5, 1, 128)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        try:
            cd.compose(h, h)
        except cd.MonotonicityError:
            return
    assert any(issubclass(x.category, cd.ResolutionWarning) for x in w)
