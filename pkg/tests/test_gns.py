import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nctorus import circle as cd
from nctorus import gns
from nctorus.weyl import CircleMeasure, WeylElement, state_omega_mu, star

ALPHA = 0.3819660112501051 / 2


@pytest.fixture(scope="module")
def md_rot():
    return gns.ModularData.rotation(ALPHA, 512)


@pytest.fixture(scope="module")
def md_smooth():
    h = cd.CircleDiffeo(0.1, np.array([0.03 + 0.02j, -0.01j]), 1024)
    return gns.ModularData.from_conjugacy(h, ALPHA)


def rand(seed, **kw):
    return WeylElement.random(np.random.default_rng(seed), ALPHA, **kw)


def test_truncation_validation():
    with pytest.raises(ValueError):
        gns.Truncation(0, 8, 1024)
    with pytest.raises(ValueError):
        gns.Truncation(2, 8, 32)
    tr = gns.Truncation(2, 8, 64)
    assert tr.dim == 17 and list(tr.blocks) == [-2, -1, 0, 1, 2]


def test_unit_is_identity(md_smooth):
    tr = gns.Truncation(2, 8, 256)
    A = gns.represent(WeylElement.unit(ALPHA), md_smooth, tr)
    assert A.max_block_diff(gns.identity_operator(tr)) < 1e-14


def test_rotation_blocks_are_phased_shifts(md_rot):
    tr = gns.Truncation(2, 8, 256)
    m = 3
    A = gns.represent(WeylElement.delta(m, 0, ALPHA), md_rot, tr)
    for n in tr.blocks:
        ref = np.exp(2j * np.pi * m * 2 * n * ALPHA) * np.eye(tr.dim, k=-m)
        assert np.abs(A.block(n, n) - ref).max() < 1e-14


def test_vector_state_is_omega_mu(md_smooth):
    tr = gns.Truncation(2, 16, 1024)
    mu = CircleMeasure.pushforward(lambda x: cd.invert_points(md_smooth.h_conj, x), 1024)
    f = rand(1, m_range=4)
    assert abs(gns.vector_state(f, md_smooth, tr) - state_omega_mu(f, mu)) < 1e-13


def test_vector_state_rotation_is_trace(md_rot):
    f = rand(2)
    assert abs(gns.vector_state(f, md_rot, gns.Truncation(2, 8, 256)) - f[(0, 0)]) < 1e-14


@pytest.mark.parametrize("seed", [3, 4])
def test_product_homomorphism(md_smooth, seed):
    f, g = rand(seed, n_range=1), rand(seed + 10, n_range=1)
    res = [gns.product_residual(f, g, md_smooth, gns.Truncation(4, M, 2048)) for M in (16, 32, 64)]
    # spectral convergence in the mode cutoff
    assert res[0] > res[1] > res[2] and res[2] < 1e-12


def test_product_exact_for_rotation(md_rot):
    tr = gns.Truncation(4, 16, 512)
    f, g = rand(5, n_range=1), rand(6, n_range=1)
    assert gns.product_residual(f, g, md_rot, tr) < 1e-12


def test_star_is_adjoint(md_smooth):
    tr = gns.Truncation(3, 16, 512)
    f = rand(7, n_range=1)
    A = gns.represent(f, md_smooth, tr).adjoint()
    B = gns.represent(star(f), md_smooth, tr)
    assert A.max_block_diff(B, modes=8) < 1e-10


def test_crossed_product(md_smooth):
    tr = gns.Truncation(3, 16, 1024)
    H = {-2: 0.3, 0: 1.0, 1: 0.5j}
    assert gns.crossed_product_check(H, md_smooth, tr, k=1) < 1e-12


def test_shift_unitary_interior():
    tr = gns.Truncation(3, 8, 64)
    P = gns.shift_lambda(1, tr) @ gns.shift_lambda(-1, tr)
    for n in range(-tr.N + 1, tr.N + 1):
        assert np.array_equal(P.block(n, n), np.eye(tr.dim))
    assert gns.shift_lambda(1, tr).norm() == 1.0
    with pytest.raises(ValueError):
        gns.shift_lambda(7, tr)


def test_tomita_rotation(md_rot):
    tr = gns.Truncation(3, 16, 512)
    assert gns.tomita_check(rand(8, n_range=2), md_rot, tr) < 1e-13


def test_tomita_smooth(md_smooth):
    tr = gns.Truncation(3, 32, 1024)
    assert gns.tomita_check(rand(9, n_range=2), md_smooth, tr) < 1e-8


def test_cyclicity(md_smooth):
    tr = gns.Truncation(2, 8, 256)
    assert gns.cyclicity_rank(md_smooth, tr) == tr.dim


def test_delta_bounded_by_growth(md_o_n):
    tr = gns.Truncation(8, 16, 4096)
    gam = md_o_n.growth(tr.N)
    for n in tr.blocks:
        if n == 0:
            continue
        d = md_o_n.delta(n, tr.G)
        assert d.max() <= gam.gamma(abs(n)) * (1 + 1e-9)
        assert 1 / d.min() <= gam.gamma(abs(n)) * (1 + 1e-9)


def test_delta_closed_form_vs_chain(md_smooth):
    G = md_smooth.f.grid
    for n in (1, 3, -2):
        err = np.abs(md_smooth.delta(n, G) - md_smooth.delta_chain(n)).max()
        assert err < 1e-9


def test_cocycle_symmetry(md_smooth):
    for n in (1, 2, -3):
        assert md_smooth.cocycle_symmetry_residual(n, 1024) < 1e-10


def test_spectrum_report_inversion_symmetric(md_smooth):
    rep = gns.delta_spectrum_report(md_smooth, gns.Truncation(3, 8, 1024))
    iv = rep["intervals"]
    inv = gns.merge_intervals([(1 / b, 1 / a) for a, b in iv])
    assert np.allclose(np.array(iv), np.array(inv), rtol=1e-12)
    lo, hi, ok = md_smooth.centrality_precondition(3, 1024)
    assert ok and lo <= 1 <= hi


def test_merge_intervals():
    assert gns.merge_intervals([(2, 3), (0, 1), (0.5, 2.5)]) == [[0, 3]]
    assert gns.merge_intervals([(0, 1), (2, 3)]) == [[0, 1], [2, 3]]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_norm_bounds(seed):
    rng = np.random.default_rng(seed)
    tr = gns.Truncation(2, 4, 64)
    A = gns.BlockOperator(tr.N, tr.dim, {
        (r, c): rng.normal(size=(tr.dim, tr.dim)) + 0j
        for r in tr.blocks for c in tr.blocks if abs(r - c) <= 1
    })
    exact = float(np.linalg.norm(A.to_dense(), 2))
    assert A.norm() == pytest.approx(exact, rel=1e-12)
    assert gns._sparse_norm(A) == pytest.approx(exact, rel=1e-8)
    assert A.norm_upper() >= exact * (1 - 1e-12)


def test_block_algebra_matches_dense():
    rng = np.random.default_rng(0)
    tr = gns.Truncation(1, 4, 64)
    mk = lambda: gns.BlockOperator(tr.N, tr.dim, {(r, c): rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9)) for r in tr.blocks for c in tr.blocks if (r + c) % 2 == 0})
    A, B = mk(), mk()
    assert np.allclose((A @ B).to_dense(), A.to_dense() @ B.to_dense())
    assert np.allclose((A - B.scale(2)).to_dense(), A.to_dense() - 2 * B.to_dense())
    assert np.allclose(A.adjoint().to_dense(), A.to_dense().conj().T)
    v = rng.normal(size=(3, 9)) + 0j
    assert np.allclose(A.apply(v).ravel(), A.to_dense() @ v.ravel())


def test_leak_warning(md_rot):
    with pytest.warns(gns.TruncationWarning):
        gns.represent(WeylElement.delta(0, 5, ALPHA), md_rot, gns.Truncation(2, 8, 256))


def test_modular_data_from_build(build_o_n, md_o_n):
    assert md_o_n.alpha == build_o_n.rotation_final / 2
    assert md_o_n.f is build_o_n.f
