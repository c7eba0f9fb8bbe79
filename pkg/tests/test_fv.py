import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rramfv import fv
from rramfv.mesh import uniform_mesh


def test_bernoulli_small_and_large():
    assert fv.bernoulli(0.0) == 1.0
    assert fv.bernoulli(1e-12) == pytest.approx(1 - 5e-13, rel=1e-15)
    assert fv.bernoulli(800.0) == 0.0
    assert fv.bernoulli(-800.0) == pytest.approx(800.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-300.0, 300.0))
def test_bernoulli_identity(x):
    # B(-x) = B(x) + x
    assert fv.bernoulli(-x) == pytest.approx(fv.bernoulli(x) + x, rel=1e-10, abs=1e-12)


def test_sg_pure_diffusion_limit():
    ca, cb = fv.sg_coefficients(np.array([2.0]), np.array([0.0]), np.array([0.5]))
    assert ca == pytest.approx(4.0) and cb == pytest.approx(4.0)


def test_sg_pure_drift_limit():
    # strongly positive drift: upwind from a
    ca, cb = fv.sg_coefficients(np.array([1e-6]), np.array([1.0]), np.array([1.0]))
    assert ca == pytest.approx(1.0, rel=1e-6) and cb < 1e-100


def test_sg_exact_for_steady_exponential():
    # zero flux state n ~ exp(w z / D)
    D, w, h = 0.3, 1.7, 0.2
    ca, cb = fv.sg_coefficients(np.array([D]), np.array([w]), np.array([h]))
    na, nb = 1.0, np.exp(w * h / D)
    assert ca[0] * na - cb[0] * nb == pytest.approx(0.0, abs=1e-13)


def test_face_conductance_harmonic():
    m = uniform_mesh(1.0, 2.0, 1, 2)
    conn = fv.connectivity(m)
    G = fv.face_conductance(conn, np.array([[1.0], [3.0]]))
    # two half-cells of length 0.5 in series, area 1
    assert G[0] == pytest.approx(1.0 / (0.5 / 1.0 + 0.5 / 3.0))


def test_banded_solve_matches_sparse(rng):
    m = uniform_mesh(1.0, 1.0, 7, 9)
    conn = fv.connectivity(m)
    coef = rng.uniform(0.5, 5.0, m.shape)
    sys = fv.assemble_diffusion(conn, coef, {"bottom": 0.0, "top": 1.0}, diag=rng.uniform(0, 1, m.size))
    x, res = sys.solve()
    from scipy.sparse.linalg import spsolve

    ref = spsolve(sys.to_sparse().tocsc(), sys.rhs)
    np.testing.assert_allclose(x, ref, rtol=1e-10, atol=1e-12)
    assert res < 1e-12


def test_nan_boundary_is_zero_flux():
    m = uniform_mesh(1.0, 1.0, 4, 4)
    pf = fv.solve_conduction(m, np.ones(m.shape), {"bottom": 0.0, "top": 1.0, "left": np.full(4, np.nan)})
    np.testing.assert_allclose(pf.psi, pf.psi[:, :1] * np.ones((1, 4)), atol=1e-13)


def test_joule_density_total_equals_IV(rng):
    m = uniform_mesh(40e-9, 60e-9, 6, 12, depth=20e-9)
    sigma = rng.uniform(1e3, 1e5, m.shape)
    pf = fv.solve_conduction(m, sigma, {"bottom": 0.0, "top": 0.8})
    q = fv.joule_density(m, sigma, pf, {"bottom": 0.0, "top": 0.8})
    I = -np.sum(pf.boundary_current["top"])
    assert np.sum(q * m.volume) == pytest.approx(I * 0.8, rel=1e-10)


def test_joule_source_values():
    assert fv.joule_source(1e5, 1e8) == pytest.approx(1e21)
    assert fv.joule_source(3.0, 0.0) == 0.0
    assert fv.joule_source(2.0, 6.0) == 4 * fv.joule_source(2.0, 3.0)
    assert fv.joule_source(np.ones(2), np.array([[3.0, 4.0], [0.0, 1.0]])).tolist() == [25.0, 1.0]


def test_steady_diffusion_requires_positive_dt():
    m = uniform_mesh(1.0, 1.0, 2, 2)
    z = np.zeros(m.shape)
    with pytest.raises(ValueError):
        fv.diffusion_step(m, z, z + 1, z + 1, z, 0.0, {})


def test_transport_step_conserves(rng):
    m = uniform_mesh(1.0, 1.0, 6, 8)
    conn = fv.connectivity(m)
    n0 = rng.uniform(0, 1, m.shape)
    D = rng.uniform(0.01, 1, conn.n_faces)
    w = rng.normal(0, 5, conn.n_faces)
    n1, _ = fv.sg_transport_step(m, n0, D, w, 0.1, np.ones(m.shape, bool))
    assert np.sum(n1 * m.volume) == pytest.approx(np.sum(n0 * m.volume), rel=1e-12)
    assert n1.min() >= 0


def test_transport_inactive_cells_untouched(rng):
    m = uniform_mesh(1.0, 1.0, 3, 6)
    conn = fv.connectivity(m)
    act = np.zeros(m.shape, bool)
    act[2:4] = True
    n0 = rng.uniform(0, 1, m.shape)
    n1, _ = fv.sg_transport_step(m, n0, np.ones(conn.n_faces), np.full(conn.n_faces, 3.0), 1.0, act)
    np.testing.assert_array_equal(n1[~act], n0[~act])
    assert np.sum(n1[act]) == pytest.approx(np.sum(n0[act]), rel=1e-12)
