import numpy as np
import pytest

from torusconj import parse_spec
from torusconj import dynamics
from torusconj.errors import ContractionError, LatticeError


def test_eval_G_oracle(spec_1d):
    # closed form: G(z) = 0.125 sin(2 pi z)
    z = np.array([0.25])
    assert np.isclose(dynamics.eval_G(spec_1d, z)[0], 0.125)
    assert np.isclose(dynamics.eval_lift(spec_1d, z)[0], 0.625)


def test_eval_G_oracle_2d(spec_2d):
    z = np.array([0.1, 0.2])
    want = np.array([0.03 * np.sin(2 * np.pi * 0.3),
                     0.03 * np.cos(2 * np.pi * 0.2)])
    assert np.allclose(dynamics.eval_G(spec_2d, z), want, atol=1e-15)


def test_jacobian_against_finite_differences(spec_2d, rng):
    # independent oracle: central finite differences of the lift
    h = 1e-6
    for _ in range(10):
        z = rng.uniform(-2, 2, size=2)
        J = dynamics.jacobian(spec_2d, z)
        J_fd = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            J_fd[:, j] = (dynamics.eval_lift(spec_2d, z + e)
                          - dynamics.eval_lift(spec_2d, z - e)) / (2 * h)
        assert np.allclose(J, J_fd, atol=1e-8)


def test_equivariance(spec_2d, rng):
    # lift commutes with deck transformations: F(z+m) = F(z) + M m
    M = dynamics.M_array(spec_2d)
    for _ in range(10):
        z = rng.uniform(-3, 3, size=2)
        m = rng.integers(-5, 6, size=2).astype(float)
        lhs = dynamics.eval_lift(spec_2d, z + m)
        rhs = dynamics.eval_lift(spec_2d, z) + M @ m
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_norm_bounds_dominate_samples(spec_2d, rng):
    nb = dynamics.norm_bounds(spec_2d)
    Z = rng.uniform(0, 1, size=(2000, 2))
    g = dynamics.eval_G(spec_2d, Z)
    assert np.linalg.norm(g, axis=1).max() <= nb.g_sup + 1e-12
    # Lipschitz bound on sampled pairs
    Z2 = Z + rng.uniform(-0.05, 0.05, size=Z.shape)
    g2 = dynamics.eval_G(spec_2d, Z2)
    num = np.linalg.norm(g - g2, axis=1)
    den = np.linalg.norm(Z - Z2, axis=1)
    assert (num <= nb.g_lip * den + 1e-12).all()


def test_norm_bounds_oracle_1d(spec_1d):
    nb = dynamics.norm_bounds(spec_1d)
    assert np.isclose(nb.g_sup, 0.125)
    assert np.isclose(nb.g_lip, 0.25 * np.pi)
    assert np.isclose(nb.dg_lip, 0.5 * np.pi ** 2)


def test_invert_lift_round_trip(spec_cat, rng):
    Z = rng.uniform(-2, 2, size=(100, 2))
    W = dynamics.invert_lift(spec_cat, Z, tol=1e-13)
    assert np.abs(dynamics.eval_lift(spec_cat, W) - Z).max() <= 1e-12


def test_invert_lift_rejects_expansion_violation():
    s = parse_spec("dim=1\nM=[[2]]\nG[1]=0.9*sin(2*pi*(z1))\n")
    # rho = 0.5 * 0.9 * 2 pi > 1
    with pytest.raises(ContractionError):
        dynamics.invert_lift(s, np.array([0.3]))


def test_change_coordinates_conjugates(spec_2d, rng):
    S = [[1, -1], [0, 1]]
    s2 = dynamics.change_coordinates(spec_2d, S)
    Sf = np.array(S, dtype=float)
    Sinv = np.linalg.inv(Sf)
    for _ in range(10):
        z = rng.uniform(-1, 1, size=2)
        lhs = dynamics.eval_lift(s2, z)
        rhs = Sinv @ dynamics.eval_lift(spec_2d, Sf @ z)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_change_coordinates_rejects_non_unimodular(spec_2d):
    with pytest.raises(LatticeError):
        dynamics.change_coordinates(spec_2d, [[2, 0], [0, 1]])


def test_torus_distance():
    assert np.isclose(dynamics.torus_distance(np.array([0.95]), np.array([0.05])), 0.1)
    assert dynamics.torus_distance(np.array([0.5, 0.5]), np.array([0.5, 0.5])) == 0.0
