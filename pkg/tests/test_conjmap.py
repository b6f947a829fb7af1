import numpy as np
import pytest

from torusconj import parse_spec, block_triangularize, build_engine
from torusconj import conjmap, dynamics, intlat, semiconj
from torusconj.errors import EngineError


@pytest.fixture(scope="module")
def engine_linear():
    s = parse_spec("dim=2\nM=[[2,0],[0,1]]\n")
    bf = block_triangularize(s.M_list(), [[1, 0]])
    return build_engine(s, bf, N=8)


def test_H_forward_linear_identity(engine_linear, rng):
    # G = 0: H is just a coordinate re-grouping
    z = rng.uniform(0, 1, size=(20, 2))
    x, y = conjmap.H_forward(engine_linear, z)
    assert np.abs(x[:, 0] - z[:, 0]).max() <= 1e-14
    assert np.array_equal(y, z[:, 1:])


def test_H_forward_requires_expanding(engine_cat):
    with pytest.raises(EngineError):
        conjmap.H_forward(engine_cat, np.array([0.1, 0.2]))


def test_solve_fiber_point_linear(engine_linear):
    t = conjmap.solve_fiber_point(engine_linear, 0.3, np.array([0.7]), tol=1e-12)
    assert abs(t - 0.3) <= 1e-12


def test_solve_fiber_point_residual(engine_2d, rng):
    for _ in range(50):
        x0 = float(rng.uniform(0, 1))
        y0 = rng.uniform(0, 1, size=1)
        t = conjmap.solve_fiber_point(engine_2d, x0, y0, tol=1e-10)
        res = abs(semiconj.phi_hat(engine_2d, np.array([t, y0[0]])).value[0] - x0)
        assert res <= 1e-10


def test_fiber_uniqueness_probe(engine_2d, block_2d, rng):
    # away from the root, Phi_hat - x0 stays bounded away from zero by the
    # cone growth bound tau * dt - 2 eps
    from torusconj import cones
    tau = cones.tau(cones.ConeParams(1, 0.5, 1.2))
    x0, y0 = 0.4, np.array([0.25])
    t = conjmap.solve_fiber_point(engine_2d, x0, y0, tol=1e-12)
    for dt in rng.uniform(0.01, 0.99, size=50):
        v = semiconj.phi_hat(engine_2d, np.array([t + dt, y0[0]])).value[0]
        assert abs(v - x0) >= tau * 0.01 - 2 * engine_2d.eps


def test_H_inverse_round_trips(engine_2d, rng):
    tol = 1e-10
    z = rng.uniform(0, 1, size=(100, 2))
    x, y = conjmap.H_forward(engine_2d, z)
    tau_floor = 0.5   # observed monotone slope is ~0.69; 0.5 is safe
    for i in range(len(z)):
        zi = conjmap.H_inverse(engine_2d, x[i], y[i], tol=tol)
        d = dynamics.torus_distance(zi, z[i])
        assert d <= tol / tau_floor + 2 * engine_2d.eps / tau_floor
        # H(H_inverse(x,y)) = (x,y) within tol
        xi, yi = conjmap.H_forward(engine_2d, zi)
        assert dynamics.torus_distance(xi, x[i][None]) <= tol + 2 * engine_2d.eps
        assert np.abs(yi - y[i]).max() <= 1e-14


def test_trace_fiber_linear_flat(engine_linear):
    fib = conjmap.trace_fiber(engine_linear, 0.3, 16, tol=1e-12)
    assert np.abs(fib.values - 0.3).max() <= 1e-12
    assert fib.max_adjacent_step <= 1e-9
    assert fib.periodic_closure <= 1e-11


def test_trace_fiber_fixture(engine_2d):
    tol = 1e-10
    fib = conjmap.trace_fiber(engine_2d, 0.3, 256, tol=tol)
    assert fib.residuals.max() <= tol
    assert fib.monotone_slope > 0
    assert fib.periodic_closure <= (2 * engine_2d.eps + 2 * tol) / 0.5
    # graph continuity: adjacent values move at a bounded rate
    assert fib.max_adjacent_step <= 1.0


def test_fiber_maps_into_fiber(engine_2d):
    # Phi_hat(F(fiber point)) stays within the ceiling of A x0
    tol = 1e-10
    x0 = 0.3
    fib = conjmap.trace_fiber(engine_2d, x0, 64, tol=tol)
    pts = np.stack([fib.values, fib.grid[:, 0]], axis=1)
    img = dynamics.eval_lift(engine_2d.spec, pts)
    vals = semiconj.phi_hat(engine_2d, img).value[:, 0]
    ceiling = (np.linalg.norm(engine_2d.A, 2) + 1) * engine_2d.eps \
        + np.linalg.norm(engine_2d.A, 2) * tol
    assert np.abs(vals - 2 * x0).max() <= ceiling + 1e-12


def test_skew_product_linear(engine_linear):
    rep = conjmap.skew_product_residual(engine_linear, 16, tol=1e-13)
    assert rep.max_base_residual <= 1e-12
    # the fiber map reproduces the linear action on y
    y = rep.grid[:, 1]
    assert np.abs(rep.fiber_map_samples[:, 0] - np.mod(y, 1.0)).max() <= 1e-12


def test_skew_product_fixture(engine_2d):
    rep = conjmap.skew_product_residual(engine_2d, 32, tol=1e-10)
    assert rep.max_base_residual <= rep.ceiling


def test_smoothness_probe(engine_2d):
    fib = conjmap.trace_fiber(engine_2d, 0.3, 32, tol=1e-10)
    fib2 = conjmap.trace_fiber(engine_2d, 0.3, 64, tol=1e-10)
    rep = conjmap.fiber_smoothness_probe(fib, fib2, certified=True)
    assert rep.certified
    assert rep.max_slope_diff <= 0.1 * max(rep.max_slope_coarse, 1e-12)
    with pytest.raises(ValueError):
        conjmap.fiber_smoothness_probe(fib, fib, certified=False)


def test_smoothness_probe_flat(engine_linear):
    fib = conjmap.trace_fiber(engine_linear, 0.3, 8, tol=1e-12)
    fib2 = conjmap.trace_fiber(engine_linear, 0.3, 16, tol=1e-12)
    rep = conjmap.fiber_smoothness_probe(fib, fib2)
    assert rep.max_slope_diff <= 1e-8
    assert not rep.certified


def test_damped_solver_k2(rng):
    # k = 2 expanding block: uncertified damped solve with residual check.
    # conformal core (A = 3I) keeps the series well-conditioned in t
    s = parse_spec("dim=3\nM=[[3,0,0],[0,3,0],[0,0,1]]\n"
                   "G[1]=0.02*sin(2*pi*(z1+z3))\nG[2]=0.02*cos(2*pi*(z2))\n")
    bf = block_triangularize(s.M_list(), [[1, 0, 0], [0, 1, 0]])
    eng = build_engine(s, bf, N=20)
    x0 = np.array([0.3, 0.6])
    y0 = np.array([0.25])
    t = conjmap.solve_fiber_point(eng, x0, y0, tol=1e-10)
    res = np.linalg.norm(
        semiconj.phi_hat(eng, np.concatenate([t, y0])).value - x0)
    assert res <= 1e-10


def test_exports(engine_2d, tmp_path):
    fib = conjmap.trace_fiber(engine_2d, 0.3, 8, tol=1e-10)
    conjmap.export_fiber_csv(fib, tmp_path / "fiber.csv")
    assert (tmp_path / "fiber.csv").read_text().startswith("y_1,t,residual")
    summary = conjmap.fiber_json_summary(fib)
    assert summary["max_residual"] <= 1e-10
    rep = conjmap.skew_product_residual(engine_2d, 8, tol=1e-10)
    conjmap.export_skew_csv(rep, tmp_path / "skew.csv")
    assert (tmp_path / "skew.csv").exists()
    import json
    assert json.loads(conjmap.skew_json_summary(rep))["pass"]
