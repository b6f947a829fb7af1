"""The conjugacy H(z) = (Phi(z), proj_{W-perp} z): forward map, certified
fiber solving (k = 1 bisection), fiber tracing, and the skew-product check
H o F o H^-1 = (A x, F_y(x, y)).

Everything runs in block (S-) coordinates through a SemiConjEngine in
expanding mode.  The certified inverse path needs k = 1: there the series
displacement bound gives a guaranteed sign-change bracket and the cone
structure makes t -> Phi_hat((t, y)) strictly monotone, so bisection is
sound.  For k > 1 an uncertified damped fixed-point solve is provided
with residual reporting.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import dynamics, semiconj
from .errors import EngineError, FiberSolveError
from .semiconj import SemiConjEngine

PRESCAN_POINTS = 32
MAX_BISECT = 120
MAX_DAMPED = 500


def _require_expanding(engine: SemiConjEngine):
    if engine.mode != "expanding":
        raise EngineError("the conjugacy construction runs in expanding mode")


def H_forward(engine: SemiConjEngine, z):
    """H(theta) = (Phi(theta), last d-k coordinates), both torus-valued."""
    _require_expanding(engine)
    Z = np.asarray(z, dtype=float)
    phi = semiconj.phi_torus(engine, Z).value
    y = np.mod(Z[..., engine.k:], 1.0)
    return phi, y


def _phi_line(engine: SemiConjEngine, t, Y):
    """Phi_hat along W-parallel lines: t (n,), Y (n, d-1) -> (n,) (k = 1)."""
    Z = np.concatenate([t[:, None], Y], axis=1)
    return semiconj.phi_hat(engine, Z).value[:, 0]


def _bracket_halfwidth(engine: SemiConjEngine) -> float:
    # |Phi_hat(z) - z_1| <= C_A ||G||_0 + eps, so x0 +- this brackets the root
    return 0.5 + engine.c_a * engine.norms.g_sup + engine.eps


def _bisect_batch(engine: SemiConjEngine, x0, Y, tol, prescan=True):
    """Vectorized certified bisection for k = 1.

    x0: (n,) lift targets; Y: (n, d-1) fixed off-core coordinates.
    Returns t: (n,) with |Phi_hat((t, y)) - x0| <= tol at every point.
    """
    n = x0.shape[0]
    half = _bracket_halfwidth(engine)
    lo = x0 - half
    hi = x0 + half
    f_lo = _phi_line(engine, lo, Y) - x0
    f_hi = _phi_line(engine, hi, Y) - x0
    if np.any(f_lo >= 0) or np.any(f_hi <= 0):
        raise FiberSolveError(
            "bracket endpoints do not straddle the target; the engine's "
            "displacement bound is inconsistent")
    if prescan:
        ts = lo[:, None] + (hi - lo)[:, None] * (
            np.arange(PRESCAN_POINTS + 1) / PRESCAN_POINTS)[None, :]
        vals = np.empty_like(ts)
        for j in range(PRESCAN_POINTS + 1):
            vals[:, j] = _phi_line(engine, ts[:, j], Y) - x0
        signs = np.sign(vals)
        signs[signs == 0] = 1
        changes = (np.diff(signs, axis=1) != 0).sum(axis=1)
        if np.any(changes != 1):
            bad = int(np.argmax(changes != 1))
            raise FiberSolveError(
                f"fiber line has {int(changes[bad])} sign changes instead of 1 "
                "(monotonicity / cone-certificate inconsistency)")
        # shrink to the scanned subinterval containing the change
        idx = np.argmax(np.diff(signs, axis=1) != 0, axis=1)
        rows = np.arange(n)
        lo, hi = ts[rows, idx], ts[rows, idx + 1]
    t = 0.5 * (lo + hi)
    for _ in range(MAX_BISECT):
        f = _phi_line(engine, t, Y) - x0
        if np.abs(f).max() <= tol:
            return t
        pos = f > 0
        hi = np.where(pos, t, hi)
        lo = np.where(pos, lo, t)
        t = 0.5 * (lo + hi)
    f = _phi_line(engine, t, Y) - x0
    if np.abs(f).max() > tol:
        raise FiberSolveError(
            f"bisection stalled at residual {np.abs(f).max():.3g} > tol {tol:.3g}")
    return t


def _damped_batch(engine: SemiConjEngine, X0, Y, tol):
    """Uncertified damped solve for k > 1: t <- t - A^-1 (Phi_hat - x0)."""
    Ainv = np.linalg.inv(engine.A)
    T = X0.copy()
    for _ in range(MAX_DAMPED):
        Z = np.concatenate([T, Y], axis=1)
        r = semiconj.phi_hat(engine, Z).value - X0
        if np.linalg.norm(r, axis=1).max() <= tol:
            return T
        T = T - r @ Ainv.T
        if not np.all(np.isfinite(T)):
            raise FiberSolveError("damped fiber solve diverged")
    Z = np.concatenate([T, Y], axis=1)
    r = np.linalg.norm(semiconj.phi_hat(engine, Z).value - X0, axis=1).max()
    if r > tol:
        raise FiberSolveError(
            f"damped fiber solve stalled at residual {r:.3g} > tol {tol:.3g}")
    return T


def solve_fiber_point(engine: SemiConjEngine, x0, y0, tol: float = 1e-10):
    """The unique t with Phi_hat((t, y0)) = x0 (lift coordinates).

    Certified bisection for k = 1; uncertified damped iteration otherwise.
    """
    _require_expanding(engine)
    x0a = np.atleast_1d(np.asarray(x0, dtype=float))
    y0a = np.asarray(y0, dtype=float).reshape(1, engine.d - engine.k)
    if engine.k == 1:
        t = _bisect_batch(engine, x0a[:1], y0a, tol)
        return float(t[0])
    T = _damped_batch(engine, x0a[None, :], y0a, tol)
    return T[0]


def H_inverse(engine: SemiConjEngine, x0, y0, tol: float = 1e-10):
    """Torus point z with H(z) = (x0 mod 1, y0 mod 1) within tol."""
    t = solve_fiber_point(engine, x0, y0, tol)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    y = np.mod(np.asarray(y0, dtype=float), 1.0)
    return np.mod(np.concatenate([t, y]), 1.0)


@dataclass(frozen=True)
class FiberGraph:
    x0: float                   # base point (lift of theta0), k = 1
    grid: np.ndarray            # (n, d-1) y-lattice in [0,1)
    values: np.ndarray          # (n,) solved t(y)
    residuals: np.ndarray       # (n,) |Phi_hat((t,y)) - x0|
    monotone_slope: float       # min observed d(Phi_hat)/dt over the graph
    max_adjacent_step: float    # continuity indicator: max |t(y) - t(y')|/h
    periodic_closure: float     # max |t(y) - t(y + e_j)| over boundary pairs
    grid_res: int
    tol: float


def _y_grid(m: int, res: int) -> np.ndarray:
    if m == 0:
        return np.zeros((1, 0))
    axes = [np.arange(res) / res] * m
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in mesh], axis=-1)


def trace_fiber(engine: SemiConjEngine, theta0, grid_res: int,
                tol: float = 1e-10) -> FiberGraph:
    """Solve t(y) over a y-grid so the graph realizes Phi^-1(theta0).

    Records residuals, the minimum observed monotone slope along W, a
    continuity indicator, and the periodic closure over the y-torus (zero
    integer shift in decoupled block coordinates, since the off-core lattice
    directions project to 0 under proj_W).
    """
    _require_expanding(engine)
    if engine.k != 1:
        raise EngineError("certified fiber tracing requires k = 1")
    x0 = float(np.atleast_1d(np.asarray(theta0, dtype=float))[0])
    m = engine.d - engine.k
    Y = _y_grid(m, grid_res)
    n = Y.shape[0]
    x0v = np.full(n, x0)
    t = _bisect_batch(engine, x0v, Y, tol)
    res = np.abs(_phi_line(engine, t, Y) - x0)

    h = 1e-5
    slope = (_phi_line(engine, t + h, Y) - _phi_line(engine, t, Y)) / h
    mono = float(slope.min())

    if m > 0:
        step = 0.0
        cube = t.reshape((grid_res,) * m)
        for ax in range(m):
            diff = np.abs(np.diff(cube, axis=ax))
            if diff.size:
                step = max(step, float(diff.max()) * grid_res)
        # periodic closure: re-solve on the y-faces shifted by one lattice step
        closure = 0.0
        for ax in range(m):
            face = cube.take(0, axis=ax).ravel()
            Yface = Y.reshape((grid_res,) * m + (m,)).take(0, axis=ax)
            Yface = Yface.reshape(-1, m).copy()
            Yface[:, ax] += 1.0
            t_shift = _bisect_batch(engine, np.full(face.shape, x0), Yface, tol,
                                    prescan=False)
            closure = max(closure, float(np.abs(t_shift - face).max()))
    else:
        step = 0.0
        closure = 0.0
    return FiberGraph(x0=x0, grid=Y, values=t, residuals=res,
                      monotone_slope=mono, max_adjacent_step=step,
                      periodic_closure=closure, grid_res=grid_res, tol=tol)


@dataclass(frozen=True)
class SkewReport:
    grid_res: int
    tol: float
    max_base_residual: float
    ceiling: float              # (||A||+1) eps + ||A|| tol + 1e-12
    fiber_map_samples: np.ndarray   # (n, d-k): the induced F_y values
    grid: np.ndarray            # (n, d): the (x, y) grid


def skew_product_residual(engine: SemiConjEngine, grid_res: int,
                          tol: float = 1e-10) -> SkewReport:
    """Max over an (x, y) grid of dist(base of H(F(H^-1(x,y))), A x mod 1)."""
    _require_expanding(engine)
    k, d = engine.k, engine.d
    Xg = semiconj._grid(k, grid_res)
    Yg = _y_grid(d - k, grid_res if d > k else 1)
    nx, ny = Xg.shape[0], Yg.shape[0]
    X = np.repeat(Xg, ny, axis=0)
    Y = np.tile(Yg, (nx, 1))
    if k == 1:
        t = _bisect_batch(engine, X[:, 0], Y, tol)[:, None]
    else:
        t = _damped_batch(engine, X, Y, tol)
    Z = np.mod(np.concatenate([t, Y], axis=1), 1.0)
    FZ = dynamics.eval_torus(engine.spec, Z)
    base = semiconj.phi_torus(engine, FZ).value
    target = np.mod(X @ engine.A.T, 1.0)
    resid = dynamics.torus_distance(base, target)
    nA = float(np.linalg.norm(engine.A, 2))
    ceiling = (nA + 1.0) * engine.eps + nA * tol + 1e-12
    return SkewReport(grid_res=grid_res, tol=tol,
                      max_base_residual=float(resid.max()),
                      ceiling=float(ceiling),
                      fiber_map_samples=FZ[:, k:],
                      grid=np.concatenate([X, Y], axis=1))


@dataclass(frozen=True)
class SmoothnessReport:
    max_slope_diff: float       # max |slope_h - slope_{h/2}| at shared points
    max_slope_coarse: float
    max_slope_fine: float
    certified: bool             # whether an (A4) certificate was supplied


def fiber_smoothness_probe(fiber: FiberGraph, fiber_fine: FiberGraph,
                           certified: bool = False) -> SmoothnessReport:
    """Central-difference slopes of t(y) at the coarse grid points, compared
    across resolutions h and h/2; convergence is the (non-certified)
    differentiability indicator.  `certified` just records whether a
    dominated-cone certificate backs the probe."""
    if fiber_fine.grid_res != 2 * fiber.grid_res:
        raise ValueError("fine fiber must be traced at twice the resolution")
    m = fiber.grid.shape[1]
    if m == 0:
        return SmoothnessReport(0.0, 0.0, 0.0, certified)

    def slopes(fg: FiberGraph):
        r = fg.grid_res
        cube = fg.values.reshape((r,) * m)
        out = []
        for ax in range(m):
            d = (np.roll(cube, -1, axis=ax) - np.roll(cube, 1, axis=ax)) * (r / 2.0)
            out.append(d)
        return np.stack(out)        # (m, r, ..., r)

    s_c = slopes(fiber)
    s_f = slopes(fiber_fine)
    idx = (slice(None),) + (slice(None, None, 2),) * m
    s_f_shared = s_f[idx]
    diff = float(np.abs(s_c - s_f_shared).max())
    return SmoothnessReport(max_slope_diff=diff,
                            max_slope_coarse=float(np.abs(s_c).max()),
                            max_slope_fine=float(np.abs(s_f).max()),
                            certified=certified)


def export_fiber_csv(fiber: FiberGraph, path) -> None:
    m = fiber.grid.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"y_{i+1}" for i in range(m)] + ["t", "residual"])
        for y, t, r in zip(fiber.grid, fiber.values, fiber.residuals):
            w.writerow([f"{v:.17g}" for v in y] + [f"{t:.17g}", f"{r:.6g}"])


def fiber_json_summary(fiber: FiberGraph) -> dict:
    return {
        "x0": fiber.x0,
        "grid_res": fiber.grid_res,
        "n_points": int(fiber.values.shape[0]),
        "max_residual": float(fiber.residuals.max()),
        "tol": fiber.tol,
        "monotone_slope": fiber.monotone_slope,
        "max_adjacent_step": fiber.max_adjacent_step,
        "periodic_closure": fiber.periodic_closure,
    }


def export_skew_csv(report: SkewReport, path) -> None:
    d = report.grid.shape[1]
    m = report.fiber_map_samples.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i+1}" for i in range(d - m)]
                   + [f"y_{i+1}" for i in range(m)]
                   + [f"Fy_{i+1}" for i in range(m)])
        for g, fy in zip(report.grid, report.fiber_map_samples):
            w.writerow([f"{v:.17g}" for v in g] + [f"{v:.17g}" for v in fy])


def skew_json_summary(report: SkewReport) -> str:
    return json.dumps({
        "grid_res": report.grid_res,
        "tol": report.tol,
        "max_base_residual": report.max_base_residual,
        "ceiling": report.ceiling,
        "pass": report.max_base_residual <= report.ceiling,
    }, indent=2)
