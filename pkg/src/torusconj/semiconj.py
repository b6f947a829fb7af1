"""Truncated-series semi-conjugacy to the linear block map, with certified
tail bounds, for expanding and hyperbolic top-left blocks.

The engine works on a spec already conjugated into block coordinates
(see intlat.block_triangularize + dynamics.change_coordinates).  For k < d
the decoupled form (zero top-right block) is required: only then does the
orthogonal projection onto the first k coordinates intertwine M with A,
which is what the series construction rests on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels, dynamics
from .errors import EngineError
from .intlat import BlockForm
from .specdsl import TorusMapSpec

DEFAULT_EPS_TARGET = 1e-9
MAX_DEFAULT_N = 512


@dataclass(frozen=True)
class PhiValue:
    value: np.ndarray      # (..., k)
    error_bound: float


@dataclass(frozen=True, eq=False)
class SemiConjEngine:
    spec: TorusMapSpec          # in S-coordinates
    block: BlockForm
    mode: str                   # "expanding" | "hyperbolic"
    N: int
    k: int
    d: int
    eps: float                  # certified truncation (+ inversion) bound
    rho: float                  # contraction rate used in the tail
    c_a: float                  # sum_{n>=1} ||A^{-n}|| bound (unstable part)
    norms: dynamics.NormBounds
    A: np.ndarray               # (k, k) float
    # eigen-coordinate data; identity split in expanding mode
    ku: int
    P: np.ndarray               # (k, k): eigen coords -> W coords
    Pinv: np.ndarray
    coef_u: np.ndarray          # (N, ku, k): D_u^{-n} L_u, n = 1..N
    coef_s: np.ndarray          # (N, ks, k): D_s^{n-1} L_s, n = 1..N
    inv_tol: float              # backward-orbit solve tolerance (hyperbolic)


def _geometric_rate(inv_norms: np.ndarray, N: int) -> float:
    """rho = ||B|| if < 1, else the smallest-p root ||B^p||^(1/p) < 1."""
    if inv_norms[1] < 1.0:
        return float(inv_norms[1])
    for p in range(2, N + 1):
        r = inv_norms[p] ** (1.0 / p)
        if r < 1.0:
            return float(r)
    raise EngineError(
        "no power p <= N certifies a contraction rate < 1; "
        "the block is too close to non-expanding (raise N)")


def _power_norms(B: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """(powers, operator 2-norms) of B^n for n = 0..N."""
    k = B.shape[0]
    pows = np.empty((N + 1, k, k))
    pows[0] = np.eye(k)
    for n in range(1, N + 1):
        pows[n] = pows[n - 1] @ B
    norms = np.array([np.linalg.norm(p, 2) for p in pows])
    return pows, norms


def _real_invariant_split(A: np.ndarray):
    """Real bases of the expanding / contracting invariant subspaces of A."""
    lam, V = np.linalg.eig(A)
    cols_u, cols_s = [], []
    used = set()
    for i in range(len(lam)):
        if i in used:
            continue
        used.add(i)
        if abs(lam[i].imag) > 1e-12:
            j = next(j for j in range(len(lam))
                     if j not in used and abs(lam[j] - lam[i].conjugate()) < 1e-8)
            used.add(j)
            vecs = [V[:, i].real, V[:, i].imag]
        else:
            vecs = [V[:, i].real]
        (cols_u if abs(lam[i]) > 1 else cols_s).extend(vecs)
    if not cols_u or not cols_s:
        raise EngineError("hyperbolic split is degenerate; use expanding mode")
    P = np.column_stack(cols_u + cols_s)
    if np.linalg.cond(P) > 1e8:
        raise EngineError("eigenbasis of A is too ill-conditioned to split")
    return P, len(cols_u)


def build_engine(spec: TorusMapSpec, block: BlockForm, N: int | None = None,
                 eps_target: float = DEFAULT_EPS_TARGET) -> SemiConjEngine:
    """Precompute block powers and the certified tail bound.

    The tail closes the computed norms ||A_u^{-n}||, n <= N, with the
    geometric estimate ||A_u^{-N}|| * rho / (1 - rho); in hyperbolic mode a
    symmetric stable-side term and a backward-orbit inversion budget are
    added.  With N=None the smallest N meeting eps_target is chosen
    (requires rho <= 0.9).
    """
    if block.classification == "neither":
        raise EngineError("top-left block is neither expanding nor hyperbolic")
    k, d = block.k, spec.d
    if k < d and not block.decoupled:
        raise EngineError(
            "block form is coupled (nonzero top-right block); the series "
            "semi-conjugacy needs the decoupled form for k < d")
    nb = dynamics.norm_bounds(spec)
    A = block.A_array()
    mode = block.classification

    if mode == "expanding":
        P = np.eye(k)
        ku = k
        Du = Ds = None
    else:
        P, ku = _real_invariant_split(A)
        B = np.linalg.inv(P) @ A @ P
        Du = B[:ku, :ku]
        Ds = B[ku:, ku:]

    def assemble(Ncur: int):
        if mode == "expanding":
            Pinv = np.eye(k)
            upows, unorms = _power_norms(np.linalg.inv(A), Ncur)
            rho = _geometric_rate(unorms, Ncur)
            tail_u = unorms[Ncur] * rho / (1.0 - rho)
            eps_series = nb.g_sup * tail_u
            c_a = float(unorms[1:].sum() + tail_u)
            coef_u = upows[1:]                      # A^{-n}, L = I
            coef_s = np.zeros((Ncur, 0, k))
            return Pinv, coef_u, coef_s, eps_series, rho, c_a, 0.0, ku
        Pinv = np.linalg.inv(P)
        Lu, Ls = Pinv[:ku], Pinv[ku:]
        upows, unorms = _power_norms(np.linalg.inv(Du), Ncur)
        spows, snorms = _power_norms(Ds, Ncur)
        rho_u = _geometric_rate(unorms, Ncur)
        rho_s = _geometric_rate(snorms, Ncur)
        tail_u = unorms[Ncur] * rho_u / (1.0 - rho_u)
        tail_s = snorms[Ncur] / (1.0 - rho_s)       # sum_{m >= N} ||D_s^m||
        nP = np.linalg.norm(P, 2)
        eps_series = nb.g_sup * nP * (np.linalg.norm(Lu, 2) * tail_u
                                      + np.linalg.norm(Ls, 2) * tail_s)
        c_a = float(unorms[1:].sum() + tail_u)
        coef_u = np.einsum("nab,bk->nak", upows[1:], Lu)
        coef_s = np.einsum("nab,bk->nak", spows[:Ncur], Ls)
        return Pinv, coef_u, coef_s, eps_series, rho_u, c_a, _inv_budget_unit(
            spec, nb, snorms, Ncur, nP, np.linalg.norm(Ls, 2)), ku

    if N is None:
        N = 1
        while True:
            try:
                out = assemble(N)
            except EngineError:
                out = None
            if out is not None:
                eps_series, rho = out[3], out[4]
                if rho > 0.9:
                    raise EngineError(
                        f"contraction rate rho = {rho:.3f} > 0.9; pass N explicitly")
                if eps_series < eps_target:
                    break
            if N >= MAX_DEFAULT_N:
                raise EngineError("no default N meets the error target; pass N")
            N = min(2 * N, MAX_DEFAULT_N)
    Pinv, coef_u, coef_s, eps_series, rho, c_a, inv_unit, ku_ = assemble(N)

    inv_tol = 0.0
    eps = eps_series
    if mode == "hyperbolic":
        if inv_unit > 0:
            inv_tol = max(1e-15, (eps_series / 10.0) / inv_unit)
            eps = eps_series + inv_unit * inv_tol
    return SemiConjEngine(
        spec=spec, block=block, mode=mode, N=N, k=k, d=d, eps=float(eps),
        rho=float(rho), c_a=c_a, norms=nb, A=A, ku=ku_, P=P, Pinv=Pinv,
        coef_u=coef_u, coef_s=coef_s, inv_tol=float(inv_tol))


def _inv_budget_unit(spec, nb, snorms, N, nP, nLs):
    """Certified amplification of a unit backward-solve residual into the
    stable series: sum_n ||D_s^{n-1}|| * Lip(G) * sum_{j<=n} L_inv^j, where
    L_inv bounds the Lipschitz constant of the inverse lift."""
    rho_c = dynamics.contraction_rate(spec)
    if rho_c >= 1.0:
        raise EngineError("hyperbolic mode needs an invertible lift "
                          "(||M^-1||*Lip(G) < 1)")
    Minv_norm = float(np.linalg.norm(np.linalg.inv(dynamics.M_array(spec)), 2))
    L_inv = Minv_norm / (1.0 - rho_c)
    total = 0.0
    acc = 0.0
    for n in range(1, N + 1):
        acc = acc * L_inv + L_inv
        total += snorms[n - 1] * nb.g_lip * acc
    return nP * nLs * (total + 1.0)


def _forward_g_values(engine: SemiConjEngine, Z: np.ndarray) -> np.ndarray:
    ta = dynamics.term_arrays(engine.spec)
    Mf = dynamics.M_array(engine.spec)
    theta0 = np.mod(Z, 1.0)
    return _kernels.orbit_g_values(theta0, Mf, ta.comps, ta.coefs, ta.kinds,
                                   ta.freqs, engine.N)


def _backward_g_values(engine: SemiConjEngine, Z: np.ndarray) -> np.ndarray:
    """G at the backward torus orbit points F^{-1}..F^{-N} of Z."""
    theta = np.mod(Z, 1.0)
    out = np.empty((engine.N, Z.shape[0], engine.d))
    for n in range(engine.N):
        theta = np.mod(dynamics.invert_lift(engine.spec, theta,
                                            tol=engine.inv_tol), 1.0)
        out[n] = dynamics.eval_G(engine.spec, theta)
    return out


def phi_hat(engine: SemiConjEngine, z) -> PhiValue:
    """Lift of the semi-conjugacy at z (point (d,) or batch (..., d))."""
    Z = np.asarray(z, dtype=float)
    single = Z.ndim == 1
    Zb = Z.reshape(-1, engine.d)
    k = engine.k
    gs = _forward_g_values(engine, Zb)[:, :, :k]          # (N, n, k)
    u = Zb[:, :k] @ engine.Pinv[:engine.ku].T
    u += np.einsum("tnj,taj->na", gs, engine.coef_u)
    if engine.mode == "hyperbolic":
        gs_b = _backward_g_values(engine, Zb)[:, :, :k]
        s = Zb[:, :k] @ engine.Pinv[engine.ku:].T
        s -= np.einsum("tnj,taj->na", gs_b, engine.coef_s)
        val = np.hstack([u, s]) @ engine.P.T
    else:
        val = u
    if single:
        val = val[0]
    else:
        val = val.reshape(Z.shape[:-1] + (k,))
    return PhiValue(value=val, error_bound=engine.eps)


def phi_torus(engine: SemiConjEngine, theta) -> PhiValue:
    """Torus-valued semi-conjugacy: phi_hat of any lift, mod 1."""
    pv = phi_hat(engine, theta)
    return PhiValue(value=np.mod(pv.value, 1.0), error_bound=pv.error_bound)


def _grid(d: int, res: int) -> np.ndarray:
    axes = [np.arange(res) / res] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    argmax_point: np.ndarray
    ceiling: float              # (||A|| + 1) * eps_N
    grid_res: int


def semiconjugacy_residual(engine: SemiConjEngine, grid_res: int) -> ResidualReport:
    """Max over a uniform torus grid of dist(Phi(F(theta)), A Phi(theta))."""
    theta = _grid(engine.d, grid_res)
    ftheta = dynamics.eval_torus(engine.spec, theta)
    lhs = phi_torus(engine, ftheta).value
    rhs = np.mod(phi_torus(engine, theta).value @ engine.A.T, 1.0)
    res = dynamics.torus_distance(lhs, rhs)
    i = int(np.argmax(res))
    ceiling = (np.linalg.norm(engine.A, 2) + 1.0) * engine.eps
    return ResidualReport(max_residual=float(res[i]), argmax_point=theta[i],
                          ceiling=float(ceiling), grid_res=grid_res)


def periodicity_check(engine: SemiConjEngine, z, mvec) -> float:
    """Deviation ||phi_hat(z + m) - phi_hat(z) - proj_W m||; <= 2 eps_N."""
    z = np.asarray(z, dtype=float)
    m = np.asarray(mvec, dtype=float)
    a = phi_hat(engine, z + m).value
    b = phi_hat(engine, z).value
    return float(np.linalg.norm(a - b - m[:engine.k]))


@dataclass(frozen=True)
class FiberBoundReport:
    c_bound: float              # C_A * ||G||_0
    max_center_dev: float       # worst |phi_hat(z) - proj_W z|
    max_pair_slack: float       # worst reverse-Lipschitz slack
    n_points: int
    ok: bool


def fiber_bound_checks(engine: SemiConjEngine, n_pairs: int = 1000,
                       seed: int = 0, box: float = 3.0) -> FiberBoundReport:
    """Check the displacement and reverse-Lipschitz consequences of the
    series bound on sampled points/pairs (expanding mode)."""
    if engine.mode != "expanding":
        raise EngineError("fiber bounds are checked in expanding mode only")
    rng = np.random.default_rng(seed)
    Z1 = rng.uniform(-box, box, size=(n_pairs, engine.d))
    Z2 = rng.uniform(-box, box, size=(n_pairs, engine.d))
    c = engine.c_a * engine.norms.g_sup
    p1 = phi_hat(engine, Z1).value
    p2 = phi_hat(engine, Z2).value
    dev1 = np.linalg.norm(p1 - Z1[:, :engine.k], axis=1)
    dev2 = np.linalg.norm(p2 - Z2[:, :engine.k], axis=1)
    pair = np.abs(np.linalg.norm(p1 - p2, axis=1)
                  - np.linalg.norm(Z1[:, :engine.k] - Z2[:, :engine.k], axis=1))
    max_dev = float(max(dev1.max(), dev2.max()))
    max_pair = float(pair.max())
    ok = (max_dev <= c + engine.eps + 1e-12
          and max_pair <= 2 * c + 2 * engine.eps + 1e-12)
    return FiberBoundReport(c_bound=float(c), max_center_dev=max_dev,
                            max_pair_slack=max_pair, n_points=n_pairs, ok=ok)


def export_phi_grid(engine: SemiConjEngine, grid_res: int, path) -> None:
    """CSV with columns theta_1..theta_d, phi_1..phi_k, error_bound."""
    theta = _grid(engine.d, grid_res)
    pv = phi_torus(engine, theta)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"theta_{i+1}" for i in range(engine.d)]
                   + [f"phi_{i+1}" for i in range(engine.k)] + ["error_bound"])
        for row, val in zip(theta, pv.value):
            w.writerow([f"{x:.17g}" for x in row]
                       + [f"{x:.17g}" for x in val] + [f"{pv.error_bound:.6g}"])
