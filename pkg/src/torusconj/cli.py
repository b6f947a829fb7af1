"""Command-line harness: validate / analyze / phi / verify-semiconj /
verify-cones / conjugacy, with JSON reports and CSV grid exports.

Exit codes: 0 = all checks pass, 1 = operational error (bad input, engine
failure), 2 = a verification verdict failed (including "no integer
eigenvalue" in analyze).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import cones, conjmap, dynamics, intlat, semiconj
from .errors import TorusConjError
from .specdsl import parse_spec, serialize_spec

SCHEMA_VERSION = "1"
DEFAULT_ALPHAS = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]


def _load_spec(path: str):
    with open(path, "r") as fh:
        return parse_spec(fh.read())


def _emit(report: dict, args) -> None:
    report["schema_version"] = SCHEMA_VERSION
    text = json.dumps(report, indent=2, default=_jsonable)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{report['command']}.json"), "w") as fh:
            fh.write(text + "\n")
    print(text)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not JSON-serializable: {type(x)}")


def _read_sublattice(arg: str, d: int):
    """--sublattice is either 'full' (k = d, identity basis) or a file
    holding a JSON list of integer basis vectors."""
    if arg == "full":
        return intlat.identity(d)
    with open(arg, "r") as fh:
        vecs = json.loads(fh.read())
    return [[int(x) for x in v] for v in vecs]


def _pick_block(spec, args) -> intlat.BlockForm:
    if args.sublattice:
        B = _read_sublattice(args.sublattice, spec.d)
        return intlat.block_triangularize(spec.M_list(), B)
    eigs = intlat.integer_eigenvalues(spec.M_list())
    eigs = [m for m in eigs if abs(m) > 1]
    if not eigs:
        raise _Verdict(2, "no integer eigenvalue of magnitude > 1 and no "
                          "--sublattice given; the winding matrix admits no "
                          "rank-1 invariant sublattice (irreducibility "
                          "obstruction)")
    m = max(eigs, key=abs)
    line = intlat.derive_invariant_line(spec.M_list(), m)
    return intlat.block_triangularize(spec.M_list(), [line])


def _engine(spec, args):
    block = _pick_block(spec, args)
    spec_S = dynamics.change_coordinates(spec, block.S_list())
    return semiconj.build_engine(spec_S, block, N=args.trunc), block, spec_S


class _Verdict(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> dict:
    spec = _load_spec(args.spec)
    nb = dynamics.norm_bounds(spec)
    rng = np.random.default_rng(args.seed)
    z = rng.uniform(-2, 2, size=(10, spec.d))
    m = rng.integers(-3, 4, size=(10, spec.d)).astype(float)
    Mf = dynamics.M_array(spec)
    dev = np.abs(dynamics.eval_lift(spec, z + m)
                 - dynamics.eval_lift(spec, z) - m @ Mf.T).max()
    return {
        "command": "validate",
        "dim": spec.d,
        "n_terms": len(spec.terms),
        "canonical": serialize_spec(spec),
        "norm_bounds": {"g_sup": nb.g_sup, "g_lip": nb.g_lip, "dg_lip": nb.dg_lip},
        "equivariance_max_deviation": float(dev),
        "pass": bool(dev < 1e-9),
    }


def cmd_analyze(args) -> dict:
    spec = _load_spec(args.spec)
    M = spec.M_list()
    eigs = intlat.integer_eigenvalues(M)
    branches = []
    for m in eigs:
        v = intlat.left_eigenvector_integer(M, m)
        tp = intlat.tiling_parallelotope(v)
        line = intlat.derive_invariant_line(M, m)
        bf = intlat.block_triangularize(M, [line])
        branches.append({
            "eigenvalue": m,
            "left_eigenvector": v,
            "tiling_columns": tp.columns(),
            "tiling_det": intlat.det_int([list(r) for r in tp.W]),
            "invariant_line": line,
            "S": bf.S_list(),
            "A": [list(r) for r in bf.A],
            "classification": bf.classification,
            "decoupled": bf.decoupled,
        })
    report = {
        "command": "analyze",
        "dim": spec.d,
        "char_poly": intlat.char_poly(M),
        "integer_eigenvalues": eigs,
        "branches": branches,
    }
    if args.sublattice:
        B = _read_sublattice(args.sublattice, spec.d)
        bf = intlat.block_triangularize(M, B)
        report["sublattice_block"] = {
            "k": bf.k, "S": bf.S_list(), "A": [list(r) for r in bf.A],
            "classification": bf.classification, "decoupled": bf.decoupled,
        }
    elif not eigs:
        raise _Verdict(2, "no integer eigenvalue (characteristic polynomial "
                          "has no integer root) and no --sublattice given")
    return report


def cmd_phi(args) -> dict:
    spec = _load_spec(args.spec)
    engine, block, _ = _engine(spec, args)
    report = {
        "command": "phi",
        "mode": engine.mode,
        "k": engine.k,
        "N": engine.N,
        "error_bound": engine.eps,
        "grid_res": args.grid,
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "phi_grid.csv")
        semiconj.export_phi_grid(engine, args.grid, path)
        report["csv"] = path
    else:
        theta = semiconj._grid(engine.d, min(args.grid, 8))
        pv = semiconj.phi_torus(engine, theta)
        report["sample"] = {"theta": theta, "phi": pv.value}
    return report


def cmd_verify_semiconj(args) -> dict:
    spec = _load_spec(args.spec)
    engine, block, _ = _engine(spec, args)
    rr = semiconj.semiconjugacy_residual(engine, args.grid)
    ok = rr.max_residual <= rr.ceiling
    report = {
        "command": "verify-semiconj",
        "mode": engine.mode,
        "N": engine.N,
        "error_bound": engine.eps,
        "grid_res": rr.grid_res,
        "max_residual": rr.max_residual,
        "ceiling": rr.ceiling,
        "argmax_point": rr.argmax_point,
        "pass": bool(ok),
    }
    if not ok:
        raise _Verdict(2, json.dumps(report, default=_jsonable))
    return report


def cmd_verify_cones(args) -> dict:
    spec = _load_spec(args.spec)
    block = _pick_block(spec, args)
    spec_S = dynamics.change_coordinates(spec, block.S_list())
    alphas = args.alpha or DEFAULT_ALPHAS
    results = []
    best = None
    for alpha in alphas:
        K = args.K if args.K is not None else 1.0 + 1e-9
        params = cones.ConeParams(k=block.k, alpha=alpha, K=K)
        cert = cones.verify_A2(spec_S, params, args.grid)
        entry = {
            "alpha": alpha,
            "K": K,
            "expansion_factor": cert.expansion_factor,
            "invariance_margin": cert.invariance_margin,
            "expansion_margin": cert.expansion_margin,
            "padding": cert.padding,
            "pass": cert.a2_pass,
        }
        results.append(entry)
        if cert.a2_pass and (best is None
                             or cert.expansion_margin > best["expansion_margin"]):
            best = entry
    report = {
        "command": "verify-cones",
        "k": block.k,
        "grid_res": args.grid,
        "alphas": results,
        "best": best,
        "pass": best is not None,
    }
    if best is None:
        raise _Verdict(2, json.dumps(report, default=_jsonable))
    return report


def cmd_conjugacy(args) -> dict:
    spec = _load_spec(args.spec)
    engine, block, _ = _engine(spec, args)
    sr = conjmap.skew_product_residual(engine, args.grid, tol=args.tol)
    rng = np.random.default_rng(args.seed)
    z = rng.uniform(0, 1, size=(50, engine.d))
    x, y = conjmap.H_forward(engine, z)
    rt = max(
        dynamics.torus_distance(
            conjmap.H_inverse(engine, x[i], y[i], tol=args.tol), z[i])
        for i in range(len(z)))
    ok = sr.max_base_residual <= sr.ceiling
    report = {
        "command": "conjugacy",
        "N": engine.N,
        "grid_res": sr.grid_res,
        "tol": args.tol,
        "max_base_residual": sr.max_base_residual,
        "ceiling": sr.ceiling,
        "round_trip_max": float(rt),
        "pass": bool(ok),
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "skew_grid.csv")
        conjmap.export_skew_csv(sr, path)
        report["csv"] = path
    if not ok:
        raise _Verdict(2, json.dumps(report, default=_jsonable))
    return report


# ---------------------------------------------------------------- plumbing

def _alpha_list(text: str):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}")
    if not vals or any(a <= 0 for a in vals):
        raise argparse.ArgumentTypeError("alphas must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="torusconj",
                                description="certified torus-map analysis")
    sub = p.add_subparsers(dest="command", required=True)
    commands = {
        "validate": cmd_validate,
        "analyze": cmd_analyze,
        "phi": cmd_phi,
        "verify-semiconj": cmd_verify_semiconj,
        "verify-cones": cmd_verify_cones,
        "conjugacy": cmd_conjugacy,
    }
    for name, fn in commands.items():
        sp = sub.add_parser(name)
        sp.add_argument("spec", help="map spec file")
        sp.add_argument("--trunc", type=int, default=None, metavar="N",
                        help="series truncation order (default: auto)")
        sp.add_argument("--grid", type=int, default=64, metavar="R",
                        help="grid resolution per axis")
        sp.add_argument("--alpha", type=_alpha_list, default=None,
                        metavar="LIST", help="comma-separated cone openings")
        sp.add_argument("--K", type=float, default=None,
                        help="required expansion constant")
        sp.add_argument("--tol", type=float, default=1e-10,
                        help="fiber solver tolerance")
        sp.add_argument("--sublattice", default=None, metavar="FILE|full",
                        help="invariant sublattice basis (JSON file) or 'full'")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=("csv", "json"), default="json")
        sp.add_argument("-o", "--out", default=None, metavar="DIR")
        sp.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.grid < 2:
        print("grid resolution must be >= 2", file=sys.stderr)
        return 1
    if args.tol <= 0:
        print("tolerance must be positive", file=sys.stderr)
        return 1
    if args.trunc is not None and args.trunc < 1:
        print("truncation order must be >= 1", file=sys.stderr)
        return 1
    try:
        report = args.fn(args)
    except _Verdict as v:
        print(str(v), file=sys.stderr)
        return v.code
    except (TorusConjError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    _emit(report, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
