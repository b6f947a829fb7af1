import json

import pytest

from torusconj.cli import main

from conftest import FIX_1D, FIX_2D, lehmer_spec_text


@pytest.fixture()
def fix1(tmp_path):
    p = tmp_path / "fix1.map"
    p.write_text(FIX_1D)
    return str(p)


@pytest.fixture()
def fix2(tmp_path):
    p = tmp_path / "fix2.map"
    p.write_text(FIX_2D)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_ok(fix1, capsys):
    code, out, _ = run(capsys, "validate", fix1)
    assert code == 0
    rep = json.loads(out)
    assert rep["schema_version"] == "1"
    assert rep["pass"]
    assert rep["norm_bounds"]["g_sup"] == 0.125


def test_validate_parse_error(tmp_path, capsys):
    p = tmp_path / "bad.map"
    p.write_text("dim=2\nM=[[2,1],[0,1]]\nG[1]=0.1*sin(2*pi*(1.5*z1))\n")
    code, _, err = run(capsys, "validate", str(p))
    assert code == 1
    assert "line 3" in err


def test_validate_empty_file(tmp_path, capsys):
    p = tmp_path / "empty.map"
    p.write_text("")
    code, _, _ = run(capsys, "validate", str(p))
    assert code == 1


def test_validate_missing_file(capsys):
    code, _, _ = run(capsys, "validate", "/nonexistent/x.map")
    assert code == 1


def test_analyze(fix2, capsys):
    code, out, _ = run(capsys, "analyze", fix2)
    assert code == 0
    rep = json.loads(out)
    assert rep["integer_eigenvalues"] == [1, 2]
    b2 = next(b for b in rep["branches"] if b["eigenvalue"] == 2)
    assert b2["A"] == [[2]]
    assert b2["classification"] == "expanding"
    assert b2["tiling_det"] in (1, -1)


def test_analyze_lehmer_exit_2(tmp_path, capsys):
    p = tmp_path / "lehmer.map"
    p.write_text(lehmer_spec_text())
    code, _, err = run(capsys, "analyze", str(p))
    assert code == 2
    assert "no integer eigenvalue" in err


def test_analyze_sublattice_full(tmp_path, capsys):
    p = tmp_path / "cat.map"
    p.write_text("dim=2\nM=[[2,1],[1,1]]\nG[1]=0.02*sin(2*pi*(z1))\n")
    code, out, _ = run(capsys, "analyze", str(p), "--sublattice", "full")
    assert code == 0
    rep = json.loads(out)
    assert rep["sublattice_block"]["k"] == 2
    assert rep["sublattice_block"]["classification"] == "hyperbolic"


def test_verify_semiconj(fix2, capsys):
    code, out, _ = run(capsys, "verify-semiconj", fix2, "--grid", "16",
                       "--trunc", "40")
    assert code == 0
    rep = json.loads(out)
    assert rep["max_residual"] <= rep["ceiling"]


def test_verify_semiconj_linear(tmp_path, capsys):
    p = tmp_path / "lin.map"
    p.write_text("dim=2\nM=[[2,0],[0,1]]\n")
    code, out, _ = run(capsys, "verify-semiconj", str(p), "--grid", "8",
                       "--trunc", "5")
    assert code == 0
    assert json.loads(out)["max_residual"] <= 1e-12


def test_verify_cones_pass(fix2, capsys):
    code, out, _ = run(capsys, "verify-cones", fix2, "--grid", "32")
    assert code == 0
    rep = json.loads(out)
    assert rep["best"]["pass"]


def test_verify_cones_identity_exit_2(tmp_path, capsys):
    p = tmp_path / "ident.map"
    p.write_text("dim=2\nM=[[1,0],[0,1]]\n")
    code, _, _ = run(capsys, "verify-cones", str(p), "--grid", "4",
                     "--sublattice", "full")
    assert code == 2


def test_conjugacy(fix2, capsys, tmp_path):
    out_dir = str(tmp_path / "out")
    code, out, _ = run(capsys, "conjugacy", fix2, "--grid", "8",
                       "--tol", "1e-9", "--trunc", "40", "-o", out_dir)
    assert code == 0
    rep = json.loads(out)
    assert rep["max_base_residual"] <= rep["ceiling"]
    assert (tmp_path / "out" / "skew_grid.csv").exists()
    assert (tmp_path / "out" / "conjugacy.json").exists()


def test_phi_export(fix1, capsys, tmp_path):
    out_dir = str(tmp_path / "o")
    code, out, _ = run(capsys, "phi", fix1, "--grid", "16", "-o", out_dir)
    assert code == 0
    csv = (tmp_path / "o" / "phi_grid.csv").read_text()
    assert csv.startswith("theta_1,phi_1,error_bound")


def test_bad_flags(fix1, capsys):
    assert run(capsys, "validate", fix1, "--grid", "1")[0] == 1
    assert run(capsys, "validate", fix1, "--tol", "0")[0] == 1
    assert run(capsys, "validate", fix1, "--trunc", "0")[0] == 1


def test_deterministic_output(fix2, capsys):
    a = run(capsys, "validate", fix2, "--seed", "7")
    b = run(capsys, "validate", fix2, "--seed", "7")
    assert a == b
