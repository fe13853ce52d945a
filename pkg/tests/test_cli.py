import json
import os
import subprocess
import sys

import numpy as np
import pytest

from irrmps.cli import main
from irrmps.mps_core import MpsTensor, load_tensor, save_tensor
from irrmps.named import HADAMARD, PAULI, aklt, antiferromagnet, ghz, random_invertible

import oracles


@pytest.fixture
def corpus(tmp_path):
    """Named tensors and unitaries written as JSON files."""
    files = {}
    for name, A in [
        ("ghz", ghz()),
        ("ghz_swapped", MpsTensor(ghz().mats[::-1])),
        ("af", antiferromagnet()),
        ("af_neg", antiferromagnet().scaled(-1)),
        ("aklt", aklt()),
        ("zero", MpsTensor(np.zeros((2, 2, 2)))),
    ]:
        path = tmp_path / f"{name}.json"
        save_tensor(A, path)
        files[name] = str(path)
    for name, u in [("X", PAULI[0]), ("H", HADAMARD)]:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps({"u": [[[z.real, z.imag] for z in row] for row in u]}))
        files[name] = str(path)
    return files


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def witness_file(tmp_path, p, W, name="w.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"p": p, "W": [[[complex(z).real, complex(z).imag] for z in row] for row in W]}))
    return str(path)


# -- canonicalize -------------------------------------------------------------------------

def test_canonicalize_ghz(corpus, capsys):
    code, out, _ = run(["canonicalize", corpus["ghz"]], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["decomposition"]["periods"] == [1, 1]
    assert len(doc["decomposition"]["blocks"]) == 2


def test_canonicalize_antiferromagnet(corpus, capsys):
    code, out, _ = run(["canonicalize", corpus["af"]], capsys)
    doc = json.loads(out)["decomposition"]
    assert code == 0
    assert doc["periods"] == [2]
    (blk,) = doc["blocks"]
    assert len(blk["multiplicities"]) == 1
    assert np.isclose(abs(complex(*blk["multiplicities"][0])), 1)


def test_canonicalize_zero_tensor(corpus, capsys):
    code, _, err = run(["canonicalize", corpus["zero"]], capsys)
    assert code == 3
    assert "ZeroTensor" in err


def test_canonicalize_text_format(corpus, capsys):
    code, out, _ = run(["canonicalize", corpus["aklt"], "--format", "text"], capsys)
    assert code == 0
    assert not out.lstrip().startswith("{")


def test_canonicalize_round_trip_through_compare(corpus, tmp_path, capsys):
    code, out, _ = run(["canonicalize", corpus["af"]], capsys)
    blocks = json.loads(out)["decomposition"]["blocks"]
    # rebuild the assembled tensor from the report
    mats = []
    for blk in blocks:
        T = load_tensor_doc(blk["tensor"])
        for mu in blk["multiplicities"]:
            mats.append(complex(*mu) * T)
    D = sum(m.shape[1] for m in mats)
    A = np.zeros((mats[0].shape[0], D, D), dtype=complex)
    o = 0
    for m in mats:
        A[:, o : o + m.shape[1], o : o + m.shape[1]] = m
        o += m.shape[1]
    path = tmp_path / "asm.json"
    save_tensor(MpsTensor(A), path)
    code, out, _ = run(["compare", corpus["af"], str(path)], capsys)
    assert code == 0 and json.loads(out)["verdict"] == "match"


def load_tensor_doc(doc):
    from irrmps.mps_core import tensor_from_json

    return np.array(tensor_from_json(doc).mats)


# -- compare -----------------------------------------------------------------------------------

def test_compare_ghz_permuted(corpus, capsys):
    code, out, _ = run(["compare", corpus["ghz"], corpus["ghz_swapped"]], capsys)
    assert code == 0
    assert json.loads(out)["verdict"] == "match"


def test_compare_antiferromagnet_negated(corpus, capsys):
    code, out, _ = run(["compare", corpus["af"], corpus["af_neg"], "--mode", "equal"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert np.allclose([complex(*z) for z in doc["Z_diagonal"]], -1)
    assert doc["verified_N"] == list(range(1, 9))


def test_compare_ghz_vs_antiferromagnet(corpus, capsys):
    for mode in ("equal", "proportional"):
        code, out, _ = run(["compare", corpus["ghz"], corpus["af"], "--mode", mode], capsys)
        doc = json.loads(out)
        assert code == 4
        assert doc["verdict"] == "no-match" and doc["stage"] == "basis"


def test_compare_multiplicity_stage(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_tensor(aklt(), a)
    save_tensor(aklt().scaled(1j), b)
    code, out, _ = run(["compare", str(a), str(b)], capsys)
    assert code == 4 and json.loads(out)["stage"] == "multiplicity"


def test_compare_physical_dimension_mismatch(corpus, capsys):
    code, _, err = run(["compare", corpus["ghz"], corpus["aklt"]], capsys)
    assert code == 2 and "DimensionMismatch" in err


def test_compare_witness_in_input_basis(tmp_path, capsys):
    rng = np.random.default_rng(3)
    A = aklt()
    Y0 = random_invertible(rng, 2, 20)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_tensor(A, a)
    save_tensor(A.conjugated_by(Y0), b)
    code, out, _ = run(["compare", str(a), str(b)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["lifted"]
    Z = np.array([[complex(*z) for z in row] for row in doc["Z_input_basis"]])
    Y = np.array([[complex(*z) for z in row] for row in doc["Y_input_basis"]])
    B = A.conjugated_by(Y0).mats
    assert np.allclose(Z @ A.mats, Y @ B @ np.linalg.inv(Y), atol=1e-8)


# -- block ----------------------------------------------------------------------------------------

def test_block_ghz(corpus, tmp_path, capsys):
    out_path = tmp_path / "g2.json"
    code, _, _ = run(["block", corpus["ghz"], "--p", "2", "--out", str(out_path)], capsys)
    assert code == 0
    T = load_tensor(out_path)
    assert T.d == 4 and T.D == 2
    assert np.allclose(T.mats, oracles.blocked(ghz().mats, 2))


def test_block_requires_p(corpus, capsys):
    code, _, err = run(["block", corpus["ghz"]], capsys)
    assert code == 2


def test_block_budget(corpus, capsys):
    code, _, err = run(["block", corpus["ghz"], "--p", "10", "--budget", "100"], capsys)
    assert code == 2 and "BudgetExceeded" in err


# -- refine ---------------------------------------------------------------------------------------

def test_refine_check_passes(corpus, tmp_path, capsys):
    W = np.zeros((4, 2))
    W[0, 0] = W[3, 1] = 1
    code, out, _ = run(["refine", "check", corpus["ghz"], corpus["ghz"], "--witness", witness_file(tmp_path, 2, W)], capsys)
    assert code == 0 and json.loads(out)["passed"]


def test_refine_check_wrong_witness(corpus, tmp_path, capsys):
    W = np.zeros((4, 2))
    W[1, 0] = W[2, 1] = 1
    # flip witness maps GHZ onto AF, not onto GHZ
    code, out, _ = run(["refine", "check", corpus["ghz"], corpus["ghz"], "--witness", witness_file(tmp_path, 2, W)], capsys)
    assert code == 4 and not json.loads(out)["passed"]


def test_refine_construct_both_directions(corpus, tmp_path, capsys):
    code, out, _ = run(["refine", "construct", corpus["ghz"], corpus["ghz"], "--p", "2"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["direction"] == "refinement" and doc["passed"]
    W = np.array([[complex(*z) for z in row] for row in doc["W"]])
    code, out, _ = run(["refine", "construct", corpus["ghz"], corpus["ghz"], "--witness", witness_file(tmp_path, 2, W)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["direction"] == "divisibility"
    assert doc["residuals"]["power"] <= 1e-8


def test_refine_construct_antiferromagnet(corpus, tmp_path, capsys):
    W = np.zeros((4, 2))
    W[1, 0] = W[2, 1] = 1
    code, out, _ = run(["refine", "construct", corpus["ghz"], corpus["af"], "--witness", witness_file(tmp_path, 2, W)], capsys)
    assert code == 0
    root = load_tensor_doc(json.loads(out)["root_tensor"])
    E = oracles.transfer_matrix(root)
    assert np.allclose(E @ E, oracles.transfer_matrix(ghz().mats), atol=1e-8)


def test_refine_construct_not_a_witness(corpus, capsys):
    code, _, _ = run(["refine", "construct", corpus["ghz"], corpus["af"], "--p", "1"], capsys)
    assert code == 4


def test_refine_witness_must_be_isometry(corpus, tmp_path, capsys):
    code, _, err = run(["refine", "check", corpus["ghz"], corpus["ghz"], "--witness", witness_file(tmp_path, 2, np.ones((4, 2)))], capsys)
    assert code == 2 and "isometry" in err


# -- symmetry ----------------------------------------------------------------------------------------

def test_symmetry_ghz_bit_flip(corpus, capsys):
    code, out, _ = run(["symmetry", corpus["ghz"], corpus["X"]], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "symmetry"
    assert doc["residuals"]["relation"] <= 1e-8


def test_symmetry_ghz_hadamard_rejected(corpus, capsys):
    code, out, _ = run(["symmetry", corpus["ghz"], corpus["H"]], capsys)
    assert code == 4 and json.loads(out)["verdict"] == "not-a-symmetry"


# -- input errors and configuration -----------------------------------------------------------------

def test_malformed_json_reports_position(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"d": 2,\n  "D": 1,\n  "matrices": [\n}')
    code, _, err = run(["canonicalize", str(path)], capsys)
    assert code == 2
    assert f"{path}:4:1" in err


def test_invalid_tensor_document(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"d": 2, "D": 1, "matrices": [[[[1, 0]]]]}))
    code, _, err = run(["canonicalize", str(path)], capsys)
    assert code == 2 and "ValidationError" in err


def test_missing_file(tmp_path, capsys):
    code, _, _ = run(["canonicalize", str(tmp_path / "nope.json")], capsys)
    assert code == 2


def test_bad_flags(corpus, capsys):
    assert run(["canonicalize", corpus["ghz"], "--tol", "state"], capsys)[0] == 2
    assert run(["canonicalize", corpus["ghz"], "--tol", "nonsense=1e-3"], capsys)[0] == 2
    assert run(["canonicalize", corpus["ghz"], "--tol", "state=2"], capsys)[0] == 2
    assert run(["canonicalize", corpus["ghz"], "--n-check", "0"], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2


def test_tolerance_override_changes_verdict(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_tensor(aklt(), a)
    save_tensor(aklt().scaled(1 + 1e-6), b)
    assert run(["compare", str(a), str(b)], capsys)[0] == 4
    code, _, _ = run(["compare", str(a), str(b), "--tol", "mult=1e-4", "--tol", "state=1e-4", "--tol", "relation=1e-4"], capsys)
    assert code == 0


def test_config_from_environment(corpus, tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_check": 3, "format": "json"}))
    monkeypatch.setenv("IRRMPS_CONFIG", str(cfg))
    code, out, _ = run(["compare", corpus["ghz"], corpus["ghz_swapped"]], capsys)
    assert code == 0 and json.loads(out)["verified_N"] == [1, 2, 3]
    # flags win over the file
    code, out, _ = run(["compare", corpus["ghz"], corpus["ghz_swapped"], "--n-check", "5"], capsys)
    assert json.loads(out)["verified_N"] == [1, 2, 3, 4, 5]


def test_config_file_malformed(corpus, tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2")
    monkeypatch.setenv("IRRMPS_CONFIG", str(cfg))
    assert run(["canonicalize", corpus["ghz"]], capsys)[0] == 2


# -- determinism -------------------------------------------------------------------------------------

def _cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "irrmps", *args], capture_output=True, cwd=cwd, env=dict(os.environ))


@pytest.mark.parametrize(
    "args",
    [
        ["canonicalize", "{ghz}"],
        ["canonicalize", "{af}"],
        ["canonicalize", "{aklt}"],
        ["compare", "{ghz}", "{ghz_swapped}"],
        ["compare", "{af}", "{af_neg}"],
        ["symmetry", "{af}", "{X}"],
        ["block", "{aklt}", "--p", "2"],
    ],
)
def test_reports_are_byte_identical(args, corpus, tmp_path):
    argv = [a.format(**corpus) for a in args]
    first, second = _cli(argv, tmp_path), _cli(argv, tmp_path)
    assert first.returncode == 0
    assert first.stdout == second.stdout
    assert b"-0.0," not in first.stdout
