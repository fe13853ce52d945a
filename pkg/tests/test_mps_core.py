import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irrmps.errors import BudgetExceeded, DimensionMismatch, ValidationError
from irrmps.mps_core import (
    MpsTensor,
    block,
    contract_state,
    load_tensor,
    overlap,
    save_tensor,
    tensor_from_json,
    tensor_to_json,
    transfer,
)
from irrmps.named import aklt, antiferromagnet, ghz, product_state, random_tensor

import oracles


def _random(seed, d, D):
    return random_tensor(np.random.default_rng(seed), d, D)


# -- construction ----------------------------------------------------------------

def test_tensor_rejects_bad_shapes():
    with pytest.raises(ValidationError):
        MpsTensor(np.zeros((2, 2, 3)))
    with pytest.raises(ValidationError):
        MpsTensor(np.zeros((0, 2, 2)))
    with pytest.raises(ValidationError):
        MpsTensor(np.full((1, 1, 1), np.nan))


def test_tensor_is_read_only():
    A = ghz()
    with pytest.raises(ValueError):
        A.mats[0, 0, 0] = 5


# -- contract_state ------------------------------------------------------------

def test_product_state_amplitudes():
    v = contract_state(product_state((1.0, 0.0)), 3).amplitudes
    expected = np.zeros(8)
    expected[0] = 1
    assert np.array_equal(v, expected)


def test_ghz_two_sites():
    v = contract_state(ghz(), 2).amplitudes
    assert np.allclose(v, [1, 0, 0, 1])


def test_antiferromagnet_amplitudes():
    assert np.allclose(contract_state(antiferromagnet(), 3).amplitudes, 0)
    assert np.allclose(contract_state(antiferromagnet(), 2).amplitudes, [0, 1, 1, 0])


def test_contract_state_matches_word_oracle(rng):
    A = random_tensor(rng, 3, 3)
    for N in range(1, 6):
        assert np.allclose(contract_state(A, N).amplitudes, oracles.amplitudes(A.mats, N), atol=1e-10)


def test_budget_is_enforced():
    with pytest.raises(BudgetExceeded):
        contract_state(ghz(), 25)
    with pytest.raises(BudgetExceeded):
        contract_state(ghz(), 5, budget=16)
    with pytest.raises(BudgetExceeded):
        block(ghz(), 5, budget=16)
    contract_state(ghz(), 4, budget=16)


def test_state_vector_shape():
    v = contract_state(aklt(), 3)
    assert v.as_tensor().shape == (3, 3, 3)
    assert v.N == 3 and v.d == 3


# -- block ----------------------------------------------------------------------

def test_block_identity_case(rng):
    A = random_tensor(rng, 2, 3)
    assert block(A, 1).allclose(A, atol=0)


def test_block_ghz():
    B = block(ghz(), 2).mats
    assert np.allclose(B[0], np.diag([1, 0]))
    assert np.allclose(B[1], 0) and np.allclose(B[2], 0)
    assert np.allclose(B[3], np.diag([0, 1]))


def test_block_antiferromagnet():
    B = block(antiferromagnet(), 2).mats
    assert np.allclose(B[0], 0)
    assert np.allclose(B[1], np.diag([1, 0]))
    assert np.allclose(B[2], np.diag([0, 1]))
    assert np.allclose(B[3], 0)


def test_block_matches_oracle(rng):
    A = random_tensor(rng, 2, 3)
    assert np.allclose(block(A, 3).mats, oracles.blocked(A.mats, 3))


# -- transfer and overlap ------------------------------------------------------------

def test_transfer_scalar():
    assert np.allclose(transfer(product_state()).matrix, [[1]])


def test_transfer_antiferromagnet_spectrum():
    w = np.sort_complex(np.linalg.eigvals(oracles.transfer_matrix(antiferromagnet().mats)))
    assert np.allclose(w, [-1, 0, 0, 1])
    assert np.allclose(transfer(antiferromagnet()).matrix, oracles.transfer_matrix(antiferromagnet().mats))


def test_transfer_aklt_spectrum():
    w = np.sort(np.linalg.eigvals(transfer(aklt()).matrix).real)
    assert np.allclose(w, [-1 / 3, -1 / 3, -1 / 3, 1])


def test_transfer_eigenvector_convention(rng):
    A, B = random_tensor(rng, 2, 3), random_tensor(rng, 2, 2)
    E = transfer(A, B)
    w, V = np.linalg.eig(E.matrix)
    X = V[:, 0].reshape(3, 2)
    lhs = sum(a @ X @ b.conj().T for a, b in zip(A.mats, B.mats))
    assert np.allclose(lhs, w[0] * X)


def test_transfer_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        transfer(ghz(), aklt())


def test_overlap_examples():
    assert np.isclose(overlap(ghz(), ghz(), 4), 2)
    assert np.isclose(overlap(antiferromagnet(), antiferromagnet(), 3), 0)
    # GHZ at N=2 lives on |11>, |22>; AF on |12>, |21>
    a = contract_state(ghz(), 2).amplitudes
    b = contract_state(antiferromagnet(), 2).amplitudes
    assert np.isclose(np.vdot(a, b), 0)
    assert np.isclose(overlap(ghz(), antiferromagnet(), 2), 0)


def test_overlap_is_antilinear_in_first_argument(rng):
    A, B = random_tensor(rng, 2, 2), random_tensor(rng, 2, 3)
    N = 4
    ref = np.vdot(oracles.amplitudes(A.mats, N), oracles.amplitudes(B.mats, N))
    assert np.isclose(overlap(A, B, N), ref, rtol=1e-10)


# -- properties ---------------------------------------------------------------------

dims = st.tuples(st.integers(0, 10**6), st.integers(2, 3), st.integers(1, 4))


@given(dims, st.integers(1, 5))
def test_overlap_matches_dot_product(sd, N):
    seed, d, D = sd
    A, B = _random(seed, d, D), _random(seed + 1, d, D)
    a, b = contract_state(A, N).amplitudes, contract_state(B, N).amplitudes
    ref = np.vdot(a, b)
    assert abs(overlap(A, B, N) - ref) <= 1e-10 * max(1.0, np.linalg.norm(a) * np.linalg.norm(b))


@given(dims, st.integers(1, 3), st.integers(1, 3))
def test_blocking_consistency(sd, p, N):
    seed, d, D = sd
    if p * N > 9 or d ** (p * N) > 2**14:
        return
    A = _random(seed, d, D)
    lhs = contract_state(block(A, p), N).amplitudes
    rhs = contract_state(A, p * N).amplitudes
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(1.0, np.linalg.norm(rhs))


@given(dims, st.integers(2, 6))
def test_translation_invariance(sd, N):
    seed, d, D = sd
    if d**N > 2**12:
        return
    A = _random(seed, d, D)
    t = contract_state(A, N).as_tensor()
    shifted = np.moveaxis(t, 0, -1)
    assert np.linalg.norm(shifted - t) <= 1e-12 * max(1.0, np.linalg.norm(t))


@given(dims)
def test_transfer_traces_are_real_nonnegative(sd):
    seed, d, D = sd
    A = _random(seed, d, D)
    E = transfer(A)
    E = type(E)(E.D_a, E.D_b, E.matrix / np.abs(np.linalg.eigvals(E.matrix)).max())
    for N in range(1, 21):
        v = E.trace_power(N)
        assert abs(v.imag) <= 1e-10 * abs(v) + 1e-14
        assert v.real >= -1e-10


# -- JSON -----------------------------------------------------------------------------

def test_json_round_trip(tmp_path, rng):
    A = random_tensor(rng, 3, 2)
    path = tmp_path / "t.json"
    save_tensor(A, path)
    B = load_tensor(path)
    assert B.allclose(A, atol=0)
    doc = json.loads(path.read_text())
    assert doc["d"] == 3 and doc["D"] == 2 and len(doc["matrices"]) == 3


@pytest.mark.parametrize(
    "doc",
    [
        [],
        {"d": 2, "D": 1},
        {"d": 2, "D": 1, "matrices": [[[[1, 0]]]]},
        {"d": 1, "D": 2, "matrices": [[[[1, 0]], [[0, 0]]]]},
        {"d": 1, "D": 1, "matrices": [[[["a", 0]]]]},
        {"d": 0, "D": 1, "matrices": []},
    ],
)
def test_json_rejects_malformed(doc):
    with pytest.raises(ValidationError):
        tensor_from_json(doc)


def test_json_uses_physical_index_order():
    doc = tensor_to_json(ghz())
    assert doc["matrices"][0][0][0] == [1.0, 0.0]
    assert doc["matrices"][1][1][1] == [1.0, 0.0]
