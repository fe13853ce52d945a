"""Translationally invariant MPS tensors and the brute-force state oracle.

A tensor is a stack of ``d`` complex ``D x D`` matrices ``A[i]``.  It
generates, for every site count ``N``, the unnormalized vector whose
amplitude at ``(i_1, ..., i_N)`` is ``tr(A[i_1] @ ... @ A[i_N])``.

Multi-indices are flattened row-major, ``i_1 * d**(N-1) + ... + i_N``
(0-based), both for dense states and for blocked tensors, so that
``contract_state(block(A, p), N)`` and ``contract_state(A, p * N)`` agree
entrywise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_BUDGET
from .errors import BudgetExceeded, DimensionMismatch, ValidationError

__all__ = [
    "MpsTensor",
    "StateVector",
    "TransferOperator",
    "contract_state",
    "block",
    "transfer",
    "overlap",
    "tensor_to_json",
    "tensor_from_json",
    "load_tensor",
    "save_tensor",
]


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class MpsTensor:
    """Rank-three tensor stored as an array of shape ``(d, D, D)``."""

    mats: np.ndarray

    def __post_init__(self):
        mats = np.asarray(self.mats)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValidationError(f"expected shape (d, D, D), got {mats.shape}")
        if mats.shape[0] < 1 or mats.shape[1] < 1:
            raise ValidationError("need d >= 1 and D >= 1")
        if not np.all(np.isfinite(mats)):
            raise ValidationError("tensor has non-finite entries")
        object.__setattr__(self, "mats", _frozen(mats))

    @classmethod
    def from_matrices(cls, matrices) -> "MpsTensor":
        return cls(np.stack([np.asarray(m, dtype=complex) for m in matrices]))

    @property
    def d(self) -> int:
        return self.mats.shape[0]

    @property
    def D(self) -> int:
        return self.mats.shape[1]

    def __getitem__(self, i):
        return self.mats[i]

    def __len__(self):
        return self.d

    def __repr__(self):
        return f"MpsTensor(d={self.d}, D={self.D})"

    def scaled(self, c) -> "MpsTensor":
        return MpsTensor(c * self.mats)

    def conjugated_by(self, S, S_inv=None) -> "MpsTensor":
        """Return the tensor with matrices ``S @ A[i] @ S^-1``."""
        S = np.asarray(S)
        if S_inv is None:
            S_inv = np.linalg.inv(S)
        return MpsTensor(S @ self.mats @ S_inv)

    def allclose(self, other: "MpsTensor", atol=1e-10) -> bool:
        return self.mats.shape == other.mats.shape and np.allclose(
            self.mats, other.mats, rtol=0, atol=atol
        )


@dataclass(frozen=True, eq=False)
class StateVector:
    """Dense, unnormalized ``N``-site vector of local dimension ``d``."""

    N: int
    d: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (self.d**self.N,):
            raise ValidationError("amplitude vector has wrong length")
        object.__setattr__(self, "amplitudes", _frozen(self.amplitudes))

    def as_tensor(self) -> np.ndarray:
        """Amplitudes reshaped to ``(d,) * N``."""
        return self.amplitudes.reshape((self.d,) * self.N)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True, eq=False)
class TransferOperator:
    """Dense matrix ``sum_i A[i] (x) conj(B[i])``.

    Row-major reshaping of an eigenvector into a ``D_a x D_b`` matrix ``X``
    gives ``sum_i A[i] @ X @ B[i]^H = lambda X``.  The conjugate transpose
    of ``matrix`` represents the dual map ``X -> sum_i A[i]^H X B[i]``.
    """

    D_a: int
    D_b: int
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def is_square_self(self) -> bool:
        return self.D_a == self.D_b

    def apply(self, X) -> np.ndarray:
        """Forward map on a ``D_a x D_b`` matrix."""
        X = np.asarray(X, dtype=complex)
        return (self.matrix @ X.reshape(-1)).reshape(self.D_a, self.D_b)

    def apply_dual(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        return (self.matrix.conj().T @ X.reshape(-1)).reshape(self.D_a, self.D_b)

    def trace_power(self, N: int) -> complex:
        return complex(np.trace(np.linalg.matrix_power(self.matrix, N)))


def _check_budget(d: int, n: int, budget: int):
    # compare in log space first so huge exponents do not allocate big ints
    if n * np.log2(d) > np.log2(budget) + 1e-12 or d**n > budget:
        raise BudgetExceeded(f"d**N = {d}**{n} exceeds the amplitude budget {budget}")


def _words(mats: np.ndarray, length: int) -> np.ndarray:
    """All ``d**length`` ordered products, row-major in the word index."""
    d, D, _ = mats.shape
    out = np.broadcast_to(np.eye(D, dtype=complex), (1, D, D))
    for _ in range(length):
        out = np.einsum("xab,ibc->xiac", out, mats).reshape(-1, D, D)
    return out


def contract_state(A: MpsTensor, N: int, budget: int = DEFAULT_BUDGET) -> StateVector:
    """Dense vector ``sum tr(A[i_1] ... A[i_N]) |i_1 ... i_N>`` (no normalization)."""
    if N < 1:
        raise ValidationError("N must be a positive integer")
    _check_budget(A.d, N, budget)
    left = N // 2
    L = _words(A.mats, left)
    R = _words(A.mats, N - left)
    amps = np.einsum("xab,yba->xy", L, R).reshape(-1)
    return StateVector(N, A.d, amps)


def block(A: MpsTensor, p: int, budget: int = DEFAULT_BUDGET) -> MpsTensor:
    """Blocked tensor whose matrix at multi-index ``(i_1..i_p)`` is the product."""
    if p < 1:
        raise ValidationError("blocking length p must be >= 1")
    _check_budget(A.d, p, budget)
    return MpsTensor(_words(A.mats, p))


def transfer(A: MpsTensor, B: MpsTensor | None = None) -> TransferOperator:
    if B is None:
        B = A
    if A.d != B.d:
        raise DimensionMismatch(f"physical dimensions differ: {A.d} != {B.d}")
    E = np.einsum("iab,icd->acbd", A.mats, B.mats.conj()).reshape(A.D * B.D, A.D * B.D)
    return TransferOperator(A.D, B.D, E)


def overlap(A: MpsTensor, B: MpsTensor, N: int) -> complex:
    """``<V_N(A)|V_N(B)>``, antilinear in ``A``.

    Equal to ``tr(transfer(B, A).matrix ** N)``.
    """
    if N < 1:
        raise ValidationError("N must be a positive integer")
    return transfer(B, A).trace_power(N)


# -- JSON tensor format -------------------------------------------------------

def _pair(z) -> list[float]:
    return [float(z.real), float(z.imag)]


def matrix_to_json(M) -> list:
    M = np.asarray(M)
    return [[_pair(z) for z in row] for row in M]


def matrix_from_json(rows, shape=None) -> np.ndarray:
    try:
        M = np.array([[complex(float(e[0]), float(e[1])) for e in row] for row in rows])
    except (TypeError, ValueError, IndexError) as exc:
        raise ValidationError(f"malformed complex matrix: {exc}") from exc
    if M.ndim != 2 or (shape is not None and M.shape != tuple(shape)):
        raise ValidationError(f"matrix has shape {M.shape}, expected {shape}")
    return M


def tensor_to_json(A: MpsTensor) -> dict:
    return {"d": A.d, "D": A.D, "matrices": [matrix_to_json(m) for m in A.mats]}


def tensor_from_json(doc) -> MpsTensor:
    if not isinstance(doc, dict):
        raise ValidationError("tensor document must be a JSON object")
    try:
        d, D, mats = int(doc["d"]), int(doc["D"]), doc["matrices"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"tensor document needs integer d, D and matrices: {exc}") from exc
    if d < 1 or D < 1:
        raise ValidationError("need d >= 1 and D >= 1")
    if not isinstance(mats, list) or len(mats) != d:
        raise ValidationError(f"expected {d} matrices")
    return MpsTensor(np.stack([matrix_from_json(m, (D, D)) for m in mats]))


def load_tensor(path) -> MpsTensor:
    with open(path) as fh:
        return tensor_from_json(json.load(fh))


def save_tensor(A: MpsTensor, path):
    with open(path, "w") as fh:
        json.dump(tensor_to_json(A), fh, indent=1)
        fh.write("\n")
