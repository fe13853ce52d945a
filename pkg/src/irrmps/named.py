"""Small named tensors with known structure, plus random samplers."""

from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .mps_core import MpsTensor

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def ghz() -> MpsTensor:
    return MpsTensor.from_matrices([np.diag([1, 0]), np.diag([0, 1])])


def antiferromagnet() -> MpsTensor:
    return MpsTensor.from_matrices([[[0, 1], [0, 0]], [[0, 0], [1, 0]]])


def aklt() -> MpsTensor:
    """Pauli tensor ``sigma^i / sqrt(3)``: a normal, trace-preserving block."""
    return MpsTensor(np.stack(PAULI) / np.sqrt(3))


def product_state(amplitudes=(1.0, 0.0)) -> MpsTensor:
    return MpsTensor(np.asarray(amplitudes, dtype=complex).reshape(-1, 1, 1))


def cyclic_shift(m: int) -> np.ndarray:
    """Matrix with ``S e_{u+1} = e_u`` (indices mod ``m``)."""
    return np.roll(np.eye(m, dtype=complex), 1, axis=1)


def weighted_shift(m: int, angles=None) -> MpsTensor:
    """Irreducible ``m``-periodic block: ``A[0] = S cos(t)``, ``A[1] = S sin(t)``.

    Distinct angles make the block irreducible; the dual map is unital.
    """
    if angles is None:
        angles = 0.3 + 0.4 * np.arange(m)
    S = cyclic_shift(m)
    return MpsTensor.from_matrices([S @ np.diag(np.cos(angles)), S @ np.diag(np.sin(angles))])


def direct_sum(*tensors: MpsTensor) -> MpsTensor:
    d = tensors[0].d
    D = sum(t.D for t in tensors)
    out = np.zeros((d, D, D), dtype=complex)
    o = 0
    for t in tensors:
        out[:, o : o + t.D, o : o + t.D] = t.mats
        o += t.D
    return MpsTensor(out)


# -- random samplers -----------------------------------------------------------

def random_tensor(rng, d: int, D: int) -> MpsTensor:
    """Complex Gaussian tensor."""
    return MpsTensor(rng.standard_normal((d, D, D)) + 1j * rng.standard_normal((d, D, D)))


def random_unitary(rng, n: int) -> np.ndarray:
    if n == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return unitary_group.rvs(n, random_state=rng)


def random_invertible(rng, n: int, cond: float = 100.0) -> np.ndarray:
    """Random matrix with condition number at most ``cond``."""
    s = np.exp(rng.uniform(0, np.log(cond), size=n))
    s[0], s[-1] = 1.0, cond if n > 1 else 1.0
    return random_unitary(rng, n) @ np.diag(s) @ random_unitary(rng, n)


def random_periodic_block(rng, m: int, k: int = 2, d: int = 2) -> MpsTensor:
    """Random block with the cyclic off-diagonal structure of period ``m``.

    Slices have size ``k``; ``A[i]`` only has nonzero blocks ``(u, u+1)``.
    Generic draws are irreducible with period exactly ``m``.
    """
    D = m * k
    mats = np.zeros((d, D, D), dtype=complex)
    for u in range(m):
        v = (u + 1) % m
        g = rng.standard_normal((d, k, k)) + 1j * rng.standard_normal((d, k, k))
        mats[:, u * k : (u + 1) * k, v * k : (v + 1) * k] = g
    return MpsTensor(mats)
