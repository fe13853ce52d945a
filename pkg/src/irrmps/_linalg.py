"""Small dense linear-algebra helpers."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import EigensolverFailure


def herm(X):
    return 0.5 * (X + X.conj().T)


def eig(M, left=False):
    try:
        return scipy.linalg.eig(M, left=left, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc


def eigvals(M):
    try:
        return scipy.linalg.eigvals(M)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc


def psd_sqrt(X):
    """Square root and inverse square root of a positive definite matrix."""
    w, V = np.linalg.eigh(herm(X))
    s = np.sqrt(np.clip(w, 0.0, None))
    return (V * s) @ V.conj().T, (V / s) @ V.conj().T


def polar_unitary(X):
    """Unitary factor ``U`` of the right polar decomposition ``X = U H``."""
    U, _ = scipy.linalg.polar(X, side="right")
    return U


def orth_complement(Q, n):
    """Orthonormal basis of the complement of the column span of ``Q`` in C^n."""
    if Q.shape[1] == 0:
        return np.eye(n, dtype=complex)
    return scipy.linalg.null_space(Q.conj().T)


def cluster_sorted(values, tol):
    """Group an ascending real sequence into runs whose neighbours differ by <= tol.

    Returns a list of index arrays.
    """
    groups, current = [], [0]
    for k in range(1, len(values)):
        if values[k] - values[k - 1] <= tol:
            current.append(k)
        else:
            groups.append(np.array(current))
            current = [k]
    groups.append(np.array(current))
    return groups


def max_rel_residual(lhs, rhs):
    """``max_i ||lhs_i - rhs_i||_F`` relative to ``max(1, max_i ||lhs_i||_F)``."""
    lhs, rhs = np.asarray(lhs), np.asarray(rhs)
    diff = max(np.linalg.norm(a - b) for a, b in zip(lhs, rhs))
    scale = max(1.0, max(np.linalg.norm(a) for a in lhs))
    return float(diff / scale)


def nearest_root_of_unity(z, m):
    k = int(np.round(np.angle(z) * m / (2 * np.pi))) % m
    return np.exp(2j * np.pi * k / m), k
