"""Spectral analysis of the completely positive maps attached to a tensor.

For a tensor ``A`` the forward map is ``X -> sum_i A[i] X A[i]^H`` and the
dual map is ``X -> sum_i A[i]^H X A[i]``; both are represented by the
transfer operator of :mod:`irrmps.mps_core` (the dual by its conjugate
transpose).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _linalg as la
from .config import DEFAULT_TOL, Tolerances
from .errors import EigensolverFailure, NoUnitEigenvalue, NotIrreducible, PeripheralMismatch
from .mps_core import MpsTensor, TransferOperator, transfer

__all__ = [
    "SpectralData",
    "PeriodStructure",
    "FormIIGauge",
    "spectral_data",
    "fixed_point",
    "is_irreducible",
    "period",
    "to_form_ii",
    "dual_map",
    "forward_map",
]


def forward_map(A: MpsTensor, X):
    return np.einsum("iab,bc,idc->ad", A.mats, X, A.mats.conj())


def dual_map(A: MpsTensor, X):
    return np.einsum("iba,bc,icd->ad", A.mats.conj(), X, A.mats)


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    spectral_radius: float
    peripheral: np.ndarray


@dataclass(frozen=True, eq=False)
class PeriodStructure:
    """Cyclic projectors of an ``m``-periodic block in form II.

    ``projectors[u]`` maps onto the ``u``-th slice; every ``A[i]`` sends the
    range of ``P_{u+1}`` into the range of ``P_u`` and the dual map sends
    ``P_u`` to ``P_{u+1}`` (indices mod ``m``).
    """

    m: int
    projectors: tuple
    omega: complex
    peripheral_unitary: np.ndarray

    def projector(self, u: int) -> np.ndarray:
        return self.projectors[u % self.m]

    def residuals(self, A: MpsTensor) -> dict:
        """Violations of the projector laws for the block ``A``."""
        P = self.projectors
        D = A.D
        orth = max(
            np.linalg.norm(P[u] @ P[v] - (P[u] if u == v else 0))
            for u in range(self.m)
            for v in range(self.m)
        )
        herm = max(np.linalg.norm(p - p.conj().T) for p in P)
        complete = np.linalg.norm(sum(P) - np.eye(D))
        offdiag = max(
            np.linalg.norm(
                A.mats[i] - sum(P[u] @ A.mats[i] @ P[(u + 1) % self.m] for u in range(self.m))
            )
            for i in range(A.d)
        )
        shift = max(np.linalg.norm(dual_map(A, P[u]) - P[(u + 1) % self.m]) for u in range(self.m))
        return {
            "orthogonality": float(orth),
            "hermiticity": float(herm),
            "completeness": float(complete),
            "off_diagonal": float(offdiag),
            "dual_shift": float(shift),
        }


@dataclass(frozen=True, eq=False)
class FormIIGauge:
    """Similarity ``S`` with ``A''[i] = S A[i] S^-1`` in form II.

    ``rho`` is the dual fixed point of the input (trace ``D``), ``U_sigma``
    the unitary diagonalizing the forward fixed point after the first step,
    and ``Lambda`` the resulting diagonal fixed point (trace one).
    """

    rho: np.ndarray
    U_sigma: np.ndarray
    Lambda: np.ndarray
    S: np.ndarray
    S_inv: np.ndarray


def spectral_data(E: TransferOperator, tol: Tolerances = DEFAULT_TOL) -> SpectralData:
    w = la.eigvals(E.matrix)
    r = float(np.max(np.abs(w))) if w.size else 0.0
    if r <= tol.zero:
        return SpectralData(w, r, w[:0])
    periph = w[np.abs(np.abs(w) / r - 1.0) <= tol.peripheral]
    return SpectralData(w, r, periph)


def _phase_fix_hermitian(X):
    tr = np.trace(X)
    if abs(tr) > 1e-12 * max(1.0, np.linalg.norm(X)):
        return X * (abs(tr) / tr)
    k = np.argmax(np.abs(X))
    z = X.flat[k]
    return X * (abs(z) / z)


def fixed_point(E: TransferOperator, dual: bool = False, tol: Tolerances = DEFAULT_TOL):
    """Eigenvector of the eigenvalue closest to one, reshaped to a matrix.

    The result is phase-fixed to nonnegative trace (trace one when possible)
    and Hermitized whenever the Hermitian part is still a fixed point.
    """
    M = E.matrix.conj().T if dual else E.matrix
    w, V = la.eig(M)
    k = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[k] - 1.0) > tol.peripheral:
        raise NoUnitEigenvalue(f"closest eigenvalue to 1 is {w[k]:.3g}")
    X = _phase_fix_hermitian(V[:, k].reshape(E.D_a, E.D_b))
    if E.D_a == E.D_b:
        H = la.herm(X)
        img = (M @ H.reshape(-1)).reshape(H.shape)
        if np.linalg.norm(img - H) <= 1e-9 * max(1.0, np.linalg.norm(H)):
            X = H
    tr = np.trace(X)
    if abs(tr) > 1e-12 * np.linalg.norm(X):
        return X / tr
    return X / np.linalg.norm(X)


_MAX_SMEAR = 1e-2


def _single_cluster(T11, norm_m):
    k = T11.shape[0]
    N = T11 - np.trace(T11) / k * np.eye(k)
    bound = 1e3 * k * np.finfo(float).eps * norm_m * max(1.0, np.linalg.norm(N)) ** (k - 1)
    return np.linalg.norm(np.linalg.matrix_power(N, k)) <= bound


def complex_schur(M):
    """Complex Schur form ``M = Q T Q^H``."""
    try:
        return scipy.linalg.schur(np.asarray(M, dtype=complex), output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc


def _reorder(T, Q, select):
    T, Q, _, k, _, _, info = scipy.linalg.lapack.ztrsen(select.astype(np.int32), T, Q, job="N")
    if info != 0:
        raise EigensolverFailure(f"Schur reordering failed (info={info})")
    return T, Q, int(k)


def unit_spectral_projector(M, tol: Tolerances = DEFAULT_TOL, schur=None):
    """Spectral projector of ``M`` onto its eigenvalue cluster at one.

    Built from an ordered Schur form and a Sylvester solve, so it stays well
    defined when the cluster is defective.  ``schur`` may pass a precomputed
    ``(T, Q)``.  Returns ``(Pi, k)`` with ``k`` the cluster size.
    """
    n = M.shape[0]
    T0, Q0 = complex_schur(M) if schur is None else schur
    ev = np.diag(T0)
    dist = np.sort(np.abs(ev - 1.0))
    norm_m = np.linalg.norm(T0)
    # A defective eigenvalue is smeared by roundoff to a ring of radius
    # ~eps**(1/k).  Widen the window as long as the selected Schur block
    # stays numerically one eigenvalue, i.e. T11 - mean is nilpotent.
    cuts = [tol.degeneracy] + [x * (1 + 1e-9) for x in dist if tol.degeneracy < x <= _MAX_SMEAR]
    best = None
    for delta in cuts:
        select = np.abs(ev - 1.0) <= delta
        k = int(select.sum())
        if k == 0 or (best is not None and k == best[2]):
            continue
        T, Q, k = _reorder(T0, Q0, select)
        if (best is None and dist[0] <= tol.degeneracy) or _single_cluster(T[:k, :k], norm_m):
            best = (T, Q, k)
    if best is None:
        raise NoUnitEigenvalue("no eigenvalue at one after rescaling")
    T, Q, k = best
    P = np.zeros((n, n), dtype=complex)
    P[:k, :k] = np.eye(k)
    if k < n:
        # T11 X - X T22 = T12 with both blocks already triangular
        X, scale, info = scipy.linalg.lapack.ztrsyl(T[:k, :k], T[k:, k:], T[:k, k:], isgn=-1)
        if info < 0:
            raise EigensolverFailure(f"Sylvester solve failed (info={info})")
        P[:k, k:] = X / scale
    return Q @ P @ Q.conj().T, k


def top_of_chain(M, Z, tol: Tolerances = DEFAULT_TOL):
    """Follow ``Z -> (M - 1) Z`` to the last nonzero vector of the Jordan chain.

    For ``Z`` the unit spectral projection of a positive matrix this is the
    dominant direction of ``M^n Z``, hence again positive semidefinite.
    """
    scale = max(1.0, np.linalg.norm(M))
    for _ in range(M.shape[0]):
        nxt = M @ Z - Z
        if np.linalg.norm(nxt) <= 1e-8 * scale * np.linalg.norm(Z):
            return Z
        Z = nxt
    return Z


def _rank_deficient(X, tol):
    w = np.linalg.eigvalsh(la.herm(X))
    top = np.max(np.abs(w))
    return top == 0 or np.min(w) <= tol.posdef * top


def is_irreducible(A: MpsTensor, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff the rescaled map has a simple eigenvalue one with positive
    definite fixed points for both the map and its dual."""
    E = transfer(A)
    r = spectral_data(E, tol).spectral_radius
    if r <= tol.zero:
        return False
    M = E.matrix / r
    Pi, k = unit_spectral_projector(M, tol)
    if k != 1:
        return False
    I = np.eye(A.D).reshape(-1)
    X = (Pi.conj().T @ I).reshape(A.D, A.D)
    rho = (Pi @ I).reshape(A.D, A.D)
    if np.linalg.norm(M @ rho.reshape(-1) - rho.reshape(-1)) > 1e-8 * np.linalg.norm(rho):
        return False
    return not (_rank_deficient(X, tol) or _rank_deficient(rho, tol))


def _lagrange_projectors(U, roots):
    D = U.shape[0]
    out = []
    for v, lv in enumerate(roots):
        P = np.eye(D, dtype=complex)
        for w, lw in enumerate(roots):
            if w != v:
                P = P @ (U - lw * np.eye(D)) / (lv - lw)
        out.append(la.herm(P))
    return out


def _label_key(P):
    return (-int(round(np.trace(P).real)), tuple(np.round(-np.abs(P).reshape(-1), 8)))


def period(A: MpsTensor, tol: Tolerances = DEFAULT_TOL) -> tuple[int, PeriodStructure]:
    """Period ``m`` and cyclic projectors of a single irreducible block in form II."""
    E = transfer(A)
    sd = spectral_data(E, tol)
    r = sd.spectral_radius
    if r <= tol.zero:
        raise PeripheralMismatch("block has zero spectral radius")
    periph = sd.peripheral / r
    m = len(periph)
    roots = np.exp(2j * np.pi * np.arange(m) / m)
    for z in roots:
        hits = np.sum(np.abs(periph - z) <= max(tol.peripheral, 1e-6 / m))
        if hits != 1:
            raise PeripheralMismatch(
                f"peripheral spectrum {np.round(periph, 6)} is not the set of {m}-th roots of unity"
            )
    omega = complex(roots[1]) if m > 1 else 1.0 + 0j
    D = A.D
    if m == 1:
        P = [np.eye(D, dtype=complex)]
        return 1, PeriodStructure(1, tuple(P), omega, np.eye(D, dtype=complex))

    Mdual = E.matrix.conj().T / r
    w, V = la.eig(Mdual)
    k = int(np.argmin(np.abs(w - omega)))
    U = la.polar_unitary(V[:, k].reshape(D, D))
    lam = la.eigvals(U)
    theta = np.angle(np.mean(lam**m)) / m
    U = np.exp(-1j * theta) * U
    candidates = _lagrange_projectors(U, roots)
    if any(np.linalg.norm(P) < 0.5 for P in candidates):
        raise PeripheralMismatch("peripheral unitary misses a root of unity")

    order = [min(range(m), key=lambda u: _label_key(candidates[u]))]
    for _ in range(m - 1):
        img = dual_map(A, candidates[order[-1]]) / r
        rest = [u for u in range(m) if u not in order]
        order.append(min(rest, key=lambda u: np.linalg.norm(candidates[u] - img)))
    P = tuple(candidates[u] for u in order)
    Uper = sum(omega**u * P[u] for u in range(m))
    return m, PeriodStructure(m, P, omega, Uper)


def _sorted_diagonalizer(sigma, tol):
    """Unitary ``U`` with ``U^H sigma U`` diagonal, nonincreasing."""
    off = sigma - np.diag(np.diag(sigma))
    if np.linalg.norm(off) <= tol.projector * np.linalg.norm(sigma):
        perm = np.argsort(-np.diag(sigma).real, kind="stable")
        return np.eye(sigma.shape[0], dtype=complex)[:, perm]
    w, V = np.linalg.eigh(la.herm(sigma))
    V = V[:, ::-1]
    for c in range(V.shape[1]):
        j = int(np.argmax(np.abs(V[:, c]) > np.max(np.abs(V[:, c])) - 1e-12))
        V[:, c] *= abs(V[j, c]) / V[j, c]
    return V


def to_form_ii(A: MpsTensor, tol: Tolerances = DEFAULT_TOL) -> tuple[MpsTensor, FormIIGauge]:
    """Gauge an irreducible block so that its dual map is unital and the
    forward fixed point is diagonal, positive and nonincreasing.

    The overall scale of ``A`` is kept; fixed points are those of the map
    rescaled to spectral radius one.
    """
    E = transfer(A)
    r = spectral_data(E, tol).spectral_radius
    if r <= tol.zero:
        raise NotIrreducible("block has zero spectral radius")
    En = TransferOperator(A.D, A.D, E.matrix / r)
    rho = la.herm(fixed_point(En, dual=True, tol=tol)) * A.D
    w = np.linalg.eigvalsh(rho)
    if w[0] <= tol.posdef * w[-1]:
        raise NotIrreducible(f"dual fixed point not positive definite (min eig {w[0]:.3g})")
    sq, sq_inv = la.psd_sqrt(rho)
    A1 = A.conjugated_by(sq, sq_inv)
    sigma = la.herm(fixed_point(TransferOperator(A.D, A.D, transfer(A1).matrix / r), tol=tol))
    if np.linalg.eigvalsh(sigma)[0] <= tol.posdef * np.linalg.norm(sigma):
        raise NotIrreducible("forward fixed point not positive definite")
    U = _sorted_diagonalizer(sigma, tol)
    Lam = np.diag(np.diag(U.conj().T @ sigma @ U).real).astype(complex)
    Lam = Lam / np.trace(Lam)
    S = U.conj().T @ sq
    S_inv = sq_inv @ U
    return A.conjugated_by(S, S_inv), FormIIGauge(rho, U, Lam, S, S_inv)
