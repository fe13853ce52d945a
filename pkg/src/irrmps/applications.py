"""Refinement, divisibility and symmetries of MPS families.

A family ``V(B)`` is ``p``-refinable into ``V(A)`` when
``V_{pN}(A) = W^{(x)N} V_N(B)`` for an isometry ``W``; the channel of ``B``
is ``p``-divisible when ``E_B = E_A^p`` for a trace-preserving ``E_A``.
Both directions are constructive here, starting from a witness.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

from . import _linalg as la
from .config import DEFAULT_BUDGET, DEFAULT_TOL, Tolerances
from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    GaugeFailure,
    NotAWitness,
    RankDeficient,
    ValidationError,
)
from .fundamental_theorem import _state_floor, _transfer_norm, compare_equal, state_residuals
from .irreducible_form import assemble, decompose
from .mps_core import MpsTensor, block, contract_state, transfer

__all__ = [
    "RefinementWitness",
    "DivisibilityWitness",
    "RefinementReport",
    "DivisibilityReport",
    "SymmetryWitness",
    "check_refinement",
    "refinement_from_divisibility",
    "divisibility_from_refinement",
    "check_divisibility",
    "symmetry_gauge",
    "unique_decomposition",
    "phase_distribution",
    "kraus_tensor",
    "refined_tensor",
]


@dataclass(frozen=True, eq=False)
class RefinementWitness:
    """Isometry ``W`` from ``C^d_B`` into ``(C^d_A)^{(x)p}``, stored as a ``d_A**p x d_B`` matrix."""

    p: int
    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=complex)
        if self.p < 1 or W.ndim != 2:
            raise ValidationError("need p >= 1 and a matrix W")
        res = np.linalg.norm(W.conj().T @ W - np.eye(W.shape[1]))
        if res > 1e-9:
            raise ValidationError(f"W is not an isometry (||W^H W - I|| = {res:.3g})")
        W.flags.writeable = False
        object.__setattr__(self, "W", W)

    @property
    def d_in(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True, eq=False)
class DivisibilityWitness:
    p: int
    root_tensor: MpsTensor
    power_residual: float
    tp_residual: float


@dataclass(frozen=True)
class RefinementReport:
    p: int
    residuals: dict  # N -> (residual, ||V_N(B)||)
    passed: bool


@dataclass(frozen=True)
class DivisibilityReport:
    p: int
    power_residual: float
    tp_residual: float
    passed: bool


@dataclass(frozen=True, eq=False)
class SymmetryWitness:
    """``sum_i u[i', i] A[i] = Z U A[i'] U^-1`` with ``Z`` commuting with ``A``."""

    Z: np.ndarray
    U: np.ndarray
    U_inv: np.ndarray
    residuals: dict
    n_checked: tuple


def refined_tensor(B: MpsTensor, W: RefinementWitness) -> MpsTensor:
    """Tensor ``C`` with ``C[a] = sum_i W[a, i] B[i]``."""
    if W.d_in != B.d:
        raise DimensionMismatch(f"W acts on C^{W.d_in}, tensor has d = {B.d}")
    return MpsTensor(np.einsum("ai,ixy->axy", W.W, B.mats))


def _apply_per_site(W, v, N, d):
    t = v.reshape((d,) * N)
    for ax in range(N):
        t = np.moveaxis(np.tensordot(W, t, axes=([1], [ax])), 0, ax)
    return t.reshape(-1)


def _local_dim(W: RefinementWitness, A: MpsTensor):
    if A.d**W.p != W.W.shape[0]:
        raise DimensionMismatch(f"W has {W.W.shape[0]} rows, expected d_A**p = {A.d**W.p}")


def check_refinement(
    B: MpsTensor,
    A: MpsTensor,
    W: RefinementWitness,
    N_max: int = 4,
    budget: int = DEFAULT_BUDGET,
    tol: Tolerances = DEFAULT_TOL,
) -> RefinementReport:
    """Compare ``V_{pN}(A)`` with ``W^{(x)N} V_N(B)`` for ``N = 1..N_max``.

    Site counts beyond the amplitude budget are skipped; if not even
    ``N = 1`` fits, :class:`BudgetExceeded` is raised.
    """
    _local_dim(W, A)
    if W.d_in != B.d:
        raise DimensionMismatch(f"W acts on C^{W.d_in}, B has d = {B.d}")
    res = {}
    eb = _transfer_norm(B)
    for N in range(1, N_max + 1):
        try:
            a = contract_state(A, W.p * N, budget).amplitudes
        except BudgetExceeded:
            if N == 1:
                raise
            break
        b = contract_state(B, N, budget).amplitudes
        diff = np.linalg.norm(a - _apply_per_site(W.W, b, N, B.d))
        res[N] = (float(diff), float(np.linalg.norm(b)), _state_floor(B, N, eb))
    passed = all(r <= tol.state * s + f for r, s, f in res.values())
    return RefinementReport(W.p, {N: (r, s) for N, (r, s, _) in res.items()}, passed)


def check_divisibility(B: MpsTensor, A: MpsTensor, p: int, tol: Tolerances = DEFAULT_TOL) -> DivisibilityReport:
    """Report ``||E_A^p - E_B||`` and the trace-preservation residual of ``E_A``."""
    if A.D != B.D:
        raise DimensionMismatch(f"bond dimensions differ: {A.D} != {B.D}")
    if p < 1:
        raise ValidationError("p must be >= 1")
    EA, EB = transfer(A).matrix, transfer(B).matrix
    power = float(np.linalg.norm(np.linalg.matrix_power(EA, p) - EB))
    tp = float(np.linalg.norm(np.einsum("iba,ibc->ac", A.mats.conj(), A.mats) - np.eye(A.D)))
    return DivisibilityReport(p, power, tp, power <= tol.state and tp <= tol.state)


def kraus_tensor(E, D: int, cutoff: float = 1e-12) -> MpsTensor:
    """Minimal Kraus operators of a CP map given as a transfer matrix.

    Operators come from the eigendecomposition of the Choi matrix, largest
    weight first.
    """
    E = np.asarray(E)
    J = E.reshape(D, D, D, D).transpose(0, 2, 1, 3).reshape(D * D, D * D)
    w, V = np.linalg.eigh(la.herm(J))
    keep = w > cutoff * max(1.0, w.max())
    w, V = w[keep][::-1], V[:, keep][:, ::-1]
    if w.size == 0:
        raise ValidationError("the map is zero")
    return MpsTensor((V * np.sqrt(w)).T.reshape(-1, D, D))


def refinement_from_divisibility(
    B: MpsTensor, A: MpsTensor, p: int, tol: Tolerances = DEFAULT_TOL, budget: int = DEFAULT_BUDGET
) -> RefinementWitness:
    """Isometry ``W`` with ``A^{(p)}[a] = sum_i W[a, i] B[i]``.

    ``E_A^p = E_B`` makes the blocked tensor and ``B`` two Kraus
    representations of one channel, so they differ by an isometry.

    Raises
    ------
    NotAWitness
        If ``(B, A, p)`` fails :func:`check_divisibility`.
    RankDeficient
        If no isometry reproduces the blocked operators.
    """
    if not check_divisibility(B, A, p, tol).passed:
        raise NotAWitness("E_A^p does not match E_B")
    if A.d**p < B.d:
        raise RankDeficient(f"d_A**p = {A.d**p} < d_B = {B.d}: no isometry exists")
    Ap = block(A, p, budget)
    MA = Ap.mats.reshape(Ap.d, -1).T  # columns vec(A^(p)[a])
    MB = B.mats.reshape(B.d, -1).T
    U, s, Vh = np.linalg.svd(MB, full_matrices=True)
    r = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))
    Ur, sr, VB = U[:, :r], s[:r], Vh[:r].conj().T  # MB = Ur diag(sr) VB^H
    VA = (MA.conj().T @ Ur) / sr  # MA = Ur diag(sr) VA^H
    VA = la.polar_unitary(VA) if r else VA
    # complete to an isometry: W^T = VB VA^H + VB_perp X^H with X orthogonal to VA
    VB_perp = Vh[r:].conj().T
    X = la.orth_complement(VA, Ap.d)[:, : B.d - r]
    WT = VB @ VA.conj().T + VB_perp @ X.conj().T
    W = WT.T
    scale = max(1.0, np.linalg.norm(MA))
    fit = np.linalg.norm(MA - MB @ WT)
    if fit > tol.state * scale:
        raise RankDeficient(f"Kraus operators not related by an isometry (residual {fit:.3g})")
    return RefinementWitness(p, W)


def unique_decomposition(u: int, m: int, p: int) -> tuple[int, int]:
    """The unique ``(alpha, k)``, ``0 <= alpha < gcd(m, p)``, ``0 <= k < m / gcd``,
    with ``u = alpha + p k (mod m)``."""
    r = gcd(m, p)
    hits = [(a, k) for a in range(r) for k in range(m // r) if (a + p * k - u) % m == 0]
    if len(hits) != 1:
        raise ValueError(f"no unique decomposition of u={u} for m={m}, p={p}: {hits}")
    return hits[0]


def phase_distribution(c, m: int, p: int) -> np.ndarray:
    """Slice phases ``d_u = c[alpha_{u+1}]**k_{u+1} / c[alpha_u]**k_u`` for ``u = 0..m-1``.

    With ``c[alpha]**(m / gcd(m, p)) == 1`` the products of ``p`` consecutive
    phases telescope to ``c[alpha_u]``.
    """
    c = np.asarray(c, dtype=complex)
    dec = [unique_decomposition(u, m, p) for u in range(m)]
    val = np.array([c[a] ** k for a, k in dec])
    return np.roll(val, -1) / val


def divisibility_from_refinement(
    B: MpsTensor,
    A: MpsTensor,
    W: RefinementWitness,
    tol: Tolerances = DEFAULT_TOL,
    n_check: int = 4,
    budget: int = DEFAULT_BUDGET,
) -> DivisibilityWitness:
    """Tensor ``At`` with ``At^{(p)} = C`` (``C[a] = sum_i W[a, i] B[i]``).

    Hence ``E_At^p = E_C = E_B``.  The phases relating ``A^{(p)}`` to ``C``
    are spread over the period slices of the blocks of ``A``.

    Raises
    ------
    NotAWitness
        If ``W`` does not refine ``B`` into ``A``.
    GaugeFailure
        If no usable gauge relation between ``A^{(p)}`` and ``C`` is found.
    """
    p = W.p
    if not check_refinement(B, A, W, n_check, budget, tol).passed:
        raise NotAWitness("W does not map V_N(B) onto V_pN(A)")
    C = refined_tensor(B, W)
    Ap = block(A, p, budget)
    dec = decompose(A, tol)
    if not dec.exact:
        raise GaugeFailure("A is not similar to its irreducible form")
    rel = compare_equal(Ap, C, tol, n_check=max(1, n_check), budget=budget)
    if rel is None or not rel.lifted:
        raise GaugeFailure("no gauge relation between A^(p) and C")
    Z_in = rel.Z_in
    G, H = dec.assembly_gauge

    # phases on the slices of every copy of every block
    asm = np.array(assemble(dec).mats)
    for comp, (j, sl) in zip(dec.ordered_components, dec.block_slices()):
        blk = dec.basis[j]
        m, r = blk.m, gcd(blk.m, p)
        P = blk.period_structure.projectors
        c = np.zeros(r, dtype=complex)
        for alpha in range(r):
            Pt = sum(P[(alpha + p * k) % m] for k in range(m // r))
            Pi = H[:, sl] @ Pt @ G[sl, :]
            c[alpha] = np.trace(Pi @ Z_in) / np.trace(Pi)
        c = np.array([la.nearest_root_of_unity(x, m // r)[0] if abs(x) > 0.5 else x for x in c])
        dvec = phase_distribution(c, m, p)
        asm[:, sl, sl] = comp.multiplicity * sum(dvec[u] * P[u] @ blk.tensor.mats for u in range(m))
    A_prime = H @ asm @ G
    At = MpsTensor(rel.Y_in_inv @ A_prime @ rel.Y_in)
    resid = la.max_rel_residual(C.mats, block(At, p, budget).mats)
    if resid > tol.state:
        raise GaugeFailure(f"constructed root does not reproduce C (residual {resid:.3g})")
    rep = check_divisibility(B, At, p, tol)
    return DivisibilityWitness(p, At, rep.power_residual, rep.tp_residual)


def symmetry_gauge(
    A: MpsTensor,
    u,
    tol: Tolerances = DEFAULT_TOL,
    n_check: int = 8,
    budget: int = DEFAULT_BUDGET,
):
    """Witness ``(Z, U)`` for the local symmetry ``u`` of ``V(A)``, or ``None``.

    Returns a :class:`SymmetryWitness` with
    ``sum_i u[i', i] A[i] = Z U A[i'] U^-1``.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (A.d, A.d):
        raise DimensionMismatch(f"u must be {A.d} x {A.d}")
    if np.linalg.norm(u.conj().T @ u - np.eye(A.d)) > 1e-9:
        raise ValidationError("u is not unitary")
    Au = MpsTensor(np.einsum("ji,ixy->jxy", u, A.mats))
    rel = compare_equal(Au, A, tol, n_check, budget)
    if rel is None:
        return None
    if not rel.lifted:
        raise GaugeFailure("decompositions are not similarities; cannot express the witness for A")
    Z = rel.Z_in.conj().T
    U, U_inv = rel.Y_in, rel.Y_in_inv
    residuals = {
        "relation": la.max_rel_residual(Au.mats, Z @ U @ A.mats @ U_inv),
        "commutator": la.max_rel_residual(A.mats @ Z, Z @ A.mats),
        "commutator_rotated": la.max_rel_residual(Au.mats @ Z, Z @ Au.mats),
        "unitarity_U": float(np.linalg.norm(U.conj().T @ U - np.eye(A.D))),
    }
    states = state_residuals(A, MpsTensor(Z @ A.mats), n_check, budget)
    residuals["states_ZA"] = max((r / max(s, f) for r, s, f in states.values()), default=0.0)
    if residuals["relation"] > tol.relation:
        raise GaugeFailure(f"symmetry relation violated ({residuals['relation']:.3g})")
    return SymmetryWitness(Z, U, U_inv, residuals, tuple(states))
