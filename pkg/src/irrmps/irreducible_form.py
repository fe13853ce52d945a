"""Irreducible form of an arbitrary tensor.

:func:`decompose` splits a tensor along common invariant subspaces until
every piece carries an irreducible CP map, drops nilpotent pieces,
normalizes each piece to spectral radius one, gauges it to form II and
groups repeated pieces (equal up to a phase and a unitary) under one basis
element.  The result generates exactly the same family of vectors as the
input.

Off-diagonal couplings between an invariant subspace and its complement are
dropped; they never contribute to a trace of products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _linalg as la
from .config import DEFAULT_TOL, Tolerances
from .cp_maps import (
    PeriodStructure,
    dual_map,
    period,
    spectral_data,
    to_form_ii,
    top_of_chain,
    unit_spectral_projector,
)
from .errors import DecompositionError, InconsistentWitness, ZeroTensor
from .mps_core import MpsTensor, transfer

__all__ = [
    "PeriodicBlock",
    "BlockComponent",
    "BlockDecomposition",
    "periodic_block",
    "decompose",
    "find_block_equivalence",
    "assemble",
]


@dataclass(frozen=True, eq=False)
class PeriodicBlock:
    """Irreducible block of spectral radius one in form II."""

    tensor: MpsTensor
    m: int
    period_structure: PeriodStructure

    @property
    def dim(self) -> int:
        return self.tensor.D


@dataclass(frozen=True, eq=False)
class BlockComponent:
    """One copy ``mu * A_j`` of a basis block inside the input tensor.

    ``restrict @ A[i] @ extend == multiplicity * basis[j].tensor[i]`` holds
    exactly for the input ``A`` and ``restrict @ extend`` is the identity.
    """

    block: int
    multiplicity: complex
    restrict: np.ndarray
    extend: np.ndarray


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    """Grouped irreducible form ``A[i] ~ sum_j R_j (x) A_j[i]``.

    ``exact`` is true when no coupling was dropped and no nilpotent part
    discarded; then :attr:`assembly_gauge` is a similarity between the
    input and the assembled tensor.
    """

    basis: tuple
    components: tuple
    input_dim: int
    exact: bool

    @property
    def multiplicities(self) -> list[list[complex]]:
        out = [[] for _ in self.basis]
        for c in self.components:
            out[c.block].append(c.multiplicity)
        return out

    @property
    def ordered_components(self) -> list[BlockComponent]:
        """Components in assembled order (block by block, copies in order)."""
        return [c for j in range(len(self.basis)) for c in self.components if c.block == j]

    @property
    def bond_dimension(self) -> int:
        return sum(self.basis[c.block].dim for c in self.components)

    @property
    def assembly_gauge(self) -> tuple[np.ndarray, np.ndarray]:
        """``(G, H)`` with ``assemble(dec)[i]`` the block diagonal of ``G A[i] H``."""
        comps = self.ordered_components
        G = np.vstack([c.restrict for c in comps])
        H = np.hstack([c.extend for c in comps])
        return G, H

    def block_slices(self) -> list[tuple[int, slice]]:
        """``(block index, bond slice)`` of each component in assembled order."""
        out, o = [], 0
        for c in self.ordered_components:
            D = self.basis[c.block].dim
            out.append((c.block, slice(o, o + D)))
            o += D
        return out


def periodic_block(A: MpsTensor, tol: Tolerances = DEFAULT_TOL) -> PeriodicBlock:
    """Wrap an irreducible radius-one tensor as a :class:`PeriodicBlock`.

    Tensors whose dual map is already unital are kept as they are; others
    are first brought to form II.
    """
    if np.linalg.norm(dual_map(A, np.eye(A.D)) - np.eye(A.D)) > tol.projector * 10:
        A, _ = to_form_ii(A, tol)
    m, ps = period(A, tol)
    return PeriodicBlock(A, m, ps)


def find_block_equivalence(P: PeriodicBlock, Q: PeriodicBlock, tol: Tolerances = DEFAULT_TOL):
    """Return ``(xi, Y)`` with ``P[i] = exp(i xi) Y Q[i] Y^-1`` and ``Y`` unitary,
    or ``None`` if the blocks are not repeated.

    ``Y`` is only defined up to the commutant of the block and ``xi`` up to
    multiples of ``2 pi / m``.
    """
    if P.dim != Q.dim or P.m != Q.m:
        return None
    E = transfer(P.tensor, Q.tensor).matrix
    w, VL, V = la.eig(E, left=True)
    k = int(np.argmax(np.abs(w)))
    lam = w[k]
    if abs(lam) < 1.0 - tol.equiv:
        return None
    den = np.vdot(VL[:, k], V[:, k])
    if abs(den) > 1e-12:
        lam = np.vdot(VL[:, k], E @ V[:, k]) / den
    xi = float(np.angle(lam))
    # intertwiner as the least singular vector of X -> P[i] X - e^{i xi} X Q[i]
    n = P.dim
    I = np.eye(n)
    J = np.vstack(
        [np.kron(a, I) - np.exp(1j * xi) * np.kron(I, b.T) for a, b in zip(P.tensor.mats, Q.tensor.mats)]
    )
    Y = la.polar_unitary(np.linalg.svd(J)[2][-1].conj().reshape(n, n))
    rhs = np.exp(1j * xi) * (Y @ Q.tensor.mats @ Y.conj().T)
    res = la.max_rel_residual(P.tensor.mats, rhs)
    if res > tol.relation:
        raise InconsistentWitness(
            f"mixed transfer eigenvalue {lam:.6g} on the unit circle but relation residual {res:.3g}"
        )
    return xi, Y


@dataclass
class _Leaf:
    mats: np.ndarray
    G: np.ndarray
    H: np.ndarray


@dataclass
class _State:
    ref: float
    tol: Tolerances
    leaves: list = field(default_factory=list)
    exact: bool = True


def _refine_invariant(mats, K, C, steps=3):
    """Newton steps on ``C^H A[i] (K + C X) = X K^H A[i] (K + C X)``."""
    n, k = K.shape
    if k == 0 or k == n:
        return K, C
    def leak(K, C):
        return np.max(np.abs(C.conj().T @ mats @ K))

    cur = leak(K, C)
    for _ in range(steps):
        if cur < 1e-15 * max(1.0, np.max(np.abs(mats))):
            break
        L = C.conj().T @ mats @ K
        Acc = C.conj().T @ mats @ C
        Akk = K.conj().T @ mats @ K
        Ik, Ic = np.eye(k), np.eye(n - k)
        # row-major vec: vec(P X Q) = kron(P, Q^T) vec(X)
        J = np.vstack([np.kron(a, Ik) - np.kron(Ic, b.T) for a, b in zip(Acc, Akk)])
        X = np.linalg.lstsq(J, -L.reshape(-1), rcond=1e-8)[0].reshape(n - k, k)
        K2 = np.linalg.qr(K + C @ X)[0]
        C2 = la.orth_complement(K2, n)
        new = leak(K2, C2)
        if new >= cur:
            break
        K, C, cur = K2, C2, new
    return K, C


def _split_along(mats, G, H, K, C, st: _State):
    """Recurse on the diagonal blocks for the invariant subspace ``K``."""
    scale = max(1.0, np.max(np.abs(mats)))
    K, C = _refine_invariant(mats, K, C)
    leak = max(np.linalg.norm(C.conj().T @ a @ K) for a in mats)
    if leak > 1e-6 * scale:
        raise DecompositionError(f"subspace is not invariant (leak {leak:.3g})")
    b = K.conj().T @ mats @ C
    coupling = max(np.linalg.norm(x) for x in b)
    left_k, right_c = K.conj().T, C
    if coupling > 1e-9 * scale:
        X = _complement_shift(K.conj().T @ mats @ K, C.conj().T @ mats @ C, b, scale)
        if X is None:
            st.exact = False
        else:
            # oblique basis [K, C + K X] block-diagonalizes every matrix
            left_k, right_c = K.conj().T - X @ C.conj().T, C + K @ X
    pieces = [(left_k, K), (C.conj().T, right_c)]
    for L, R in sorted(pieces, key=lambda lr: lr[1].shape[1]):
        _split(L @ mats @ R, L @ G, H @ R, st)


def _complement_shift(a, c, b, scale):
    """Common solution of ``a[i] X - X c[i] = -b[i]``, or ``None`` if there is none."""
    k, q = a.shape[1], c.shape[1]
    # row-major vec: vec(P X Q) = kron(P, Q^T) vec(X)
    J = np.vstack([np.kron(ai, np.eye(q)) - np.kron(np.eye(k), ci.T) for ai, ci in zip(a, c)])
    rhs = -b.reshape(-1)
    x = np.linalg.lstsq(J, rhs, rcond=None)[0]
    if np.linalg.norm(x) > 1e6 or np.linalg.norm(J @ x - rhs) > 1e-10 * scale * max(1.0, np.linalg.norm(b)):
        return None
    return x.reshape(k, q)


def _split(mats, G, H, st: _State):
    tol = st.tol
    n = mats.shape[1]
    E = transfer(MpsTensor(mats)).matrix
    r = float(np.max(np.abs(la.eigvals(E))))
    if r <= tol.zero * st.ref:
        st.exact = False
        return
    M = E / r
    Pi, k = unit_spectral_projector(M, tol)
    # the cluster mean is well conditioned even when single eigenvalues are not
    c = (np.trace(M @ Pi) / k).real
    r, M = r * c, M / c
    eye = np.eye(n).reshape(-1)
    X = la.herm(top_of_chain(M.conj().T, Pi.conj().T @ eye).reshape(n, n))
    rho = la.herm(top_of_chain(M, Pi @ eye).reshape(n, n))

    for F, is_dual in ((X, True), (rho, False)):
        w, V = np.linalg.eigh(F)
        if w.sum() < 0:
            w, V = -w[::-1], V[:, ::-1]
        small = w <= tol.posdef * np.max(np.abs(w))
        if small.any():
            # kernel of a dual fixed point / support of a forward one is invariant
            inv = small if is_dual else ~small
            _split_along(mats, G, H, V[:, inv], V[:, ~inv], st)
            return

    if k == 1:
        st.leaves.append(_Leaf(mats, G, H))
        return

    # Faithful fixed points on both sides: the dual fixed-point space of the
    # gauged (unital) map is the commutant of the Kraus operators.
    sq, sq_inv = la.psd_sqrt(X)
    gauged = sq @ mats @ sq_inv
    U, s, _ = np.linalg.svd(Pi.conj().T)
    herms = []
    for c in range(k):
        Y = U[:, c].reshape(n, n)
        for h in (la.herm(Y), la.herm(-1j * Y)):
            h = sq_inv @ h @ sq_inv
            herms.append(h - np.trace(h) / n * np.eye(n))
    coeffs = 1.0 + ((np.arange(len(herms)) + 1) * 0.6180339887498949) % 1.0
    Ybar = la.herm(sum(c * h for c, h in zip(coeffs, herms)))
    if np.linalg.norm(Ybar) <= 1e-8:
        raise DecompositionError("degenerate unit eigenvalue without a commutant splitting")
    Ybar /= np.linalg.norm(Ybar)
    w, Q = np.linalg.eigh(Ybar)
    groups = la.cluster_sorted(w, 1e-6)
    if len(groups) < 2:
        raise DecompositionError("commutant element is scalar")
    Gg, Hg = sq @ G, H @ sq_inv
    blocks = [Q[:, g] for g in groups]
    scale = max(1.0, np.max(np.abs(gauged)))
    for a_idx, Qa in enumerate(blocks):
        for b_idx, Qb in enumerate(blocks):
            if a_idx != b_idx:
                leak = max(np.linalg.norm(Qa.conj().T @ a @ Qb) for a in gauged)
                if leak > 1e-6 * scale:
                    raise DecompositionError(f"commutant splitting leaks ({leak:.3g})")
                if leak > 1e-9 * scale:
                    st.exact = False
    for Qa in sorted(blocks, key=lambda Q: Q.shape[1]):
        _split(Qa.conj().T @ gauged @ Qa, Qa.conj().T @ Gg, Hg @ Qa, st)


def _perron_root(mats):
    """Spectral radius of an irreducible piece, refined by a two-sided Rayleigh quotient."""
    E = transfer(MpsTensor(mats)).matrix
    w, vl, vr = la.eig(E, left=True)
    k = int(np.argmax(w.real))
    l, v = vl[:, k], vr[:, k]
    den = np.vdot(l, v)
    if abs(den) < 1e-12:
        return float(np.max(np.abs(w)))
    return float((np.vdot(l, E @ v) / den).real)


def decompose(A: MpsTensor, tol: Tolerances = DEFAULT_TOL) -> BlockDecomposition:
    """Bring ``A`` to grouped irreducible form II."""
    ref = spectral_data(transfer(A), tol).spectral_radius
    if ref <= 0:
        raise ZeroTensor("tensor generates the zero family")
    st = _State(ref=ref, tol=tol)
    D = A.D
    _split(np.array(A.mats), np.eye(D, dtype=complex), np.eye(D, dtype=complex), st)
    if not st.leaves:
        raise ZeroTensor("every block is nilpotent")

    found = []  # (PeriodicBlock, [(mu, G, H)])
    for leaf in st.leaves:
        r = _perron_root(leaf.mats)
        mu = np.sqrt(r)
        Af, gauge = to_form_ii(MpsTensor(leaf.mats / mu), tol)
        m, ps = period(Af, tol)
        blk = PeriodicBlock(Af, m, ps)
        G, H = gauge.S @ leaf.G, leaf.H @ gauge.S_inv
        for rep, comps in found:
            eq = find_block_equivalence(rep, blk, tol)
            if eq is not None:
                xi, Y = eq
                comps.append((mu * np.exp(-1j * xi), Y @ G, H @ Y.conj().T))
                break
        else:
            found.append((blk, [(complex(mu), G, H)]))

    order = sorted(range(len(found)), key=lambda j: (found[j][0].m, found[j][0].dim, j))
    basis, components = [], []
    for new_j, j in enumerate(order):
        blk, comps = found[j]
        basis.append(blk)
        for mu, G, H in comps:
            components.append(BlockComponent(new_j, complex(mu), G, H))
    return BlockDecomposition(tuple(basis), tuple(components), D, st.exact)


def assemble(dec: BlockDecomposition) -> MpsTensor:
    """Block-diagonal tensor ``sum_j R_j (x) A_j``."""
    d = dec.basis[0].tensor.d
    Dt = dec.bond_dimension
    out = np.zeros((d, Dt, Dt), dtype=complex)
    for c, (j, sl) in zip(dec.ordered_components, dec.block_slices()):
        out[:, sl, sl] = c.multiplicity * dec.basis[j].tensor.mats
    return MpsTensor(out)
