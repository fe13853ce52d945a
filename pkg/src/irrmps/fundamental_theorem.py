"""Gauge equivalence of MPS families.

Two tensors generate proportional families iff their bases of periodic
blocks are equivalent, and equal families iff in addition the multiplicities
agree up to per-block roots of unity.  The witnesses are built on the
assembled decompositions and then checked against the brute-force oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _linalg as la
from .config import DEFAULT_BUDGET, DEFAULT_TOL, Tolerances
from .errors import BudgetExceeded, DimensionMismatch, IllConditioned, InconsistentWitness, InsufficientData
from .irreducible_form import BlockDecomposition, assemble, decompose, find_block_equivalence
from .mps_core import MpsTensor, contract_state, transfer

__all__ = [
    "BasisMatching",
    "GaugeRelation",
    "compare_proportional",
    "compare_equal",
    "compare_equal_verdict",
    "state_residuals",
    "match_multisets",
    "multiset_from_power_sums",
    "power_sum_tail_match",
]


@dataclass(frozen=True, eq=False)
class BasisMatching:
    """Bijection between the bases of two decompositions.

    ``pairs[t] = (j, k, xi, Y)`` means ``A_j[i] = exp(i xi) Y B_k[i] Y^H``.
    """

    dec_a: BlockDecomposition
    dec_b: BlockDecomposition
    pairs: tuple

    def partner(self, j: int):
        for pj, k, xi, Y in self.pairs:
            if pj == j:
                return k, xi, Y
        raise KeyError(j)


@dataclass(frozen=True, eq=False)
class GaugeRelation:
    """Witness ``Z A[i] = Y B[i] Y^-1`` on the assembled decompositions.

    ``Z`` is diagonal, a root of unity of order ``m_j`` times the identity on
    every copy of block ``j``; ``Y`` is a block permutation of unitaries
    mapping the assembled bond space of ``B`` onto that of ``A``.
    ``permutations[j][l]`` is the copy of the partner block in ``B`` sent
    to copy ``l`` of block ``j`` in ``A``.  When both decompositions are
    exact, ``Z_in``, ``Y_in`` and ``Y_in_inv`` give the same relation for
    the input tensors.
    """

    matching: BasisMatching
    A_asm: MpsTensor
    B_asm: MpsTensor
    Z: np.ndarray
    Y: np.ndarray
    z_values: tuple
    permutations: tuple
    residuals: dict
    n_checked: tuple
    Z_in: np.ndarray | None = None
    Y_in: np.ndarray | None = None
    Y_in_inv: np.ndarray | None = None

    @property
    def lifted(self) -> bool:
        return self.Z_in is not None


def _check_d(A: MpsTensor, B: MpsTensor):
    if A.d != B.d:
        raise DimensionMismatch(f"physical dimensions differ: {A.d} != {B.d}")


def _match_bases(dec_a, dec_b, tol):
    if len(dec_a.basis) != len(dec_b.basis):
        return None
    used, pairs = set(), []
    for j, P in enumerate(dec_a.basis):
        for k, Q in enumerate(dec_b.basis):
            if k in used:
                continue
            eq = find_block_equivalence(P, Q, tol)
            if eq is not None:
                used.add(k)
                pairs.append((j, k, eq[0], eq[1]))
                break
        else:
            return None
    return pairs


def compare_proportional(A: MpsTensor, B: MpsTensor, tol: Tolerances = DEFAULT_TOL):
    """Match the bases of periodic blocks of ``A`` and ``B``, or return ``None``."""
    _check_d(A, B)
    dec_a, dec_b = decompose(A, tol), decompose(B, tol)
    pairs = _match_bases(dec_a, dec_b, tol)
    if pairs is None:
        return None
    return BasisMatching(dec_a, dec_b, tuple(pairs))


def match_multisets(a, b, rtol: float):
    """Optimal pairing of two complex multisets.

    Returns the permutation ``perm`` (``a[l]`` pairs with ``b[perm[l]]``) if
    every pair agrees within ``rtol`` relative to the larger modulus, else
    ``None``.
    """
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return None
    if a.size == 0:
        return np.zeros(0, dtype=int)
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(a.size, dtype=int)
    perm[rows] = cols
    scale = np.maximum(np.abs(a), np.abs(b[perm]))
    if np.any(np.abs(a - b[perm]) > rtol * np.maximum(scale, 1e-300)):
        return None
    return perm


def _transfer_norm(A: MpsTensor) -> float:
    return float(np.linalg.norm(transfer(A).matrix, 2))


def _state_floor(A: MpsTensor, N: int, e: float | None = None) -> float:
    # |V_N|^2 = tr(E^N) <= D^2 ||E||^N
    if e is None:
        e = _transfer_norm(A)
    return 1e-12 * A.D * e ** (N / 2)


def state_residuals(A: MpsTensor, B: MpsTensor, n_check: int, budget: int = DEFAULT_BUDGET):
    """Relative brute-force state differences ``||V_N(A) - V_N(B)||`` for ``N <= n_check``.

    Returns ``{N: (residual, threshold_scale)}`` where the residual is
    absolute and the scale is ``max(||V_N(A)||, ||V_N(B)||)`` plus a
    roundoff floor.  Site counts over the budget are skipped.
    """
    out = {}
    ea, eb = _transfer_norm(A), _transfer_norm(B)
    for N in range(1, n_check + 1):
        try:
            a = contract_state(A, N, budget).amplitudes
            b = contract_state(B, N, budget).amplitudes
        except BudgetExceeded:
            break
        scale = max(np.linalg.norm(a), np.linalg.norm(b))
        floor = max(_state_floor(A, N, ea), _state_floor(B, N, eb))
        out[N] = (float(np.linalg.norm(a - b)), float(scale), float(floor))
    return out


def _states_agree(res, tol):
    return all(r <= tol.state * s + f for r, s, f in res.values())


def compare_equal_verdict(
    A: MpsTensor,
    B: MpsTensor,
    tol: Tolerances = DEFAULT_TOL,
    n_check: int = 8,
    budget: int = DEFAULT_BUDGET,
):
    """Like :func:`compare_equal` but also names the failing stage.

    Returns ``(relation, stage)`` with ``stage`` one of ``None``,
    ``"basis"`` or ``"multiplicity"``.
    """
    matching = compare_proportional(A, B, tol)
    if matching is None:
        return None, "basis"
    dec_a, dec_b = matching.dec_a, matching.dec_b
    mult_a, mult_b = dec_a.multiplicities, dec_b.multiplicities

    slices_a = dec_a.block_slices()
    slices_b = dec_b.block_slices()
    # assembled positions of the copies of each block
    pos_a = [[sl for j2, sl in slices_a if j2 == j] for j in range(len(dec_a.basis))]
    pos_b = [[sl for k2, sl in slices_b if k2 == k] for k in range(len(dec_b.basis))]

    Da = sum(sl.stop - sl.start for _, sl in slices_a)
    Db = sum(sl.stop - sl.start for _, sl in slices_b)
    if Da != Db:
        return None, "multiplicity"
    Zd = np.zeros(Da, dtype=complex)
    Y = np.zeros((Da, Db), dtype=complex)
    z_values, perms = [], []
    for j in range(len(dec_a.basis)):
        k, xi, Yk = matching.partner(j)
        m = dec_a.basis[j].m
        mu = np.asarray(mult_a[j])
        nu = np.asarray(mult_b[k]) * np.exp(-1j * xi)
        perm = match_multisets(mu**m, nu**m, tol.mult)
        if perm is None:
            return None, "multiplicity"
        zs = []
        for l, sl in enumerate(pos_a[j]):
            z = nu[perm[l]] / mu[l]
            root, _ = la.nearest_root_of_unity(z, m)
            if abs(z - root) > 10 * tol.mult:
                return None, "multiplicity"
            zs.append(root)
            Zd[sl] = root
            Y[sl, pos_b[k][perm[l]]] = Yk
        z_values.append(tuple(complex(z) for z in zs))
        perms.append(tuple(int(p) for p in perm))

    A_asm, B_asm = assemble(dec_a), assemble(dec_b)
    Z = np.diag(Zd)
    Yinv = Y.conj().T
    rel = la.max_rel_residual(Z @ A_asm.mats, Y @ B_asm.mats @ Yinv)
    comm = la.max_rel_residual(Z @ A_asm.mats, A_asm.mats @ Z)
    roots = max(
        (abs(z ** dec_a.basis[j].m - 1) for j, zs in enumerate(z_values) for z in zs), default=0.0
    )
    residuals = {"relation": rel, "commutator": comm, "root_of_unity": float(roots)}
    if rel > tol.relation or comm > tol.projector or roots > tol.projector:
        raise InconsistentWitness(f"assembled witness residuals too large: {residuals}")

    Z_in = Y_in = Y_in_inv = None
    if dec_a.exact and dec_b.exact and A.D == Da and B.D == Db:
        Ga, Ha = dec_a.assembly_gauge
        Gb, Hb = dec_b.assembly_gauge
        Z_in, Y_in, Y_in_inv = Ha @ Z @ Ga, Ha @ Y @ Gb, Hb @ Yinv @ Ga
        residuals["lifted_relation"] = la.max_rel_residual(Z_in @ A.mats, Y_in @ B.mats @ Y_in_inv)
        residuals["lifted_commutator"] = la.max_rel_residual(Z_in @ A.mats, A.mats @ Z_in)

    states = state_residuals(A, B, n_check, budget)
    if not _states_agree(states, tol):
        raise InconsistentWitness("witness built but the generated states differ")
    residuals["states"] = max((r / max(s, f) for r, s, f in states.values()), default=0.0)

    relation = GaugeRelation(
        matching=matching,
        A_asm=A_asm,
        B_asm=B_asm,
        Z=Z,
        Y=Y,
        z_values=tuple(z_values),
        permutations=tuple(perms),
        residuals=residuals,
        n_checked=tuple(states),
        Z_in=Z_in,
        Y_in=Y_in,
        Y_in_inv=Y_in_inv,
    )
    return relation, None


def compare_equal(
    A: MpsTensor,
    B: MpsTensor,
    tol: Tolerances = DEFAULT_TOL,
    n_check: int = 8,
    budget: int = DEFAULT_BUDGET,
):
    """Witness ``(Z, Y)`` that ``A`` and ``B`` generate the same family, or ``None``.

    Parameters
    ----------
    A, B : MpsTensor
        Tensors with equal physical dimension.
    n_check : int
        Largest site count for the brute-force state check.

    Returns
    -------
    GaugeRelation or None

    Raises
    ------
    InconsistentWitness
        If witnesses are built but fail verification.
    """
    return compare_equal_verdict(A, B, tol, n_check, budget)[0]


# -- moments ------------------------------------------------------------------

def _elementary_from_power_sums(p):
    n = len(p)
    e = np.zeros(n + 1, dtype=complex)
    e[0] = 1.0
    for k in range(1, n + 1):
        acc = 0j
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * p[i - 1]
        e[k] = acc / k
    return e


def _average_clusters(roots, tol=1e-6):
    """Replace tight clusters by their mean, which is far better conditioned."""
    roots = np.array(roots, dtype=complex)
    done = np.zeros(roots.size, dtype=bool)
    for a in range(roots.size):
        if done[a]:
            continue
        close = (~done) & (np.abs(roots - roots[a]) <= tol * max(1.0, abs(roots[a])))
        roots[close] = roots[close].mean()
        done |= close
    return roots


def multiset_from_power_sums(p, n: int | None = None, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Recover ``{mu_l}`` from ``p_N = sum_l mu_l**N`` for ``N = 1..n``.

    Zero roots (fewer than ``n`` values) are discarded.  The result is
    sorted by real then imaginary part.

    Raises
    ------
    IllConditioned
        If the recovered roots reproduce the power sums only to worse than
        ``1e-6`` relative.
    """
    p = np.asarray(p, dtype=complex)
    if n is None:
        n = p.size
    if n < 1 or p.size < n:
        raise InsufficientData(f"need {n} power sums, got {p.size}")
    p = p[:n]
    e = _elementary_from_power_sums(p)
    big = max(1.0, float(np.max(np.abs(e))))
    s = n
    while s > 0 and abs(e[s]) <= 1e-9 * big:
        s -= 1
    if s == 0:
        roots = np.zeros(0, dtype=complex)
    else:
        coeffs = np.array([(-1) ** k * e[k] for k in range(s + 1)])
        roots = _average_clusters(np.roots(coeffs))
        roots = roots[np.abs(roots) > tol.zero]
    N = np.arange(1, n + 1)
    recon = (roots[None, :] ** N[:, None]).sum(axis=1) if roots.size else np.zeros(n)
    res = float(np.max(np.abs(recon - p) / np.maximum(1.0, np.abs(p))))
    if res > 1e-6:
        raise IllConditioned(f"power sums reproduced only to {res:.3g}")
    order = np.lexsort((np.round(roots.imag, 9), np.round(roots.real, 9)))
    return roots[order]


def _tail_multiset(p, N0: int, k1: int, tol: Tolerances):
    """Values ``mu`` from a power-sum table ``p[t] = p_{N0 + t}`` via strides ``k1, k1 + 1``."""
    k2 = k1 + 1
    L = len(p)

    def get(N):
        t = N - N0
        if t < 0 or t >= L:
            raise InsufficientData(f"power sum p_{N} not in the table (N0={N0}, length {L})")
        return p[t]

    # strided power sums p_{n k1} give the multiset {mu^k1}.  The size is the
    # smallest n whose recovery reproduces every later sample, so at least
    # one spare sample certifies it.
    n_max = (N0 + L - 1) // k1
    if n_max < 2:
        raise InsufficientData("table too short for the chosen strides")
    samples = np.array([get(n * k1) for n in range(1, n_max + 1)])
    xs = None
    for n in range(0, n_max):
        try:
            cand = multiset_from_power_sums(samples[:n], tol=tol) if n else np.zeros(0, dtype=complex)
        except IllConditioned:
            continue
        N = np.arange(1, n_max + 1)
        recon = (cand[None, :] ** N[:, None]).sum(axis=1) if cand.size else np.zeros(n_max)
        if np.all(np.abs(recon - samples) <= 1e-8 * np.maximum(1.0, np.abs(samples))):
            xs = cand
            break
    if xs is None:
        raise InsufficientData("table too short to certify the multiset size")
    if xs.size == 0:
        return xs
    groups = []
    for x in xs:
        for g in groups:
            if abs(g[0] - x) <= 1e-6 * max(1.0, abs(x)):
                g[1] += 1
                break
        else:
            groups.append([x, 1])
    xv = np.array([g[0] for g in groups])
    cmax = max(g[1] for g in groups)
    r = xv.size
    # p_{j k2 + n k1} = sum_x x^n (sum_{l in x} mu_l^{j k2})
    V = xv[None, :] ** np.arange(r)[:, None]
    sums = np.zeros((cmax, r), dtype=complex)
    for j in range(1, cmax + 1):
        rhs = np.array([get(j * k2 + n * k1) for n in range(r)])
        sums[j - 1] = np.linalg.solve(V, rhs)
    out = []
    for c, (x, size) in enumerate(groups):
        ys = multiset_from_power_sums(sums[:size, c], tol=tol)
        if ys.size != size:
            raise IllConditioned("cluster sizes inconsistent across strides")
        # Bezout with k2 - k1 = 1: mu = mu^k2 / mu^k1
        out.extend(ys / x)
    return np.array(out)


def power_sum_tail_match(p, q, N0: int, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Decide whether two power-sum tables from ``N0`` on stem from one multiset.

    ``p[t]`` and ``q[t]`` are ``sum_l mu_l**(N0 + t)`` for the two unknown
    multisets of nonzero numbers.  Both multisets are recovered from the
    coprime strides ``k1 = N0`` and ``k2 = N0 + 1`` and compared within
    ``1e-7``.

    Raises
    ------
    InsufficientData
        If the tables do not reach the required indices.
    """
    if N0 < 1:
        raise InsufficientData("N0 must be at least 1")
    p, q = np.asarray(p, dtype=complex), np.asarray(q, dtype=complex)
    a = _tail_multiset(p, N0, N0, tol)
    b = _tail_multiset(q, N0, N0, tol)
    return match_multisets(a, b, 1e-7) is not None
