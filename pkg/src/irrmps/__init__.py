"""Irreducible forms of translationally invariant MPS tensors.

Decomposition into periodic blocks, gauge witnesses for equal or
proportional families, and refinement, divisibility and symmetry
constructions, all checked against brute-force state contraction.
"""

from .applications import (
    RefinementWitness,
    check_divisibility,
    check_refinement,
    divisibility_from_refinement,
    refinement_from_divisibility,
    symmetry_gauge,
)
from .config import DEFAULT_BUDGET, DEFAULT_TOL, Tolerances
from .cp_maps import fixed_point, is_irreducible, period, spectral_data, to_form_ii
from .fundamental_theorem import (
    compare_equal,
    compare_proportional,
    multiset_from_power_sums,
    power_sum_tail_match,
)
from .irreducible_form import assemble, decompose, find_block_equivalence
from .mps_core import MpsTensor, block, contract_state, overlap, transfer

__version__ = "0.1.0"

__all__ = [
    "MpsTensor",
    "contract_state",
    "block",
    "transfer",
    "overlap",
    "spectral_data",
    "fixed_point",
    "is_irreducible",
    "period",
    "to_form_ii",
    "decompose",
    "assemble",
    "find_block_equivalence",
    "compare_proportional",
    "compare_equal",
    "multiset_from_power_sums",
    "power_sum_tail_match",
    "RefinementWitness",
    "check_refinement",
    "check_divisibility",
    "refinement_from_divisibility",
    "divisibility_from_refinement",
    "symmetry_gauge",
    "Tolerances",
    "DEFAULT_TOL",
    "DEFAULT_BUDGET",
]
