"""Deterministic JSON reports.

Floats are written with 17 significant digits, keys in insertion order,
and ``-0.0`` normalized to ``0.0`` so that identical runs give identical
bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .fundamental_theorem import BasisMatching, GaugeRelation
from .irreducible_form import BlockDecomposition
from .mps_core import matrix_to_json, tensor_to_json


def _float(x: float) -> str:
    x = float(x)
    if x == 0.0:
        x = 0.0
    if not np.isfinite(x):
        raise ValueError("non-finite value in report")
    s = f"{x:.17g}"
    if "e" not in s and "." not in s and "inf" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 1) -> str:
    """Serialize ``obj`` (dicts, lists, str, int, float, bool, None, numpy scalars)."""
    out: list[str] = []

    def emit(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, dict):
            if not o:
                out.append("{}")
                return
            out.append("{\n")
            for n, (k, v) in enumerate(o.items()):
                out.append(pad + json.dumps(str(k)) + ": ")
                emit(v, level + 1)
                out.append(",\n" if n < len(o) - 1 else "\n")
            out.append(end + "}")
        elif isinstance(o, (list, tuple)):
            if not o:
                out.append("[]")
                return
            # short numeric rows stay on one line
            if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in o):
                out.append("[" + ", ".join(_scalar(v) for v in o) + "]")
                return
            out.append("[\n")
            for n, v in enumerate(o):
                out.append(pad)
                emit(v, level + 1)
                out.append(",\n" if n < len(o) - 1 else "\n")
            out.append(end + "]")
        else:
            out.append(_scalar(o))

    emit(obj, 0)
    return "".join(out) + "\n"


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _float(v)
    if isinstance(v, str):
        return json.dumps(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def cpair(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def decomposition_report(dec: BlockDecomposition) -> dict:
    blocks = []
    for j, blk in enumerate(dec.basis):
        blocks.append(
            {
                "index": j,
                "dim": blk.dim,
                "period": blk.m,
                "multiplicities": [cpair(mu) for mu in dec.multiplicities[j]],
                "tensor": tensor_to_json(blk.tensor),
                "projectors": [matrix_to_json(P) for P in blk.period_structure.projectors],
            }
        )
    return {
        "input_dim": dec.input_dim,
        "bond_dimension": dec.bond_dimension,
        "exact": dec.exact,
        "periods": [b.m for b in dec.basis],
        "blocks": blocks,
    }


def matching_report(mt: BasisMatching) -> dict:
    return {
        "matched_pairs": [[j, k] for j, k, _, _ in mt.pairs],
        "xi": [float(xi) for _, _, xi, _ in mt.pairs],
        "Y_blocks": [matrix_to_json(Y) for _, _, _, Y in mt.pairs],
    }


def relation_report(rel: GaugeRelation) -> dict:
    out = matching_report(rel.matching)
    out.update(
        {
            "Z_diagonal": [cpair(z) for z in np.diag(rel.Z)],
            "z_per_copy": [[cpair(z) for z in zs] for zs in rel.z_values],
            "permutations": [list(p) for p in rel.permutations],
            "Y": matrix_to_json(rel.Y),
            "lifted": rel.lifted,
            "residuals": {k: float(v) for k, v in rel.residuals.items()},
            "verified_N": list(rel.n_checked),
        }
    )
    if rel.lifted:
        out["Z_input_basis"] = matrix_to_json(rel.Z_in)
        out["Y_input_basis"] = matrix_to_json(rel.Y_in)
    return out
