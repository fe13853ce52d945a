"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 verification
failure (no match, rejected witness, non-symmetry).

Defaults can be read from a JSON config file named by the ``IRRMPS_CONFIG``
environment variable, e.g. ``{"tolerances": {"state": 1e-9}, "n_check": 6}``;
command-line flags take precedence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import report
from .applications import (
    RefinementWitness,
    check_refinement,
    divisibility_from_refinement,
    refinement_from_divisibility,
    symmetry_gauge,
)
from .config import DEFAULT_BUDGET, DEFAULT_TOL, Tolerances
from .errors import (
    BudgetExceeded,
    InconsistentWitness,
    IrrMpsError,
    NotAWitness,
    NumericalError,
    ValidationError,
)
from .fundamental_theorem import compare_equal_verdict, compare_proportional, state_residuals
from .irreducible_form import assemble, decompose
from .mps_core import block, matrix_from_json, matrix_to_json, tensor_from_json, tensor_to_json

CONFIG_ENV = "IRRMPS_CONFIG"

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


@dataclass(frozen=True)
class RunConfig:
    tolerances: Tolerances = DEFAULT_TOL
    n_check: int = 8
    budget: int = DEFAULT_BUDGET
    out: str | None = None
    format: str = "json"
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_check < 1:
            raise ValidationError("n_check must be >= 1")
        if self.budget < 1:
            raise ValidationError("budget must be >= 1")
        if self.format not in ("json", "text"):
            raise ValidationError("format must be json or text")


class _Verification(Exception):
    """Carries a report for a verification failure (exit code 4)."""

    def __init__(self, doc):
        super().__init__("verification failed")
        self.doc = doc


def _read_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc


def _load_tensor(path):
    try:
        return tensor_from_json(_read_json(path))
    except ValidationError as exc:
        if str(exc).startswith(str(path)):
            raise
        raise ValidationError(f"{path}: {exc}") from exc


def _parse_tol(items):
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--tol expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError as exc:
            raise ValidationError(f"--tol {name}: {value!r} is not a number") from exc
    return out


def build_config(args) -> RunConfig:
    base = {}
    path = os.environ.get(CONFIG_ENV)
    if path:
        base = _read_json(path)
        if not isinstance(base, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
    tol_over = dict(base.get("tolerances", {}))
    tol_over.update(_parse_tol(args.tol))
    try:
        n_check = int(args.n_check if args.n_check is not None else base.get("n_check", 8))
        budget = int(args.budget if args.budget is not None else base.get("budget", DEFAULT_BUDGET))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad integer setting: {exc}") from exc
    try:
        tol = DEFAULT_TOL.replace(**{k: float(v) for k, v in tol_over.items()})
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc
    return RunConfig(
        tolerances=tol,
        n_check=n_check,
        budget=budget,
        out=args.out,
        format=args.format or base.get("format", "json"),
        overrides=tol_over,
    )


# -- text rendering -----------------------------------------------------------

def _fmt_c(z):
    return f"{z[0]:.6g}{z[1]:+.6g}i"


def _text(doc) -> str:
    lines = [f"command: {doc['command']}"]
    cmd = doc["command"]
    if cmd == "canonicalize":
        d = doc["decomposition"]
        lines.append(f"blocks: {len(d['blocks'])}  periods: {d['periods']}  bond dimension: {d['bond_dimension']}")
        for b in d["blocks"]:
            mults = ", ".join(_fmt_c(z) for z in b["multiplicities"])
            lines.append(f"  block {b['index']}: dim {b['dim']}, period {b['period']}, multiplicities [{mults}]")
    elif cmd == "compare":
        lines.append(f"mode: {doc['mode']}  verdict: {doc['verdict']}")
        if doc.get("stage"):
            lines.append(f"failed at stage: {doc['stage']}")
        if "matched_pairs" in doc:
            lines.append(f"matched pairs: {doc['matched_pairs']}")
    elif cmd == "block":
        lines.append(f"p: {doc['p']}  d: {doc['tensor']['d']}  D: {doc['tensor']['D']}")
    else:
        for key in ("verdict", "p", "passed"):
            if key in doc:
                lines.append(f"{key}: {doc[key]}")
        for key in ("residuals", "state_residuals"):
            if key in doc:
                for k, v in doc[key].items():
                    lines.append(f"  {k}: {v}")
    return "\n".join(lines) + "\n"


def _emit(doc, cfg: RunConfig, tensor_only=False):
    if cfg.format == "text" and not tensor_only:
        text = _text(doc)
    elif tensor_only:
        text = report.dumps(doc["tensor"])
    else:
        text = report.dumps(doc)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands -----------------------------------------------------------------

def cmd_canonicalize(args, cfg: RunConfig):
    A = _load_tensor(args.input)
    dec = decompose(A, cfg.tolerances)
    states = state_residuals(A, assemble(dec), cfg.n_check, cfg.budget)
    return {
        "command": "canonicalize",
        "input": {"d": A.d, "D": A.D},
        "decomposition": report.decomposition_report(dec),
        "state_residuals": {str(N): r / max(s, f) for N, (r, s, f) in states.items()},
    }


def cmd_compare(args, cfg: RunConfig):
    A, B = _load_tensor(args.a), _load_tensor(args.b)
    doc = {"command": "compare", "mode": args.mode}
    tol = cfg.tolerances
    if args.mode == "proportional":
        mt = compare_proportional(A, B, tol)
        if mt is None:
            doc.update(verdict="no-match", stage="basis")
            raise _Verification(doc)
        doc.update(verdict="match", stage=None, **report.matching_report(mt))
        return doc
    try:
        rel, stage = compare_equal_verdict(A, B, tol, cfg.n_check, cfg.budget)
    except InconsistentWitness as exc:
        doc.update(verdict="no-match", stage="verification", message=str(exc))
        raise _Verification(doc) from exc
    if rel is None:
        doc.update(verdict="no-match", stage=stage)
        raise _Verification(doc)
    doc.update(verdict="match", stage=None, **report.relation_report(rel))
    return doc


def cmd_block(args, cfg: RunConfig):
    A = _load_tensor(args.input)
    if args.p is None or args.p < 1:
        raise ValidationError("block needs --p >= 1")
    Ap = block(A, args.p, cfg.budget)
    return {"command": "block", "p": args.p, "tensor": tensor_to_json(Ap)}


def _load_witness(path, p_flag):
    doc = _read_json(path)
    if not isinstance(doc, dict) or "W" not in doc:
        raise ValidationError(f"{path}: witness needs fields p and W")
    p = int(doc.get("p", p_flag or 0))
    if p_flag is not None and p_flag != p:
        raise ValidationError(f"--p {p_flag} disagrees with the witness (p = {p})")
    return RefinementWitness(p, matrix_from_json(doc["W"]))


def cmd_refine(args, cfg: RunConfig):
    B, A = _load_tensor(args.b), _load_tensor(args.a)
    tol = cfg.tolerances
    if args.action == "check":
        if not args.witness:
            raise ValidationError("refine check needs --witness")
        W = _load_witness(args.witness, args.p)
        rep = check_refinement(B, A, W, cfg.n_check, cfg.budget, tol)
        doc = {
            "command": "refine-check",
            "p": W.p,
            "passed": rep.passed,
            "residuals": {str(N): r for N, (r, s) in rep.residuals.items()},
            "norms": {str(N): s for N, (r, s) in rep.residuals.items()},
        }
        if not rep.passed:
            raise _Verification(doc)
        return doc
    if args.witness:
        W = _load_witness(args.witness, args.p)
        try:
            dw = divisibility_from_refinement(B, A, W, tol, cfg.n_check, cfg.budget)
        except NotAWitness as exc:
            raise _Verification({"command": "refine-construct", "passed": False, "message": str(exc)}) from exc
        return {
            "command": "refine-construct",
            "direction": "divisibility",
            "p": dw.p,
            "passed": True,
            "root_tensor": tensor_to_json(dw.root_tensor),
            "residuals": {"power": dw.power_residual, "trace_preservation": dw.tp_residual},
        }
    if args.p is None:
        raise ValidationError("refine construct needs --p or --witness")
    try:
        W = refinement_from_divisibility(B, A, args.p, tol, cfg.budget)
    except NotAWitness as exc:
        raise _Verification({"command": "refine-construct", "passed": False, "message": str(exc)}) from exc
    rep = check_refinement(B, A, W, cfg.n_check, cfg.budget, tol)
    return {
        "command": "refine-construct",
        "direction": "refinement",
        "p": W.p,
        "passed": rep.passed,
        "W": matrix_to_json(W.W),
        "residuals": {str(N): r for N, (r, s) in rep.residuals.items()},
    }


def _load_unitary(path, d):
    doc = _read_json(path)
    rows = doc.get("u", doc.get("matrix")) if isinstance(doc, dict) else doc
    if rows is None:
        raise ValidationError(f"{path}: expected a matrix or an object with field u")
    return matrix_from_json(rows, (d, d))


def cmd_symmetry(args, cfg: RunConfig):
    A = _load_tensor(args.input)
    u = _load_unitary(args.unitary, A.d)
    wit = symmetry_gauge(A, u, cfg.tolerances, cfg.n_check, cfg.budget)
    doc = {"command": "symmetry"}
    if wit is None:
        doc["verdict"] = "not-a-symmetry"
        raise _Verification(doc)
    doc.update(
        verdict="symmetry",
        Z=matrix_to_json(wit.Z),
        U=matrix_to_json(wit.U),
        residuals={k: float(v) for k, v in wit.residuals.items()},
        verified_N=list(wit.n_checked),
    )
    return doc


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=int, default=None, help="blocking / refinement length")
    common.add_argument("--n-check", type=int, default=None, help="largest N for brute-force checks")
    common.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a tolerance")
    common.add_argument("--budget", type=int, default=None, help="cap on dense amplitudes d**N")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default=None)

    parser = argparse.ArgumentParser(prog="irrmps", description="Irreducible forms of MPS tensors.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("canonicalize", parents=[common], help="irreducible form II of a tensor")
    sp.add_argument("input")
    sp.set_defaults(func=cmd_canonicalize)

    sp = sub.add_parser("compare", parents=[common], help="compare the families of two tensors")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("--mode", choices=("proportional", "equal"), default="equal")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("block", parents=[common], help="block p sites into one")
    sp.add_argument("input")
    sp.set_defaults(func=cmd_block)

    sp = sub.add_parser("refine", parents=[common], help="refinement / divisibility witnesses")
    sp.add_argument("action", choices=("check", "construct"))
    sp.add_argument("b", help="coarse tensor B")
    sp.add_argument("a", help="fine tensor A")
    sp.add_argument("--witness", default=None, help="refinement witness file {p, W}")
    sp.set_defaults(func=cmd_refine)

    sp = sub.add_parser("symmetry", parents=[common], help="witness for a local symmetry")
    sp.add_argument("input")
    sp.add_argument("unitary", help="JSON file with the d x d unitary")
    sp.set_defaults(func=cmd_symmetry)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = build_config(args)
        doc = args.func(args, cfg)
        _emit(doc, cfg, tensor_only=(args.command == "block" and cfg.format == "json"))
        return EXIT_OK
    except _Verification as exc:
        _emit(exc.doc, cfg)
        return EXIT_VERIFY
    except (ValidationError, BudgetExceeded) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NotAWitness as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (NumericalError, IrrMpsError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
