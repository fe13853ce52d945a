"""Numerical tolerances and resource limits."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ValidationError

#: default cap on the number of dense amplitudes ``d**N``
DEFAULT_BUDGET = 2**24


@dataclass(frozen=True)
class Tolerances:
    """Named tolerances used throughout the library.

    Every field must lie in ``(0, 1)``.
    """

    peripheral: float = 1e-8
    degeneracy: float = 1e-7
    posdef: float = 1e-9
    zero: float = 1e-10
    equiv: float = 1e-6
    relation: float = 1e-8
    projector: float = 1e-9
    mult: float = 1e-7
    state: float = 1e-8

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and 0.0 < v < 1.0):
                raise ValidationError(f"tolerance {f.name}={v!r} not in (0, 1)")

    def replace(self, **overrides) -> "Tolerances":
        names = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - names
        if unknown:
            raise ValidationError(f"unknown tolerance(s): {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **overrides)


DEFAULT_TOL = Tolerances()
