"""First-order expansion of the entropy of a perturbed vertex.

For a vertex ``t + eps * h @ J`` with strictly positive ``t``::

    H(t + eps*h@J) = -(b + eps * a @ J) + o(eps)

with ``l = log t``, ``b = l @ t`` and ``a = l @ h``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from privmech.errors import ZeroBasePoint
from privmech.probkit import _frozen, log
from privmech.rowspace import TOL_POS, OmegaRecord


@dataclass(frozen=True)
class EntropyCoefficients:
    l: np.ndarray
    b: float
    a: np.ndarray
    base: float = 2.0


def entropy_coefficients(rec: OmegaRecord, base: float = 2.0) -> EntropyCoefficients:
    if rec.t.min() <= TOL_POS:
        raise ZeroBasePoint(f"omega={rec.omega} has a non-positive base point entry")
    l = log(rec.t, base)
    return EntropyCoefficients(l=_frozen(l), b=float(l @ rec.t), a=_frozen(l @ rec.h), base=base)


def approx_entropy(coef: EntropyCoefficients, j, eps: float) -> float:
    return -(coef.b + eps * float(coef.a @ np.asarray(j, dtype=float)))


class CoefficientCache:
    """Memoises coefficients per (omega, base); records are reused across every combination."""

    def __init__(self):
        self._store = {}

    def get(self, rec: OmegaRecord, base: float) -> EntropyCoefficients:
        key = (rec.omega, base)
        if key not in self._store:
            self._store[key] = entropy_coefficients(rec, base)
        return self._store[key]

    def __len__(self):
        return len(self._store)
