"""Two-image watermark instance family indexed by the image correlation alpha.

Y = (Y1, Y2) takes the four values (1,1), (1,2), (2,1), (2,2) labelled 1..4
and X is the binary label. Distributions are exact rationals in alpha.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from privmech.probkit import ProblemInstance


@dataclass(frozen=True)
class WatermarkParams:
    alpha: float = 0.0

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


def watermark_distributions(alpha) -> tuple[list[Fraction], list[list[Fraction]]]:
    """Unreduced (P_Y, P_{X|Y}) as exact fractions; P_{X|Y} rows are X=1, X=2."""
    a = Fraction(alpha).limit_denominator(10**9) if isinstance(alpha, float) else Fraction(alpha)
    p_y = [
        Fraction(11, 100) * a + Fraction(107, 300),
        Fraction(7, 50) * a + Fraction(59, 150),
        Fraction(11, 100) * (1 - a),
        Fraction(7, 50) * (1 - a),
    ]
    row1 = [
        (9 * a + 51) / (33 * a + 107),
        (18 * a + 42) / (21 * a + 59),
        Fraction(3, 11),
        Fraction(6, 7),
    ]
    return p_y, [row1, [1 - v for v in row1]]


def watermark_instance(params: WatermarkParams | float, log_base=2.0) -> ProblemInstance:
    """Build the instance; zero-mass Y symbols (alpha = 1) are dropped.

    The retained symbols keep their original labels in ``y_values``, so the
    index map back to {1,2,3,4} is ``y_values - 1``.
    """
    alpha = params.alpha if isinstance(params, WatermarkParams) else WatermarkParams(params).alpha
    p_y, leak = watermark_distributions(alpha)
    keep = [k for k, p in enumerate(p_y) if p > 0]
    py = np.array([float(p_y[k]) for k in keep])
    lk = np.array([[float(row[k]) for k in keep] for row in leak])
    return ProblemInstance.from_arrays(
        lk,
        py,
        x_values=np.array([1.0, 2.0]),
        y_values=np.array([k + 1.0 for k in keep]),
        log_base=log_base,
    )
