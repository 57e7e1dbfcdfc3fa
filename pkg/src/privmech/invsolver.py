"""Closed-form design for a square, invertible leakage matrix.

With an invertible P_{X|Y} the null space is trivial and nothing can be
disclosed at zero leakage; to second order the utility of a perturbation
L_u = [sqrt P_X]^{-1} J_u is 1/2 eps^2 ||W L_u||^2 with
W = [sqrt P_Y]^{-1} P_{X|Y}^{-1} [sqrt P_X]. The best direction is the
principal right singular vector of W, rescaled to unit l1 norm of J.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from privmech.errors import EpsilonRangeWarning, NotSquare, Singular
from privmech.probkit import (
    RANK_TOL,
    Distribution,
    Mechanism,
    ProblemInstance,
    _frozen,
    mechanism_utility,
)


@dataclass(frozen=True)
class InvertibleSolution:
    w: np.ndarray
    sigma_max: float
    l_star: np.ndarray
    scale: float
    approx_utility: float
    mechanism: Mechanism
    exact_utility: float
    epsilon: float
    log_base: float

    @property
    def approx_utility_nats(self) -> float:
        return self.approx_utility * math.log(self.log_base)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    return -v if nz.size and v[nz[0]] < 0 else v


def solve_invertible(inst: ProblemInstance, eps: float) -> InvertibleSolution:
    if not inst.is_square:
        raise NotSquare(f"leakage is {inst.nx}x{inst.ny}, expected square")
    lk = inst.leakage.matrix
    if np.linalg.svd(lk, compute_uv=False)[-1] <= RANK_TOL:
        raise Singular("leakage matrix is singular")
    sqrt_px = np.sqrt(inst.p_x.probs)
    sqrt_py = np.sqrt(inst.p_y.probs)
    w = np.diag(1 / sqrt_py) @ np.linalg.inv(lk) @ np.diag(sqrt_px)
    _, s, vt = np.linalg.svd(w)
    sigma = float(s[0])
    l_star = _fix_sign(vt[0])
    scale = float(np.abs(sqrt_px * l_star).sum())
    j = sqrt_px * l_star / scale

    p_inv = np.linalg.inv(lk)
    posts = [inst.p_y.probs + eps * p_inv @ j, inst.p_y.probs - eps * p_inv @ j]
    lowest = min(p.min() for p in posts)
    if lowest < 0:
        # beyond this eps the constructed posteriors stop being distributions
        limit = inst.p_y.probs.min() / np.abs(p_inv @ j).max()
        warnings.warn(
            f"epsilon={eps:g} exceeds the first-order validity limit {limit:.4g}",
            EpsilonRangeWarning,
            stacklevel=2,
        )
        raise ValueError(f"epsilon={eps:g} makes a posterior negative ({lowest:.3g})")
    mech = Mechanism(
        Distribution([0.5, 0.5]),
        tuple(Distribution(p) for p in posts),
        (j, -j),
        epsilon=float(eps),
    )
    nats = 0.5 * eps**2 * sigma**2 / scale**2
    return InvertibleSolution(
        w=_frozen(w),
        sigma_max=sigma,
        l_star=_frozen(l_star),
        scale=scale,
        approx_utility=nats / math.log(inst.log_base),
        mechanism=mech,
        exact_utility=mechanism_utility(mech, inst),
        epsilon=float(eps),
        log_base=inst.log_base,
    )
