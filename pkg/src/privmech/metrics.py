"""Estimation-theoretic utility and privacy measures of a mechanism."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from privmech.errors import InvalidEta, MissingValues, NotBinary, NotZeroMean
from privmech.probkit import Distribution, Mechanism, ProblemInstance, mechanism_utility


@dataclass(frozen=True)
class TradeoffPoint:
    param: float
    utility_mi: float
    map_error: float
    mmse_y_norm: float
    mmse_x_norm: float

    def __post_init__(self):
        if not -1e-12 <= self.map_error <= 1 + 1e-12:
            raise ValueError(f"MAP error {self.map_error} outside [0, 1]")
        for v in (self.mmse_y_norm, self.mmse_x_norm):
            if not -1e-12 <= v <= 1 + 1e-9:
                raise ValueError(f"normalised MMSE {v} outside [0, 1]")


def map_error(m: Mechanism, inst: ProblemInstance | None = None) -> float:
    """Error probability of guessing Y from U with the MAP rule."""
    post = m.posterior_matrix()
    return float(1.0 - (m.p_u.probs * post.max(axis=0)).sum())


def _target(m: Mechanism, inst: ProblemInstance, target: str):
    target = target.upper()
    if target == "Y":
        values, post, prior = inst.y_values, m.posterior_matrix(), inst.p_y.probs
    elif target == "X":
        values, post, prior = inst.x_values, inst.leakage.matrix @ m.posterior_matrix(), inst.p_x.probs
    else:
        raise ValueError(f"target must be 'X' or 'Y', got {target!r}")
    if values is None:
        raise MissingValues(f"no numeric labels for {target}")
    return np.asarray(values, dtype=float), post, prior


def variance(values, probs) -> float:
    v = np.asarray(values, dtype=float)
    p = np.asarray(probs, dtype=float)
    mean = p @ v
    return float(p @ (v - mean) ** 2)


def mmse(m: Mechanism, inst: ProblemInstance, target: str = "Y", normalized: bool = False) -> float:
    """sum_u P_U(u) (E[T^2 | U=u] - E[T | U=u]^2) for T = X or Y."""
    values, post, prior = _target(m, inst, target)
    cond_mean = values @ post
    cond_sq = (values**2) @ post
    val = float(m.p_u.probs @ (cond_sq - cond_mean**2))
    val = max(val, 0.0)
    if normalized:
        return val / variance(values, prior)
    return val


def mmse_lower_bound(p_x, x_values, eps: float) -> float:
    """Var(X) - eps^2 (x1 - x2)^2 / 4 for a zero-mean binary X under the l1 criterion."""
    p = np.asarray(p_x, dtype=float)
    x = np.asarray(x_values, dtype=float)
    if p.size != 2 or x.size != 2:
        raise NotBinary("the bound needs a binary private variable")
    if abs(p @ x) > 1e-9:
        raise NotZeroMean(f"E[X] = {p @ x:.3g}, expected 0")
    return variance(x, p) - 0.25 * eps**2 * (x[0] - x[1]) ** 2


@dataclass(frozen=True)
class ErasureBaseline:
    bound: float
    delta: float
    mechanism: Mechanism


def erasure_baseline(inst: ProblemInstance, eps: float, eta_sq: float) -> ErasureBaseline:
    """Erasure channel U = Y w.p. 1-delta, U = erasure w.p. delta, delta = 1 - eps/eta_sq.

    The returned mechanism has |Y|+1 symbols, the last being the erasure.
    Its perturbations are (P_{X|U=u} - P_X)/eps (unscaled when eps = 0); no
    l1 bound is implied. ``bound`` is (1 - 1/eta_sq) min(eps, eta_sq) and
    is returned as computed, sign included. Callers comparing against an
    l1 design pass eps**2 here.
    """
    if not 0 < eta_sq <= 1:
        raise InvalidEta(f"eta_sq must lie in (0, 1], got {eta_sq}")
    if not 0 <= eps <= eta_sq:
        raise InvalidEta(f"need 0 <= eps <= eta_sq for a valid erasure probability (eps={eps}, eta_sq={eta_sq})")
    delta = 1.0 - eps / eta_sq
    ny = inst.ny
    p_u = np.append((1 - delta) * inst.p_y.probs, delta)
    posts = [np.eye(ny)[k] for k in range(ny)] + [inst.p_y.probs]
    scale = eps if eps > 0 else 1.0
    perts = [(inst.leakage.matrix @ p - inst.p_x.probs) / scale for p in posts]
    # rounding in (1-delta)*p_y + delta can leave ~1e-16 off unit mass
    p_u = p_u / p_u.sum()
    mech = Mechanism(Distribution(p_u), tuple(posts), tuple(perts), epsilon=float(eps))
    return ErasureBaseline(bound=(1 - 1 / eta_sq) * min(eps, eta_sq), delta=delta, mechanism=mech)


def maximal_correlation_sq(inst: ProblemInstance) -> float:
    """Squared second singular value of [sqrt P_X]^{-1} P_{XY} [sqrt P_Y]^{-1}.

    Offered as a candidate for eta_sq in :func:`erasure_baseline`; that
    parameter is an external input and this choice is an interpretation.
    """
    joint = inst.leakage.matrix * inst.p_y.probs[None, :]
    b = np.diag(1 / np.sqrt(inst.p_x.probs)) @ joint @ np.diag(1 / np.sqrt(inst.p_y.probs))
    s = np.linalg.svd(b, compute_uv=False)
    return float(s[1] ** 2) if s.size > 1 else 0.0


def tradeoff_point(m: Mechanism, inst: ProblemInstance, param: float) -> TradeoffPoint:
    return TradeoffPoint(
        param=float(param),
        utility_mi=mechanism_utility(m, inst),
        map_error=map_error(m, inst),
        mmse_y_norm=mmse(m, inst, "Y", normalized=True),
        mmse_x_norm=mmse(m, inst, "X", normalized=True),
    )

