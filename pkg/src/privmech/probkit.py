"""Discrete distributions, channels and the information measures built on them.

All objects are immutable: the arrays they hold are copied on construction
and flagged read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from privmech.errors import (
    DimensionMismatch,
    InvalidDistribution,
    MarginalMismatch,
    NumericalInconsistency,
    RankDeficient,
    ZeroReference,
)

TOL_NONNEG = 1e-9
TOL_SUM = 1e-9
TOL_CONSISTENCY = 1e-7
RANK_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def parse_log_base(base) -> float:
    """Accept 2, "2", "e", "natural", math.e and return the numeric base."""
    if isinstance(base, str):
        key = base.strip().lower()
        if key in ("2", "two", "bits"):
            return 2.0
        if key in ("e", "natural", "nats", "ln"):
            return math.e
        raise ValueError(f"unsupported log base {base!r}")
    base = float(base)
    if base == 2.0 or base == math.e:
        return base
    raise ValueError(f"unsupported log base {base!r}; use 2 or e")


def log(x, base: float = 2.0):
    return np.log(x) / math.log(base)


@dataclass(frozen=True)
class Distribution:
    """Probability vector over the index set ``0..n-1``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.size == 0:
            raise InvalidDistribution("empty distribution")
        if not np.all(np.isfinite(p)):
            raise InvalidDistribution(f"non-finite entries in {p}")
        if p.min() < -TOL_NONNEG:
            raise InvalidDistribution(f"negative entry {p.min():.3g}")
        if abs(p.sum() - 1.0) > TOL_SUM:
            raise InvalidDistribution(f"entries sum to {p.sum():.12g}, not 1")
        object.__setattr__(self, "probs", _frozen(np.clip(p, 0.0, None)))

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    def __len__(self):
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)


@dataclass(frozen=True)
class Channel:
    """Column-stochastic matrix; column ``j`` is the law of the output given input ``j``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.size == 0:
            raise InvalidDistribution("channel must be a non-empty 2-D matrix")
        if m.min() < -TOL_NONNEG or m.max() > 1 + TOL_NONNEG:
            raise InvalidDistribution("channel entries must lie in [0, 1]")
        sums = m.sum(axis=0)
        if np.max(np.abs(sums - 1.0)) > TOL_SUM:
            raise InvalidDistribution(f"channel columns sum to {sums}, not 1")
        object.__setattr__(self, "matrix", _frozen(np.clip(m, 0.0, 1.0)))

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True)
class ProblemInstance:
    """Design input: leakage matrix P_{X|Y}, prior P_Y and derived P_X.

    ``x_values``/``y_values`` are numeric labels used only by the MMSE
    metrics; they default to ``1..n``.
    """

    leakage: Channel
    p_y: Distribution
    p_x: Distribution = field(init=False)
    x_values: np.ndarray | None = None
    y_values: np.ndarray | None = None
    log_base: float = 2.0

    def __post_init__(self):
        nx, ny = self.leakage.shape
        if self.p_y.alphabet_size != ny:
            raise DimensionMismatch(f"P_Y has {self.p_y.alphabet_size} entries, leakage has {ny} columns")
        if nx > ny:
            raise DimensionMismatch(f"|X|={nx} exceeds |Y|={ny}")
        p_x = self.leakage.matrix @ self.p_y.probs
        object.__setattr__(self, "p_x", Distribution(p_x))
        if self.p_y.probs.min() <= 0 or self.p_x.probs.min() <= 0:
            raise InvalidDistribution("every entry of P_X and P_Y must be strictly positive")
        sv = np.linalg.svd(self.leakage.matrix, compute_uv=False)
        if sv[-1] <= RANK_TOL:
            raise RankDeficient(f"leakage matrix is not of full row rank (sigma_min={sv[-1]:.3g})")
        xv = np.arange(1, nx + 1) if self.x_values is None else self.x_values
        yv = np.arange(1, ny + 1) if self.y_values is None else self.y_values
        xv, yv = _frozen(xv), _frozen(yv)
        if xv.shape != (nx,) or yv.shape != (ny,):
            raise DimensionMismatch("value labels must match the alphabet sizes")
        object.__setattr__(self, "x_values", xv)
        object.__setattr__(self, "y_values", yv)
        object.__setattr__(self, "log_base", parse_log_base(self.log_base))

    @classmethod
    def from_arrays(cls, leakage, p_y, *, x_values=None, y_values=None, log_base=2.0):
        return cls(Channel(leakage), Distribution(p_y), x_values=x_values, y_values=y_values, log_base=log_base)

    @property
    def nx(self) -> int:
        return self.leakage.shape[0]

    @property
    def ny(self) -> int:
        return self.leakage.shape[1]

    @property
    def is_square(self) -> bool:
        return self.nx == self.ny


@dataclass(frozen=True)
class Mechanism:
    """Disclosure mechanism described through its posteriors.

    ``posteriors[u]`` is P_{Y|U=u}; ``perturbations[u]`` is J_u, so that
    P_{X|U=u} = P_X + epsilon * J_u.
    """

    p_u: Distribution
    posteriors: tuple
    perturbations: tuple
    epsilon: float = 0.0

    def __post_init__(self):
        posts = tuple(p if isinstance(p, Distribution) else Distribution(p) for p in self.posteriors)
        perts = tuple(_frozen(j) for j in self.perturbations)
        if len(posts) != self.p_u.alphabet_size or len(perts) != len(posts):
            raise DimensionMismatch("p_u, posteriors and perturbations disagree on |U|")
        object.__setattr__(self, "posteriors", posts)
        object.__setattr__(self, "perturbations", perts)

    @property
    def n_u(self) -> int:
        return self.p_u.alphabet_size

    def posterior_matrix(self) -> np.ndarray:
        """|Y| x |U| matrix whose columns are the posteriors."""
        return np.column_stack([p.probs for p in self.posteriors])

    def joint(self) -> np.ndarray:
        """Joint table P_{Y,U} with shape (|Y|, |U|)."""
        return self.posterior_matrix() * self.p_u.probs[None, :]

    def kernel(self) -> np.ndarray:
        """P_{U|Y} with shape (|U|, |Y|); rows for zero-mass Y symbols are undefined."""
        joint = self.joint()
        return (joint / joint.sum(axis=1, keepdims=True)).T


def entropy(d, base: float = 2.0) -> float:
    p = np.asarray(d, dtype=float)
    nz = p[p > 0]
    return float(-(nz * log(nz, base)).sum())


def mutual_information(p_u, posteriors: Sequence, p_y, base: float = 2.0, tol: float = TOL_CONSISTENCY) -> float:
    """I(U;Y) = H(Y) - sum_u P_U(u) H(P_{Y|U=u})."""
    pu = np.asarray(p_u, dtype=float)
    post = np.column_stack([np.asarray(p, dtype=float) for p in posteriors])
    py = np.asarray(p_y, dtype=float)
    if post.shape != (py.size, pu.size):
        raise DimensionMismatch("posterior shapes do not match P_U and P_Y")
    if np.max(np.abs(post @ pu - py)) > tol:
        raise MarginalMismatch(f"sum_u P_U(u) P_Y|U=u deviates from P_Y by {np.max(np.abs(post @ pu - py)):.3g}")
    cond = sum(w * entropy(post[:, k], base) for k, w in enumerate(pu))
    return entropy(py, base) - cond


def mechanism_utility(m: Mechanism, inst: ProblemInstance, base: float | None = None) -> float:
    base = inst.log_base if base is None else base
    return mutual_information(m.p_u, m.posteriors, inst.p_y, base)


def _pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"alphabet sizes differ: {p.shape} vs {q.shape}")
    return p, q


def l1_distance(p, q) -> float:
    p, q = _pair(p, q)
    return float(np.abs(p - q).sum())


def tv_distance(p, q) -> float:
    return 0.5 * l1_distance(p, q)


def chi2_divergence(p, q) -> float:
    p, q = _pair(p, q)
    if np.any(q <= 0):
        raise ZeroReference("chi-square divergence needs a strictly positive reference")
    return float(((p - q) ** 2 / q).sum())


@dataclass(frozen=True)
class PrivacyReport:
    deviations: np.ndarray
    max_deviation: float
    epsilon: float
    passes: bool
    violating: tuple
    chi2_epsilon: float

    @property
    def worst_u(self) -> int:
        return int(np.argmax(self.deviations))


def check_privacy(m: Mechanism, inst: ProblemInstance, epsilon: float, tol: float = TOL_NONNEG) -> PrivacyReport:
    """Per-letter l1 test ||P_{X|U=u} - P_X||_1 <= epsilon for every u.

    ``chi2_epsilon`` is the leakage level epsilon / sqrt(min P_X) that the
    same mechanism is guaranteed to satisfy under the chi-square criterion.
    """
    px = inst.p_x.probs
    devs = np.array([l1_distance(inst.leakage.matrix @ post.probs, px) for post in m.posteriors])
    bad = tuple(int(u) for u in np.flatnonzero(devs > epsilon + tol))
    mx = float(devs.max()) if devs.size else 0.0
    return PrivacyReport(
        deviations=_frozen(devs),
        max_deviation=mx,
        epsilon=float(epsilon),
        passes=not bad,
        violating=bad,
        chi2_epsilon=float(epsilon / math.sqrt(px.min())),
    )


def validate_mechanism(m: Mechanism, inst: ProblemInstance, tol: float = TOL_CONSISTENCY) -> None:
    """Raise NumericalInconsistency unless every structural invariant of ``m`` holds.

    Checked: marginal consistency, P_{X|U=u} = P_X + eps*J_u, the three
    perturbation properties, and the l1 criterion at ``m.epsilon``.
    """
    py, px, lk = inst.p_y.probs, inst.p_x.probs, inst.leakage.matrix
    post = m.posterior_matrix()
    if post.shape[0] != inst.ny:
        raise NumericalInconsistency("posteriors are not over Y")
    resid = np.max(np.abs(post @ m.p_u.probs - py))
    if resid > tol:
        raise NumericalInconsistency(f"marginal mismatch {resid:.3g}")
    jsum = np.zeros(inst.nx)
    for u, (pu, j) in enumerate(zip(m.p_u.probs, m.perturbations)):
        if j.shape != (inst.nx,):
            raise NumericalInconsistency(f"J_{u} has wrong shape {j.shape}")
        dev = lk @ post[:, u] - (px + m.epsilon * j)
        if np.max(np.abs(dev)) > tol:
            raise NumericalInconsistency(f"P_X|U={u} differs from P_X + eps*J_{u} by {np.max(np.abs(dev)):.3g}")
        if abs(j.sum()) > tol:
            raise NumericalInconsistency(f"J_{u} does not sum to zero")
        if np.abs(j).sum() > 1 + tol:
            raise NumericalInconsistency(f"||J_{u}||_1 = {np.abs(j).sum():.9g} exceeds 1")
        jsum += pu * j
    if np.max(np.abs(jsum)) > tol:
        raise NumericalInconsistency(f"sum_u P_u J_u = {jsum}")
    rep = check_privacy(m, inst, m.epsilon, tol=tol)
    if not rep.passes:
        raise NumericalInconsistency(f"privacy violated at u={rep.violating}")
