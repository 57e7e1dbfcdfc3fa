"""Row-space basis of the leakage matrix and the basic solutions it induces.

For every index set ``omega`` of ``|X|`` output symbols the posterior
polytope ``{v >= 0 : M v = M P_Y + eps M [P_{X|Y1}^{-1} J; 0]}`` has the
candidate vertex supported on ``omega``::

    v[omega] = t + eps * h @ J,   t = M_omega^{-1} M P_Y,
                                  h = M_omega^{-1} M_head P_{X|Y1}^{-1}

All index sets are 0-based tuples in lexicographic order.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from privmech.errors import HeadSingular, NegativeEntry, NoFeasibleOmega, RankDeficient
from privmech.probkit import RANK_TOL, TOL_NONNEG, Distribution, ProblemInstance, _frozen

log = logging.getLogger(__name__)

TOL_POS = 1e-9


@dataclass(frozen=True)
class RowSpaceBasis:
    m: np.ndarray
    column_perm: tuple
    head_inverse: np.ndarray
    m_head: np.ndarray
    m_head_inverse: np.ndarray

    @property
    def head(self) -> tuple:
        """Columns of the leakage matrix forming the invertible block P_{X|Y1}."""
        return self.column_perm[: self.m.shape[0]]

    def lift(self, j) -> np.ndarray:
        """Embed P_{X|Y1}^{-1} J into R^{|Y|} (zeros outside the head columns)."""
        out = np.zeros(self.m.shape[1])
        out[list(self.head)] = self.head_inverse @ np.asarray(j, dtype=float)
        return out


def build_rowspace_basis(inst: ProblemInstance) -> RowSpaceBasis:
    lk = inst.leakage.matrix
    nx = inst.nx
    _, s, vt = np.linalg.svd(lk)
    if s[-1] <= RANK_TOL:
        raise RankDeficient(f"rank of leakage matrix below {nx}")
    m = vt[:nx].copy()
    # column pivoting picks a well-conditioned invertible block
    _, _, piv = scipy.linalg.qr(lk, pivoting=True)
    perm = tuple(int(i) for i in piv)
    head = list(perm[:nx])
    block = lk[:, head]
    if np.linalg.svd(block, compute_uv=False)[-1] <= RANK_TOL:
        raise HeadSingular("no invertible |X|x|X| column block found")
    m_head = m[:, head]
    if np.linalg.svd(m_head, compute_uv=False)[-1] <= RANK_TOL:
        raise HeadSingular("row-space basis restricted to the head columns is singular")
    return RowSpaceBasis(
        m=_frozen(m),
        column_perm=perm,
        head_inverse=_frozen(np.linalg.inv(block)),
        m_head=_frozen(m_head),
        m_head_inverse=_frozen(np.linalg.inv(m_head)),
    )


def with_basis_matrix(basis: RowSpaceBasis, m) -> RowSpaceBasis:
    """Same head columns, different row-space basis (e.g. ``T @ basis.m``)."""
    m = np.asarray(m, dtype=float)
    m_head = m[:, list(basis.head)]
    return RowSpaceBasis(
        m=_frozen(m),
        column_perm=basis.column_perm,
        head_inverse=basis.head_inverse,
        m_head=_frozen(m_head),
        m_head_inverse=_frozen(np.linalg.inv(m_head)),
    )


class OmegaClass(enum.Enum):
    FEASIBLE_POSITIVE = "feasible"
    INFEASIBLE = "infeasible"
    BOUNDARY_ZERO = "boundary"


@dataclass(frozen=True)
class OmegaRecord:
    omega: tuple
    m_omega_inverse: np.ndarray
    t: np.ndarray
    h: np.ndarray
    cls: OmegaClass
    sigma_max: float
    radius: float

    @property
    def feasible(self) -> bool:
        return self.cls is OmegaClass.FEASIBLE_POSITIVE

    @property
    def h_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.h)


@dataclass(frozen=True)
class OmegaEnumeration:
    records: tuple
    skipped: tuple = ()
    in_hxy: bool = True

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    @property
    def feasible(self) -> list:
        return [r for r in self.records if r.feasible]

    @property
    def infeasible(self) -> list:
        return [r for r in self.records if r.cls is OmegaClass.INFEASIBLE]

    def by_omega(self, omega) -> OmegaRecord:
        omega = tuple(omega)
        for r in self.records:
            if r.omega == omega:
                return r
        raise KeyError(omega)


def classify(t, tol: float = TOL_POS) -> OmegaClass:
    lo = float(np.min(t))
    if lo > tol:
        return OmegaClass.FEASIBLE_POSITIVE
    if lo < -tol:
        return OmegaClass.INFEASIBLE
    return OmegaClass.BOUNDARY_ZERO


def perturbation_radius(rec_or_h) -> float:
    """Largest column l1-norm of H_omega: bound on ||H_omega J||_1 when ||J||_1 <= 1."""
    h = rec_or_h.h if isinstance(rec_or_h, OmegaRecord) else np.asarray(rec_or_h, dtype=float)
    return float(np.abs(h).sum(axis=0).max())


def make_record(basis: RowSpaceBasis, inst: ProblemInstance, omega) -> OmegaRecord | None:
    omega = tuple(int(i) for i in omega)
    m_omega = basis.m[:, list(omega)]
    if np.linalg.svd(m_omega, compute_uv=False)[-1] < RANK_TOL:
        return None
    m_inv = np.linalg.inv(m_omega)
    t = m_inv @ (basis.m @ inst.p_y.probs)
    h = m_inv @ basis.m_head @ basis.head_inverse
    return OmegaRecord(
        omega=omega,
        m_omega_inverse=_frozen(m_inv),
        t=_frozen(t),
        h=_frozen(h),
        cls=classify(t),
        sigma_max=float(np.linalg.svd(h, compute_uv=False)[0]),
        radius=perturbation_radius(h),
    )


def enumerate_omegas(basis: RowSpaceBasis, inst: ProblemInstance) -> OmegaEnumeration:
    records, skipped = [], []
    for omega in itertools.combinations(range(inst.ny), inst.nx):
        rec = make_record(basis, inst, omega)
        if rec is None:
            log.info("skipping singular index set %s", omega)
            skipped.append(omega)
        else:
            records.append(rec)
    in_hxy = not any(r.cls is OmegaClass.BOUNDARY_ZERO for r in records)
    return OmegaEnumeration(records=tuple(records), skipped=tuple(skipped), in_hxy=in_hxy)


def extreme_point(rec: OmegaRecord, j, eps: float, ny: int) -> Distribution:
    """Vertex of the posterior polytope for perturbation ``j`` at leakage ``eps``.

    Raises NegativeEntry when ``eps * h @ j`` pushes an entry below zero,
    i.e. ``eps`` is too large for this (omega, j) pair.
    """
    vals = rec.t + eps * (rec.h @ np.asarray(j, dtype=float))
    if vals.min() < -TOL_NONNEG:
        raise NegativeEntry(f"omega={rec.omega}: entry {vals.min():.3g} < 0 at eps={eps}")
    v = np.zeros(ny)
    v[list(rec.omega)] = np.clip(vals, 0.0, None)
    return Distribution(v)


@dataclass(frozen=True)
class EpsilonRange:
    eps1: float
    eps2: float

    @property
    def bound(self) -> float:
        return min(self.eps1, self.eps2)

    def contains(self, eps: float) -> bool:
        return eps < self.bound


def epsilon_range(records) -> EpsilonRange:
    """Leakage range keeping the expansion valid and infeasible vertices infeasible.

    ``eps1`` guards the infeasible index sets (infinite when there are none);
    ``eps2`` keeps every feasible base point strictly positive.
    """
    records = list(records)
    pos = [r for r in records if r.cls is OmegaClass.FEASIBLE_POSITIVE]
    neg = [r for r in records if r.cls is OmegaClass.INFEASIBLE]
    if not pos:
        raise NoFeasibleOmega("no index set yields a strictly positive base point")
    eps2 = min(float(r.t.min()) for r in pos) / max(r.sigma_max for r in pos)
    if neg:
        num = min(float(np.abs(r.t[r.t < 0]).max()) for r in neg)
        eps1 = num / max(r.sigma_max for r in neg)
    else:
        eps1 = math.inf
    return EpsilonRange(eps1=eps1, eps2=eps2)
