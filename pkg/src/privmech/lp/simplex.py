"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Solves::

    minimize    c @ x
    subject to  A_eq @ x == b_eq
                A_ub @ x <= b_ub
                x >= lb

The problems built in this package have at most a few hundred columns, so a
full tableau is both simple and fast enough. Pivoting is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from privmech.errors import Infeasible, NumericalInconsistency, Unbounded

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8
MAX_ITER = 50_000


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    fun: float
    iterations: int


class _Tableau:
    def __init__(self, rows: np.ndarray, basis: list[int]):
        self.t = rows
        self.basis = basis
        self.iterations = 0

    def pivot(self, r: int, c: int):
        t = self.t
        t[r] /= t[r, c]
        col = t[:, c].copy()
        col[r] = 0.0
        nz = np.flatnonzero(col)
        if nz.size:
            t[nz] -= np.outer(col[nz], t[r])
        self.basis[r] = c
        self.iterations += 1

    def run(self, cost_row: int, ncols: int, max_iter: int):
        """Iterate until optimal; ``cost_row`` holds reduced costs, columns ``< ncols`` may enter."""
        t = self.t
        m = len(self.basis)
        while True:
            if self.iterations >= max_iter:
                raise NumericalInconsistency(f"simplex iteration cap {max_iter} reached")
            d = t[cost_row, :ncols]
            cand = np.flatnonzero(d < -PIVOT_TOL)
            if cand.size == 0:
                return
            c = int(cand[0])  # Bland: lowest index entering
            col = t[:m, c]
            rhs = t[:m, -1]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                raise Unbounded(f"column {c} has no blocking row")
            ratios = rhs[rows] / col[rows]
            best = ratios.min()
            tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            # Bland: among ties leave with the lowest basic variable index
            r = int(min(tied, key=lambda i: self.basis[i]))
            self.pivot(r, c)


def simplex(c, a_eq=None, b_eq=None, a_ub=None, b_ub=None, lb=None, max_iter: int = MAX_ITER) -> LPSolution:
    c = np.asarray(c, dtype=float)
    n = c.size
    a_eq = np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    a_ub = np.zeros((0, n)) if a_ub is None else np.asarray(a_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float).ravel()

    # shift to x' = x - lb >= 0
    b_eq = b_eq - a_eq @ lb
    b_ub = b_ub - a_ub @ lb
    m_eq, m_ub = a_eq.shape[0], a_ub.shape[0]
    m = m_eq + m_ub

    # columns: structural | slacks | artificials
    a = np.zeros((m, n + m_ub))
    a[:m_eq, :n] = a_eq
    a[m_eq:, :n] = a_ub
    a[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1

    basis = []
    art_rows = []
    for i in range(m):
        if i >= m_eq and not neg[i]:
            basis.append(n + i - m_eq)
        else:
            basis.append(-1)
            art_rows.append(i)
    n_struct = n + m_ub
    n_art = len(art_rows)
    ncols = n_struct + n_art
    t = np.zeros((m + 2, ncols + 1))
    t[:m, :n_struct] = a
    t[:m, -1] = b
    for k, i in enumerate(art_rows):
        t[i, n_struct + k] = 1.0
        basis[i] = n_struct + k
    cost2 = m
    cost1 = m + 1
    t[cost2, :n] = c
    for i in art_rows:
        t[cost1] -= t[i]
    t[cost1, n_struct:ncols] = 0.0

    tab = _Tableau(t, basis)
    if n_art:
        tab.run(cost1, ncols, max_iter)
        infeas = -t[cost1, -1]
        if infeas > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            raise Infeasible(f"phase 1 residual {infeas:.3g}")
        # drive remaining artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if tab.basis[i] >= n_struct:
                row = t[i, :n_struct]
                cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if cand.size:
                    tab.pivot(i, int(cand[0]))
                    keep.append(i)
            else:
                keep.append(i)
        rows = keep + [cost2]
        phase1_iters = tab.iterations
        t = np.concatenate([t[rows, :n_struct], t[rows, -1:]], axis=1)
        tab = _Tableau(t, [tab.basis[i] for i in keep])
        tab.iterations = phase1_iters
        cost2 = len(keep)
    else:
        t = np.concatenate([t[: m + 1, :n_struct], t[: m + 1, -1:]], axis=1)
        tab = _Tableau(t, basis)
    # phase 2 reduced costs from the final phase 1 basis
    t = tab.t
    t[cost2, :] = 0.0
    t[cost2, :n] = c
    for i, bv in enumerate(tab.basis):
        if t[cost2, bv] != 0:
            t[cost2] -= t[cost2, bv] * t[i]
    tab.run(cost2, n_struct, max_iter)
    x = np.zeros(n_struct)
    for i, bv in enumerate(tab.basis):
        x[bv] = t[i, -1]
    xs = x[:n] + lb
    return LPSolution(x=xs, fun=float(c @ xs), iterations=tab.iterations)

