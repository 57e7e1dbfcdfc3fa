"""Linear program in the eta variables for one combination of vertices.

For every symbol ``u`` the combination fixes an index set ``omega_u``. The
scaled vertex ``eta_u = P_u * v_u[omega_u]`` turns the bilinear design
problem into an LP: with ``D_u = P_{X|Y1} M_head^{-1} M_omega (I - t_u 1^T)``
the scaled perturbation is ``eps * P_u * J_u = D_u @ eta_u``.

Variable layout: ``eta`` blocks of length |X| for u = 0..|Y|-1, then one
block of |X| auxiliaries ``s_u >= |D_u @ eta_u|`` per u.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from privmech.errors import NumericalInconsistency
from privmech.lp.simplex import LPSolution, simplex
from privmech.probkit import ProblemInstance
from privmech.rowspace import OmegaRecord, RowSpaceBasis


@dataclass(frozen=True)
class LPModel:
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    lb: np.ndarray
    n_u: int
    nx: int
    eq_labels: tuple = field(default=())
    ub_labels: tuple = field(default=())

    def __post_init__(self):
        n = self.c.size
        if n != 2 * self.n_u * self.nx:
            raise ValueError("variable count does not match the eta/aux layout")
        for name in ("a_eq", "a_ub"):
            a = getattr(self, name)
            if a.ndim != 2 or a.shape[1] != n:
                raise ValueError(f"{name} has shape {a.shape}, expected (*, {n})")
        if self.a_eq.shape[0] != self.b_eq.size or self.a_ub.shape[0] != self.b_ub.size:
            raise ValueError("constraint matrix and right-hand side sizes differ")
        for arr in (self.c, self.a_eq, self.b_eq, self.a_ub, self.b_ub, self.lb):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP model contains non-finite coefficients")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def eta_slice(self, u: int) -> slice:
        return slice(u * self.nx, (u + 1) * self.nx)

    def aux_slice(self, u: int) -> slice:
        off = self.n_u * self.nx
        return slice(off + u * self.nx, off + (u + 1) * self.nx)

    def eta(self, x, u: int) -> np.ndarray:
        return np.asarray(x)[self.eta_slice(u)]

    def var_names(self) -> list[str]:
        names = [f"eta[{u}][{i}]" for u in range(self.n_u) for i in range(self.nx)]
        names += [f"s[{u}][{i}]" for u in range(self.n_u) for i in range(self.nx)]
        return names


def scaled_perturbation_map(rec: OmegaRecord, basis: RowSpaceBasis, inst: ProblemInstance) -> np.ndarray:
    """D with ``eps * P_u * J_u = D @ eta_u``."""
    nx = rec.t.size
    head_block = inst.leakage.matrix[:, list(basis.head)]
    h_inv = head_block @ basis.m_head_inverse @ basis.m[:, list(rec.omega)]
    return h_inv @ (np.eye(nx) - np.outer(rec.t, np.ones(nx)))


def build_eta_lp(
    combination,
    inst: ProblemInstance,
    basis: RowSpaceBasis,
    eps: float,
    coefs,
) -> LPModel:
    """Assemble the LP for one combination (one record and one coefficient set per u)."""
    combination = list(combination)
    coefs = list(coefs)
    nx, ny = inst.nx, inst.ny
    n_u = len(combination)
    n_eta = n_u * nx
    n = 2 * n_eta

    c = np.zeros(n)
    eq_rows, eq_rhs, eq_lab = [], [], []
    ub_rows, ub_rhs, ub_lab = [], [], []

    marg = np.zeros((ny, n))
    jsum = np.zeros((nx, n))
    for u, (rec, coef) in enumerate(zip(combination, coefs)):
        if not rec.feasible:
            raise ValueError(f"omega={rec.omega} is not a feasible index set")
        sl = slice(u * nx, (u + 1) * nx)
        d = scaled_perturbation_map(rec, basis, inst)
        if np.max(np.abs(d.sum(axis=0))) > 1e-9:
            raise NumericalInconsistency(f"1^T J_u is not identically zero for omega={rec.omega}")
        # -(b * 1^T eta + a @ h^{-1} @ (eta - 1^T eta t))
        c[sl] = -(coef.b + coef.a @ d)
        for i, y in enumerate(rec.omega):
            marg[y, u * nx + i] = 1.0
        jsum[:, sl] = d

        row = np.zeros(n)
        row[sl] = -1.0
        ub_rows.append(row)
        ub_rhs.append(0.0)
        ub_lab.append(f"mass[{u}]>=0")
        aux = slice(n_eta + u * nx, n_eta + (u + 1) * nx)
        for i in range(nx):
            for sign in (1.0, -1.0):
                row = np.zeros(n)
                row[sl] = sign * d[i]
                row[aux.start + i] = -1.0
                ub_rows.append(row)
                ub_rhs.append(0.0)
                ub_lab.append(f"abs[{u}][{i}]{'+' if sign > 0 else '-'}")
        row = np.zeros(n)
        row[aux] = 1.0
        row[sl] = -eps
        ub_rows.append(row)
        ub_rhs.append(0.0)
        ub_lab.append(f"l1[{u}]")

    for y in range(ny):
        eq_rows.append(marg[y])
        eq_rhs.append(inst.p_y.probs[y])
        eq_lab.append(f"marginal[{y}]")
    for i in range(nx):
        eq_rows.append(jsum[i])
        eq_rhs.append(0.0)
        eq_lab.append(f"zero_mean_perturbation[{i}]")

    return LPModel(
        c=c,
        a_eq=np.array(eq_rows),
        b_eq=np.array(eq_rhs),
        a_ub=np.array(ub_rows),
        b_ub=np.array(ub_rhs),
        lb=np.zeros(n),
        n_u=n_u,
        nx=nx,
        eq_labels=tuple(eq_lab),
        ub_labels=tuple(ub_lab),
    )


def solve_lp(model: LPModel) -> LPSolution:
    return simplex(model.c, model.a_eq, model.b_eq, model.a_ub, model.b_ub, model.lb)


def _exact(v: float) -> str:
    return str(Fraction(float(v))) if v != 0 else "0"


def dump_lp(model: LPModel, exact: bool = True) -> str:
    """Plain-text listing: objective, then one line per constraint.

    With ``exact`` the coefficients are written as the exact binary fractions
    of the stored doubles, so an external solver sees identical data.
    """
    fmt = _exact if exact else (lambda v: repr(float(v)))
    names = model.var_names()
    out = io.StringIO()
    out.write(f"vars {model.n_vars}\n")
    out.write("min " + " ".join(f"{fmt(v)}*{names[k]}" for k, v in enumerate(model.c) if v != 0) + "\n")
    for lab, row, rhs in zip(model.eq_labels, model.a_eq, model.b_eq):
        terms = " ".join(f"{fmt(v)}*{names[k]}" for k, v in enumerate(row) if v != 0)
        out.write(f"{lab}: {terms} = {fmt(rhs)}\n")
    for lab, row, rhs in zip(model.ub_labels, model.a_ub, model.b_ub):
        terms = " ".join(f"{fmt(v)}*{names[k]}" for k, v in enumerate(row) if v != 0)
        out.write(f"{lab}: {terms} <= {fmt(rhs)}\n")
    out.write("bounds " + " ".join(f"{names[k]}>={fmt(v)}" for k, v in enumerate(model.lb)) + "\n")
    return out.getvalue()
