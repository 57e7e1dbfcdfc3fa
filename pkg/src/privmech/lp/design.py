"""Mechanism design by enumerating vertex combinations and solving one LP each."""

from __future__ import annotations

import itertools
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from privmech.entcoef import CoefficientCache
from privmech.errors import (
    CombinationCapExceeded,
    EpsilonRangeWarning,
    Infeasible,
    NoFeasibleCombination,
    NotInHxy,
    NumericalInconsistency,
)
from privmech.lp.model import build_eta_lp, scaled_perturbation_map, solve_lp
from privmech.probkit import (
    Distribution,
    Mechanism,
    ProblemInstance,
    entropy,
    mechanism_utility,
    validate_mechanism,
)
from privmech.rowspace import (
    EpsilonRange,
    OmegaEnumeration,
    RowSpaceBasis,
    build_rowspace_basis,
    enumerate_omegas,
    epsilon_range,
    extreme_point,
)

TOL_PROB = 1e-9
DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class Diagnostics:
    eps_range: EpsilonRange | None
    in_hxy: bool
    combination_count: int
    feasible_combinations: int
    iterations: int
    warnings: tuple = ()
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DesignResult:
    mechanism: Mechanism
    combination: tuple
    approx_objective: float
    approx_utility: float
    exact_utility: float
    diagnostics: Diagnostics
    epsilon: float = 0.0
    log_base: float = 2.0


@dataclass(frozen=True)
class Candidate:
    combination: tuple
    objective: float
    x: np.ndarray
    iterations: int


def count_combinations(n_records: int, n_u: int, ordered: bool = False) -> int:
    if ordered:
        return n_records**n_u
    return math.comb(n_records + n_u - 1, n_u)


def iter_combinations(n_records: int, n_u: int, ordered: bool = False):
    if ordered:
        return itertools.product(range(n_records), repeat=n_u)
    return itertools.combinations_with_replacement(range(n_records), n_u)


def recover_mechanism(x, combination, inst: ProblemInstance, basis: RowSpaceBasis, eps: float) -> Mechanism:
    """Map an eta-LP solution back to (P_U, P_{Y|U=u}, J_u)."""
    x = np.asarray(x, dtype=float)
    nx = inst.nx
    masses, posts, perts = [], [], []
    for u, rec in enumerate(combination):
        eta = x[u * nx : (u + 1) * nx]
        pu = float(eta.sum())
        if pu > TOL_PROB and eps > 0:
            j = scaled_perturbation_map(rec, basis, inst) @ eta / (eps * pu)
        else:
            j = np.zeros(nx)
        masses.append(max(pu, 0.0))
        posts.append(extreme_point(rec, j, eps, inst.ny))
        perts.append(j)
    mech = Mechanism(Distribution(np.array(masses)), tuple(posts), tuple(perts), epsilon=float(eps))
    try:
        validate_mechanism(mech, inst, tol=1e-6)
    except NumericalInconsistency as exc:
        raise NumericalInconsistency(f"recovered mechanism is inconsistent: {exc}") from exc
    return mech


def _solve_one(args):
    combo_idx, combination, inst, basis, eps, coefs = args
    model = build_eta_lp(combination, inst, basis, eps, coefs)
    try:
        sol = solve_lp(model)
    except Infeasible:
        return None
    return Candidate(combo_idx, sol.fun, sol.x, sol.iterations)


def default_workers() -> int:
    return int(os.environ.get("PRIVMECH_WORKERS", "1"))


def prepare(inst: ProblemInstance):
    basis = build_rowspace_basis(inst)
    return basis, enumerate_omegas(basis, inst)


def solve_approx(
    inst: ProblemInstance,
    eps: float,
    *,
    force: bool = False,
    ordered: bool = False,
    cap: int = DEFAULT_CAP,
    workers: int | None = None,
    prepared: tuple[RowSpaceBasis, OmegaEnumeration] | None = None,
) -> DesignResult:
    """Approximate maximiser of I(U;Y) under the per-letter l1 constraint.

    Enumerates multisets (or ordered tuples with ``ordered=True``) of
    ``|Y|`` feasible index sets, solves the eta-LP of each and keeps the
    cheapest; ties go to the lexicographically smallest combination.
    """
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    basis, omegas = prepared if prepared is not None else prepare(inst)
    if not omegas.in_hxy and not force:
        raise NotInHxy("a base point lies on the simplex boundary; pass force=True to proceed")
    feasible = omegas.feasible
    rng = epsilon_range(omegas.records)
    notes = []
    if eps > 0 and not rng.contains(eps):
        msg = f"epsilon={eps:g} is outside the validated range (< {rng.bound:.4g})"
        warnings.warn(msg, EpsilonRangeWarning, stacklevel=2)
        notes.append(msg)

    base = inst.log_base
    cache = CoefficientCache()
    coefs = [cache.get(r, base) for r in feasible]
    n_u = inst.ny
    total = count_combinations(len(feasible), n_u, ordered)
    if total > cap:
        raise CombinationCapExceeded(f"{total} combinations exceed the cap of {cap}; raise the cap or shrink |Y|")

    jobs = (
        (idx, [feasible[k] for k in idx], inst, basis, eps, [coefs[k] for k in idx])
        for idx in iter_combinations(len(feasible), n_u, ordered)
    )
    workers = default_workers() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_one, jobs, chunksize=16))
    else:
        results = [_solve_one(j) for j in jobs]

    best = None
    n_ok = 0
    iters = 0
    for cand in results:
        if cand is None:
            continue
        n_ok += 1
        iters += cand.iterations
        # iteration order is lexicographic, so strict improvement keeps the smallest on ties
        if best is None or cand.objective < best.objective - 1e-12:
            best = cand
    if best is None:
        raise NoFeasibleCombination("no combination admits a feasible LP (the zero-perturbation one always should)")

    combination = [feasible[k] for k in best.combination]
    mech = recover_mechanism(best.x, combination, inst, basis, eps)
    h_y = entropy(inst.p_y.probs, base)
    diag = Diagnostics(
        eps_range=rng,
        in_hxy=omegas.in_hxy,
        combination_count=total,
        feasible_combinations=n_ok,
        iterations=iters,
        warnings=tuple(notes),
    )
    return DesignResult(
        mechanism=mech,
        combination=tuple(r.omega for r in combination),
        approx_objective=best.objective,
        approx_utility=h_y - best.objective,
        exact_utility=mechanism_utility(mech, inst),
        diagnostics=diag,
        epsilon=float(eps),
        log_base=base,
    )


def solve_perfect_privacy(inst: ProblemInstance, **kwargs) -> DesignResult:
    """Zero-leakage design: disclosure only through the null space of P_{X|Y}."""
    return solve_approx(inst, 0.0, **kwargs)
