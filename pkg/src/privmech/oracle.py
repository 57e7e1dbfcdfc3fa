"""Grid-search ground truth for small instances.

Any mechanism is a mixture of posteriors P_{Y|U=u} whose weights reproduce
P_Y, and concavity of entropy means the best posteriors are vertices of the
admissible set ``{v in simplex : P_{X|Y} v - P_X satisfies the criterion}``.
The search therefore builds a finite pool of admissible posteriors and
solves one LP over mixture weights with the exact entropies as costs::

    min_w  sum_k w_k H(v_k)   s.t.  sum_k w_k v_k = P_Y,  w >= 0

Every pooled point is feasible, so the result is a certified lower bound on
the optimal utility. The pool is refined around the atoms of the current
optimum, halving the step each round.

Two pools are available:

``reduced``
    vertices supported on |X| symbols, v[omega] = P_omega^{-1}(P_X + eps J),
    with J on a grid of the perturbation ball. For |X| = 2 the ball endpoints
    and the points where a vertex entry reaches zero are added, which makes
    the pool contain every vertex of the admissible set.
``raw``
    a lattice over the whole posterior simplex, with no use of the index-set
    reduction. Coarse, but of independent lineage.

Weights are found with SciPy's HiGHS dual simplex, not with the package's
own simplex, so this module shares no LP code with the solver it checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linprog

from privmech.errors import Infeasible, TooLarge
from privmech.lp.design import DesignResult, Diagnostics
from privmech.probkit import (
    RANK_TOL,
    Distribution,
    Mechanism,
    ProblemInstance,
    entropy,
    mechanism_utility,
    validate_mechanism,
)

ATOM_TOL = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    grid_resolution: int = 21
    refinement_rounds: int = 3
    u_cardinality: int | None = None
    criterion: str = "l1"
    mode: str = "reduced"
    max_candidates: int = 500_000

    def __post_init__(self):
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be at least 2")
        if self.refinement_rounds < 0:
            raise ValueError("refinement_rounds must be non-negative")
        if self.criterion not in ("l1", "chi2"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.mode not in ("reduced", "raw"):
            raise ValueError(f"unknown mode {self.mode!r}")


def admissible(dev: np.ndarray, p_x: np.ndarray, eps: float, criterion: str, tol: float = 1e-12) -> np.ndarray:
    """Column-wise test of deviations ``P_{X|U=u} - P_X`` (shape |X| x K)."""
    if criterion == "l1":
        return np.abs(dev).sum(axis=0) <= eps + tol
    return (dev**2 / p_x[:, None]).sum(axis=0) <= eps**2 + tol


def _ball_halfwidth(p_x: np.ndarray, criterion: str) -> np.ndarray:
    """Per-coordinate bound on |J_i| over the unit perturbation ball."""
    if criterion == "l1":
        return np.full(p_x.size, 0.5)
    return np.sqrt(p_x)


def _j_lattice(center: np.ndarray, half: np.ndarray, res: int) -> np.ndarray:
    """Grid over the first |X|-1 coordinates; the last one closes 1^T J = 0."""
    axes = [np.linspace(c - h, c + h, res) for c, h in zip(center[:-1], half[:-1])]
    pts = np.array(list(itertools.product(*axes))) if axes else np.zeros((1, 0))
    last = -pts.sum(axis=1, keepdims=True)
    return np.hstack([pts, last]).T


def _binary_extras(p_x: np.ndarray, criterion: str) -> np.ndarray:
    if criterion == "l1":
        r = 0.5
    else:
        r = 1.0 / math.sqrt(1 / p_x[0] + 1 / p_x[1])
    return np.array([[r, -r], [-r, r], [0.0, 0.0]]).T


class _Pool:
    def __init__(self, ny: int):
        self.vs: list[np.ndarray] = []
        self.tags: list[tuple] = []
        self.ny = ny

    def add(self, v: np.ndarray, tag: tuple):
        self.vs.append(v)
        self.tags.append(tag)

    def __len__(self):
        return len(self.vs)

    def matrix(self) -> np.ndarray:
        return np.column_stack(self.vs)


class _ReducedSearch:
    def __init__(self, inst: ProblemInstance, eps: float, cfg: SearchConfig):
        self.inst, self.eps, self.cfg = inst, eps, cfg
        self.p_x = inst.p_x.probs
        lk = inst.leakage.matrix
        self.blocks = []
        for omega in itertools.combinations(range(inst.ny), inst.nx):
            blk = lk[:, list(omega)]
            if np.linalg.svd(blk, compute_uv=False)[-1] > RANK_TOL:
                self.blocks.append((omega, np.linalg.inv(blk)))
        self.half = _ball_halfwidth(self.p_x, cfg.criterion)
        self.step0 = 2 * self.half / (cfg.grid_resolution - 1)

    def estimate(self) -> int:
        return len(self.blocks) * self.cfg.grid_resolution ** (self.inst.nx - 1)

    def _admit(self, js: np.ndarray) -> np.ndarray:
        # J is scaled so that the criterion holds at eps = 1
        return js[:, admissible(js, self.p_x, 1.0, self.cfg.criterion)]

    def _vertices(self, pool: _Pool, omega, inv, js: np.ndarray):
        if js.size == 0:
            return
        vals = inv @ (self.p_x[:, None] + self.eps * js)
        ok = vals.min(axis=0) >= -1e-12
        for k in np.flatnonzero(ok):
            v = np.zeros(self.inst.ny)
            v[list(omega)] = np.clip(vals[:, k], 0.0, None)
            v /= v.sum()
            pool.add(v, (omega, tuple(js[:, k])))

    def _breakpoints(self, omega, inv) -> np.ndarray:
        # J = (j, -j): entry k vanishes at j = -a_k / (eps * b_k)
        if self.inst.nx != 2 or self.eps == 0:
            return np.zeros((2, 0))
        a = inv @ self.p_x
        b = inv @ np.array([1.0, -1.0])
        pts = [-a[k] / (self.eps * b[k]) for k in range(2) if abs(b[k]) > 1e-15]
        js = np.array([[j, -j] for j in pts]).T if pts else np.zeros((2, 0))
        return self._admit(js)

    def initial(self) -> _Pool:
        pool = _Pool(self.inst.ny)
        nx = self.inst.nx
        js = _j_lattice(np.zeros(nx), self.half, self.cfg.grid_resolution)
        if nx == 2:
            js = np.hstack([js, _binary_extras(self.p_x, self.cfg.criterion)])
        js = self._admit(js)
        for omega, inv in self.blocks:
            self._vertices(pool, omega, inv, js)
            self._vertices(pool, omega, inv, self._breakpoints(omega, inv))
        return pool

    def refine(self, pool: _Pool, atoms: list[tuple], rnd: int):
        step = self.step0 / 2 ** (rnd - 1)
        invs = dict(self.blocks)
        for omega, j in atoms:
            js = _j_lattice(np.array(j), step, self.cfg.grid_resolution)
            self._vertices(pool, omega, invs[omega], self._admit(js))


class _RawSearch:
    def __init__(self, inst: ProblemInstance, eps: float, cfg: SearchConfig):
        self.inst, self.eps, self.cfg = inst, eps, cfg
        self.n = cfg.grid_resolution - 1

    def estimate(self) -> int:
        return math.comb(self.n + self.inst.ny - 1, self.inst.ny - 1)

    def _keep(self, pool: _Pool, vs: np.ndarray):
        if vs.size == 0:
            return
        dev = self.inst.leakage.matrix @ vs - self.inst.p_x.probs[:, None]
        ok = admissible(dev, self.inst.p_x.probs, self.eps, self.cfg.criterion) & (vs.min(axis=0) >= -1e-12)
        for k in np.flatnonzero(ok):
            v = np.clip(vs[:, k], 0.0, None)
            pool.add(v / v.sum(), (tuple(np.flatnonzero(v > 0)), None))

    def initial(self) -> _Pool:
        ny, n = self.inst.ny, self.n
        pts = []
        for bars in itertools.combinations(range(n + ny - 1), ny - 1):
            edges = (-1,) + bars + (n + ny - 1,)
            pts.append([edges[i + 1] - edges[i] - 1 for i in range(ny)])
        vs = np.array(pts, dtype=float).T / n
        pool = _Pool(ny)
        pool.add(self.inst.p_y.probs.copy(), (tuple(range(ny)), None))
        self._keep(pool, vs)
        return pool

    def refine(self, pool: _Pool, atoms: list[tuple], rnd: int):
        ny = self.inst.ny
        step = 1.0 / (self.n * 2**rnd)
        dirs = [np.eye(ny)[i] - np.eye(ny)[k] for i in range(ny) for k in range(ny) if i != k]
        for v, _ in atoms:
            cand = [np.asarray(v) + s * step * d for d in dirs for s in (1, 2)]
            self._keep(pool, np.column_stack(cand))


def _mix(pool: _Pool, p_y: np.ndarray, base: float):
    vs = pool.matrix()
    costs = np.array([entropy(v, base) for v in pool.vs])
    res = linprog(costs, A_eq=vs, b_eq=p_y, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise Infeasible(f"no mixture of pooled posteriors reproduces P_Y: {res.message}")
    return res.x, float(res.fun)


def exact_search(inst: ProblemInstance, eps: float, cfg: SearchConfig | None = None) -> DesignResult:
    cfg = cfg or SearchConfig()
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    n_u = inst.ny if cfg.u_cardinality is None else cfg.u_cardinality
    if not 1 <= n_u <= inst.ny:
        raise ValueError(f"u_cardinality must lie in [1, {inst.ny}]")
    search = _ReducedSearch(inst, eps, cfg) if cfg.mode == "reduced" else _RawSearch(inst, eps, cfg)
    if search.estimate() > cfg.max_candidates:
        raise TooLarge(f"about {search.estimate()} grid points exceed the cap of {cfg.max_candidates}")

    base = inst.log_base
    pool = search.initial()
    history = []
    w, cost = _mix(pool, inst.p_y.probs, base)
    history.append(cost)
    for rnd in range(1, cfg.refinement_rounds + 1):
        atoms = [pool.tags[k] if cfg.mode == "reduced" else (pool.vs[k], None) for k in np.flatnonzero(w > ATOM_TOL)]
        search.refine(pool, atoms, rnd)
        w, cost = _mix(pool, inst.p_y.probs, base)
        history.append(cost)

    support = np.flatnonzero(w > ATOM_TOL)
    if support.size > n_u:
        raise TooLarge(f"optimal mixture uses {support.size} symbols, more than u_cardinality={n_u}")
    mech = _mechanism(inst, eps, [pool.vs[k] for k in support], w[support], n_u)
    validate_mechanism(mech, inst)
    h_y = entropy(inst.p_y.probs, base)
    exact = mechanism_utility(mech, inst)
    gap = abs(history[-2] - history[-1]) if len(history) > 1 else math.nan
    diag = Diagnostics(
        eps_range=None,
        in_hxy=True,
        combination_count=len(pool),
        feasible_combinations=len(pool),
        iterations=len(history),
        extra={
            "mode": cfg.mode,
            "criterion": cfg.criterion,
            "grid_gap": gap,
            "utility_history": [h_y - c for c in history],
        },
    )
    combination = tuple(tuple(int(i) for i in np.flatnonzero(pool.vs[k] > 0)) for k in support)
    return DesignResult(
        mechanism=mech,
        combination=combination,
        approx_objective=h_y - exact,
        approx_utility=exact,
        exact_utility=exact,
        diagnostics=diag,
        epsilon=float(eps),
        log_base=base,
    )


def _mechanism(inst: ProblemInstance, eps: float, posts, weights, n_u: int) -> Mechanism:
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    posts = [np.asarray(p) for p in posts]
    pad = n_u - len(posts)
    posts += [inst.p_y.probs.copy()] * pad
    weights = np.concatenate([weights, np.zeros(pad)])
    perts = []
    for v in posts:
        dev = inst.leakage.matrix @ v - inst.p_x.probs
        perts.append(dev / eps if eps > 0 else np.zeros(inst.nx))
    return Mechanism(Distribution(weights), tuple(Distribution(p) for p in posts), tuple(perts), epsilon=float(eps))


@dataclass(frozen=True)
class SandwichReport:
    epsilon: float
    epsilon_prime: float
    g_eps: float
    f_eps: float
    g_eps_prime: float
    tolerance: float

    @property
    def lower_holds(self) -> bool:
        return self.g_eps <= self.f_eps + self.tolerance

    @property
    def upper_holds(self) -> bool:
        return self.f_eps <= self.g_eps_prime + self.tolerance

    @property
    def holds(self) -> bool:
        return self.lower_holds and self.upper_holds


def sandwich_check(inst: ProblemInstance, eps: float, cfg: SearchConfig | None = None, tol: float = 5e-3) -> SandwichReport:
    """Compare the chi-square design at eps and eps' with the l1 design at eps."""
    cfg = cfg or SearchConfig()
    eps_p = eps / math.sqrt(inst.p_x.probs.min())
    g = exact_search(inst, eps, replace(cfg, criterion="chi2")).exact_utility
    f = exact_search(inst, eps, replace(cfg, criterion="l1")).exact_utility
    gp = exact_search(inst, eps_p, replace(cfg, criterion="chi2")).exact_utility
    return SandwichReport(eps, eps_p, g, f, gp, tol)
