"""LP reformulation, in-repo simplex solver and combination search."""

from privmech.lp.design import (
    DesignResult,
    Diagnostics,
    prepare,
    recover_mechanism,
    solve_approx,
    solve_perfect_privacy,
)
from privmech.lp.model import LPModel, build_eta_lp, dump_lp, solve_lp
from privmech.lp.simplex import LPSolution, simplex

__all__ = [
    "DesignResult",
    "Diagnostics",
    "LPModel",
    "LPSolution",
    "build_eta_lp",
    "dump_lp",
    "prepare",
    "recover_mechanism",
    "simplex",
    "solve_approx",
    "solve_lp",
    "solve_perfect_privacy",
]
