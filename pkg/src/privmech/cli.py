"""Command line front end.

Every subcommand reads an optional JSON config (``--config``); flags given on
the command line override the matching config keys. Results go to
``<output>.json`` (and ``<output>.csv`` for sweeps) or to stdout when no
output path is set.

Exit codes: 0 success, 2 config error, 3 infeasible or out-of-scope
instance, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from privmech.errors import ConfigError, EpsilonRangeWarning, PrivMechError
from privmech.lp import prepare, solve_approx, solve_perfect_privacy
from privmech.invsolver import solve_invertible
from privmech.metrics import map_error, mmse
from privmech.oracle import SearchConfig, exact_search
from privmech.probkit import (
    Distribution,
    Mechanism,
    ProblemInstance,
    check_privacy,
    mechanism_utility,
    parse_log_base,
    validate_mechanism,
)
from privmech.rowspace import epsilon_range
from privmech.watermark import watermark_instance

log = logging.getLogger("privmech")

TABLE_HEADER = (
    "epsilon",
    "alpha",
    "approx_utility",
    "exact_utility",
    "perfect_utility",
    "oracle_utility",
    "map_error",
    "mmse_y_norm",
    "mmse_x_norm",
    "eps1",
    "eps2",
    "in_hxy",
)
SOLVERS = ("approx", "perfect", "oracle", "invertible", "all")
KNOWN_KEYS = {
    "p_x_given_y",
    "p_y",
    "instance_file",
    "epsilon",
    "epsilon_sweep",
    "alpha",
    "alpha_sweep",
    "log_base",
    "x_values",
    "y_values",
    "solver",
    "output",
    "force_hxy",
    "combination_cap",
    "workers",
    "grid_resolution",
    "refinement_rounds",
    "mechanism",
}


# ---------------------------------------------------------------- parsing


def parse_number(value, field: str) -> float:
    """Decimal or ``"p/q"`` string to float."""
    if isinstance(value, bool):
        raise ConfigError(f"{field}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{field}: cannot parse {value!r} as a number") from exc
    raise ConfigError(f"{field}: expected a number, got {type(value).__name__}")


def parse_vector(value, field: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{field}: expected a non-empty list")
    return np.array([parse_number(v, f"{field}[{i}]") for i, v in enumerate(value)])


def parse_matrix(value, field: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{field}: expected a non-empty list of rows")
    rows = [parse_vector(r, f"{field}[{i}]") for i, r in enumerate(value)]
    if len({r.size for r in rows}) != 1:
        raise ConfigError(f"{field}: rows have different lengths")
    return np.vstack(rows)


def load_json(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def merge_config(args: argparse.Namespace) -> dict:
    cfg = load_json(args.config) if args.config else {}
    unknown = set(cfg) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    overrides = {
        "epsilon": args.epsilon,
        "alpha": args.alpha,
        "log_base": args.log_base,
        "solver": args.solver,
        "output": args.output,
        "combination_cap": args.cap,
        "workers": args.workers,
        "grid_resolution": args.grid_resolution,
        "refinement_rounds": args.refinement_rounds,
    }
    for key, val in overrides.items():
        if val is not None:
            cfg[key] = val
    if args.force_hxy:
        cfg["force_hxy"] = True
    if getattr(args, "alphas", None):
        cfg["alpha_sweep"] = args.alphas
    if getattr(args, "sweep", None):
        start, stop, count = args.sweep
        cfg["epsilon_sweep"] = {"start": start, "stop": stop, "count": int(count), "scale": args.scale}
    if getattr(args, "mechanism", None):
        cfg["mechanism"] = load_json(args.mechanism)
    return cfg


def _log_base(cfg) -> float:
    try:
        return parse_log_base(cfg.get("log_base", 2))
    except ValueError as exc:
        raise ConfigError(f"log_base: {exc}") from exc


def instance_from_config(cfg: dict, alpha=None) -> ProblemInstance:
    """Build the instance from exactly one source: inline, file, or watermark alpha."""
    base = _log_base(cfg)
    inline = "p_x_given_y" in cfg or "p_y" in cfg
    from_file = "instance_file" in cfg
    wm = alpha is not None or "alpha" in cfg or "alpha_sweep" in cfg
    if inline + from_file + wm != 1:
        raise ConfigError("exactly one instance source is required: p_x_given_y/p_y, instance_file, or alpha")
    if wm:
        a = parse_number(cfg.get("alpha") if alpha is None else alpha, "alpha")
        try:
            return watermark_instance(a, log_base=base)
        except ValueError as exc:
            raise ConfigError(f"alpha: {exc}") from exc
    src = load_json(cfg["instance_file"]) if from_file else cfg
    if "p_x_given_y" not in src or "p_y" not in src:
        raise ConfigError("an inline instance needs both p_x_given_y and p_y")
    lk = parse_matrix(src["p_x_given_y"], "p_x_given_y")
    py = parse_vector(src["p_y"], "p_y")
    xv = parse_vector(src["x_values"], "x_values") if "x_values" in src else None
    yv = parse_vector(src["y_values"], "y_values") if "y_values" in src else None
    return ProblemInstance.from_arrays(lk, py, x_values=xv, y_values=yv, log_base=base)


def epsilon_grid(cfg: dict) -> list[float]:
    if "epsilon_sweep" in cfg:
        sw = cfg["epsilon_sweep"]
        if not isinstance(sw, dict):
            raise ConfigError("epsilon_sweep: expected an object with start, stop, count")
        try:
            start = parse_number(sw["start"], "epsilon_sweep.start")
            stop = parse_number(sw["stop"], "epsilon_sweep.stop")
            count = int(sw["count"])
        except KeyError as exc:
            raise ConfigError(f"epsilon_sweep: missing {exc.args[0]}") from exc
        scale = sw.get("scale", "linear")
        if count < 1 or start <= 0 or stop < start:
            raise ConfigError("epsilon_sweep: need 0 < start <= stop and count >= 1")
        if scale == "linear":
            return [float(v) for v in np.linspace(start, stop, count)]
        if scale == "log":
            return [float(v) for v in np.geomspace(start, stop, count)]
        raise ConfigError(f"epsilon_sweep.scale: expected 'linear' or 'log', got {scale!r}")
    if "epsilon" in cfg:
        eps = parse_number(cfg["epsilon"], "epsilon")
        if eps < 0:
            raise ConfigError("epsilon must be non-negative")
        return [eps]
    raise ConfigError("missing epsilon or epsilon_sweep")


def single_epsilon(cfg: dict) -> float:
    grid = epsilon_grid(cfg)
    if len(grid) != 1:
        raise ConfigError("this subcommand takes a single epsilon")
    return grid[0]


def solver_choice(cfg: dict) -> str:
    s = cfg.get("solver", "approx")
    if s not in SOLVERS:
        raise ConfigError(f"solver: expected one of {', '.join(SOLVERS)}, got {s!r}")
    return s


def search_config(cfg: dict) -> SearchConfig:
    kw = {}
    if "grid_resolution" in cfg:
        kw["grid_resolution"] = int(cfg["grid_resolution"])
    if "refinement_rounds" in cfg:
        kw["refinement_rounds"] = int(cfg["refinement_rounds"])
    try:
        return SearchConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------- serialisation


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def mechanism_doc(m: Mechanism) -> dict:
    return {
        "p_u": [_num(v) for v in m.p_u.probs],
        "posteriors": [[_num(v) for v in p.probs] for p in m.posteriors],
        "perturbations": [[_num(v) for v in j] for j in m.perturbations],
        "epsilon": _num(m.epsilon),
    }


def instance_doc(inst: ProblemInstance) -> dict:
    return {
        "p_x_given_y": inst.leakage.matrix.tolist(),
        "p_y": inst.p_y.probs.tolist(),
        "p_x": inst.p_x.probs.tolist(),
        "x_values": None if inst.x_values is None else list(map(float, inst.x_values)),
        "y_values": None if inst.y_values is None else list(map(float, inst.y_values)),
        "log_base": "e" if math.isclose(inst.log_base, math.e) else inst.log_base,
    }


def checked(m: Mechanism, inst: ProblemInstance, eps: float) -> Mechanism:
    """Re-validate a mechanism before it is written anywhere."""
    validate_mechanism(m, inst, tol=1e-6)
    rep = check_privacy(m, inst, eps, tol=1e-7)
    if not rep.passes:
        raise PrivMechError(f"mechanism violates the privacy constraint at symbols {rep.violating}")
    return m


def design_doc(res, inst, eps) -> dict:
    m = checked(res.mechanism, inst, eps)
    return {
        "approx_objective": _num(res.approx_objective),
        "approx_utility": _num(res.approx_utility),
        "exact_utility": _num(res.exact_utility),
        "combination": [list(map(int, om)) for om in res.combination],
        "mechanism": mechanism_doc(m),
        "warnings": list(res.diagnostics.warnings),
        **({"diagnostics": _clean(res.diagnostics.extra)} if res.diagnostics.extra else {}),
    }


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    return "%.6g" % x


def table_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for r in rows:
        w.writerow([fmt(r.get(k)) for k in TABLE_HEADER])
    return buf.getvalue()


def emit(cfg: dict, doc: dict, rows: list[dict] | None = None) -> None:
    text = json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"
    out = cfg.get("output")
    if out:
        Path(out).with_suffix(".json").write_text(text)
        if rows is not None:
            Path(out).with_suffix(".csv").write_text(table_text(rows))
    elif rows is not None:
        sys.stdout.write(table_text(rows))
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- running


def _solve_kwargs(cfg):
    kw = {"force": bool(cfg.get("force_hxy", False))}
    if "combination_cap" in cfg:
        kw["cap"] = int(cfg["combination_cap"])
    if "workers" in cfg:
        kw["workers"] = int(cfg["workers"])
    return kw


def sweep_point(inst: ProblemInstance, eps: float, cfg: dict, solver: str, alpha=None, prepared=None) -> tuple[dict, dict]:
    """Run the requested solvers at one point; return (document entry, table row)."""
    entry: dict = {"epsilon": eps, "alpha": alpha, "solvers": {}}
    row: dict = {"epsilon": eps, "alpha": alpha}
    kw = _solve_kwargs(cfg)
    primary = None

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EpsilonRangeWarning)
        if solver == "invertible" or (solver in ("approx", "all") and inst.is_square):
            sol = solve_invertible(inst, eps)
            m = checked(sol.mechanism, inst, eps)
            entry["solvers"]["invertible"] = {
                "approx_utility": sol.approx_utility,
                "exact_utility": sol.exact_utility,
                "sigma_max": sol.sigma_max,
                "scale": sol.scale,
                "mechanism": mechanism_doc(m),
            }
            primary = (sol.approx_utility, sol.exact_utility, m)
        if solver in ("approx", "all") and not inst.is_square:
            res = solve_approx(inst, eps, prepared=prepared, **kw)
            entry["solvers"]["approx"] = design_doc(res, inst, eps)
            primary = (res.approx_utility, res.exact_utility, res.mechanism)
        if solver in ("approx", "perfect", "all"):
            res0 = solve_perfect_privacy(inst, prepared=prepared, **kw)
            entry["solvers"]["perfect"] = design_doc(res0, inst, 0.0)
            row["perfect_utility"] = res0.exact_utility
            if solver == "perfect":
                primary = (res0.approx_utility, res0.exact_utility, res0.mechanism)
        if solver in ("oracle", "all"):
            ores = exact_search(inst, eps, search_config(cfg))
            entry["solvers"]["oracle"] = design_doc(ores, inst, eps)
            row["oracle_utility"] = ores.exact_utility
            if solver == "oracle":
                primary = (None, ores.exact_utility, ores.mechanism)
    entry["warnings"] = sorted({str(w.message) for w in caught})

    if primary is not None:
        approx_u, exact_u, m = primary
        row.update(
            approx_utility=approx_u,
            exact_utility=exact_u,
            map_error=map_error(m, inst),
            mmse_y_norm=mmse(m, inst, "Y", normalized=True),
            mmse_x_norm=mmse(m, inst, "X", normalized=True),
        )
    if prepared is not None:
        rng = epsilon_range(prepared[1].records)
        row.update(eps1=rng.eps1, eps2=rng.eps2, in_hxy=prepared[1].in_hxy)
        entry.update(eps1=rng.eps1, eps2=rng.eps2, in_hxy=prepared[1].in_hxy)
    log.info("epsilon=%g alpha=%s exact_utility=%s", eps, alpha, fmt(row.get("exact_utility")))
    return entry, row


def cmd_solve(cfg) -> int:
    inst = instance_from_config(cfg)
    eps = single_epsilon(cfg)
    alpha = parse_number(cfg["alpha"], "alpha") if "alpha" in cfg else None
    entry, row = sweep_point(inst, eps, cfg, solver_choice(cfg), alpha, prepare(inst))
    emit(cfg, {"command": "solve", "instance": instance_doc(inst), "result": entry, "row": row})
    return 0


def cmd_sweep_eps(cfg) -> int:
    inst = instance_from_config(cfg)
    prepared = prepare(inst)
    solver = solver_choice(cfg)
    entries, rows = [], []
    alpha = parse_number(cfg["alpha"], "alpha") if "alpha" in cfg else None
    for eps in epsilon_grid(cfg):
        e, r = sweep_point(inst, eps, cfg, solver, alpha, prepared)
        entries.append(e)
        rows.append(r)
    emit(cfg, {"command": "sweep-eps", "instance": instance_doc(inst), "results": entries}, rows)
    return 0


def cmd_sweep_alpha(cfg) -> int:
    alphas = cfg.get("alpha_sweep")
    if not isinstance(alphas, list) or not alphas:
        raise ConfigError("alpha_sweep: expected a non-empty list")
    if "p_x_given_y" in cfg or "p_y" in cfg or "instance_file" in cfg:
        raise ConfigError("sweep-alpha uses the watermark family; remove the inline instance")
    eps = single_epsilon(cfg)
    solver = solver_choice(cfg)
    entries, rows = [], []
    for i, a in enumerate(alphas):
        alpha = parse_number(a, f"alpha_sweep[{i}]")
        inst = instance_from_config(cfg, alpha=alpha)
        e, r = sweep_point(inst, eps, cfg, solver, alpha, prepare(inst))
        e["instance"] = instance_doc(inst)
        entries.append(e)
        rows.append(r)
    emit(cfg, {"command": "sweep-alpha", "results": entries}, rows)
    return 0


def cmd_oracle(cfg) -> int:
    cfg = {**cfg, "solver": "oracle"}
    return cmd_solve(cfg)


def cmd_eps_range(cfg) -> int:
    inst = instance_from_config(cfg)
    _, omegas = prepare(inst)
    rng = epsilon_range(omegas.records)
    doc = {
        "command": "eps-range",
        "eps1": rng.eps1,
        "eps2": rng.eps2,
        "bound": rng.bound,
        "in_hxy": omegas.in_hxy,
        "omegas": [
            {
                "omega": list(r.omega),
                "class": r.cls.name,
                "t": r.t.tolist(),
                "sigma_max": r.sigma_max,
                "radius": r.radius,
            }
            for r in omegas.records
        ],
    }
    emit(cfg, doc)
    return 0


def cmd_validate(cfg) -> int:
    """Check a user-supplied mechanism; exit 3 if it breaks the marginal or the leakage bound."""
    if "mechanism" not in cfg:
        raise ConfigError("validate needs a mechanism (config key or --mechanism file)")
    inst = instance_from_config(cfg)
    eps = single_epsilon(cfg)
    md = cfg["mechanism"]
    try:
        p_u = Distribution(parse_vector(md["p_u"], "mechanism.p_u"))
        posts = [Distribution(parse_vector(p, f"mechanism.posteriors[{k}]")) for k, p in enumerate(md["posteriors"])]
    except KeyError as exc:
        raise ConfigError(f"mechanism: missing {exc.args[0]}") from exc
    perts = [(inst.leakage.matrix @ p.probs - inst.p_x.probs) / eps if eps > 0 else np.zeros(inst.nx) for p in posts]
    m = Mechanism(p_u, tuple(posts), tuple(perts), epsilon=eps)
    rep = check_privacy(m, inst, eps)
    resid = float(np.abs(m.posterior_matrix() @ p_u.probs - inst.p_y.probs).max())
    ok = rep.passes and resid <= 1e-7
    doc = {
        "command": "validate",
        "passes": ok,
        "marginal_residual": resid,
        "deviations": [float(d) for d in rep.deviations],
        "max_deviation": rep.max_deviation,
        "violating": list(map(int, rep.violating)),
    }
    if ok:
        validate_mechanism(m, inst)
        doc["utility"] = mechanism_utility(m, inst)
    emit(cfg, doc)
    return 0 if ok else 3


def cmd_watermark(cfg) -> int:
    alpha = parse_number(cfg.get("alpha", 0), "alpha")
    inst = instance_from_config({"alpha": alpha, "log_base": cfg.get("log_base", 2)})
    emit(cfg, {"command": "watermark", "alpha": alpha, "instance": instance_doc(inst)})
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "sweep-eps": cmd_sweep_eps,
    "sweep-alpha": cmd_sweep_alpha,
    "oracle": cmd_oracle,
    "eps-range": cmd_eps_range,
    "validate": cmd_validate,
    "watermark": cmd_watermark,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--epsilon", type=str, help="leakage bound (decimal or p/q)")
    common.add_argument("--alpha", type=str, help="watermark correlation in [0, 1]")
    common.add_argument("--log-base", dest="log_base", choices=["2", "e"])
    common.add_argument("--solver", choices=SOLVERS)
    common.add_argument("--output", help="output path prefix (.json / .csv are appended)")
    common.add_argument("--force-hxy", action="store_true", help="solve even if a base point is on the boundary")
    common.add_argument("--cap", type=int, help="maximum number of combinations to enumerate")
    common.add_argument("--workers", type=int, help="worker processes (default: PRIVMECH_WORKERS or 1)")
    common.add_argument("--grid-resolution", dest="grid_resolution", type=int)
    common.add_argument("--refinement-rounds", dest="refinement_rounds", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="privmech", description="Privacy-utility mechanism design under a per-symbol l1 leakage bound.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "oracle", "eps-range", "watermark"):
        sub.add_parser(name, parents=[common])
    se = sub.add_parser("sweep-eps", parents=[common])
    se.add_argument("--sweep", nargs=3, metavar=("START", "STOP", "COUNT"), type=float)
    se.add_argument("--scale", choices=["linear", "log"], default="linear")
    sa = sub.add_parser("sweep-alpha", parents=[common])
    sa.add_argument("--alphas", nargs="+")
    va = sub.add_parser("validate", parents=[common])
    va.add_argument("--mechanism", help="JSON file with p_u and posteriors")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    try:
        cfg = merge_config(args)
        return COMMANDS[args.command](cfg)
    except PrivMechError as exc:
        print(f"privmech {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        # e.g. epsilon beyond the range where the invertible design stays a distribution
        print(f"privmech {args.command}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
