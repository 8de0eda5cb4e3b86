"""Command line front end: ``weakkam <command> --config run.json [--set k=v]``.

Exit status: 0 success, 1 invalid configuration, 2 non-convergence,
3 failed consistency or invariance check.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import _backend
from .config import ConfigError, RunConfig
from .critical import ConsistencyError, critical_value, karp_min_mean_cycle, write_cycle
from .grid import GridError, GridFunction, write_grid_function
from .mather import (conjugate_pair, gradient_consistency, mather_set_approx,
                     write_mather_set)
from .model import ModelError
from .oracle import ReferenceSolution, compare_to_reference, write_reference
from .semigroup import (ConfigurationError, NonConvergenceError, backward_orbit,
                        check_domination, dominated_envelope, solve_weak_kam, write_history)
from .symmetry import (SymmetryError, average, check_invariance, group_from_descriptors,
                       invariant_weak_kam, invariance_harness, verify_symmetry)

COMMANDS = ("solve", "critical", "mather", "symmetry-check", "pendulum-demo")


class CheckFailed(RuntimeError):
    pass


def _write_summary(out: Path, summary: dict):
    summary = dict(summary, backend=_backend.BACKEND)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _initial(cfg: RunConfig, grid):
    if cfg["init"] == "random":
        rng = np.random.default_rng(cfg["seed"])
        return GridFunction(grid, rng.random(grid.size))
    return GridFunction.constant(grid)


def cmd_solve(cfg, out):
    k = cfg.kernel()
    res = solve_weak_kam(k, cfg["direction"], _initial(cfg, k.grid), cfg["tol"], cfg["max_iter"],
                         damping=cfg["damping"])
    write_grid_function(out / "solution.csv", res.u, "u")
    write_history(out / "residuals.csv", res.history)
    summary = {"command": "solve", "direction": res.direction, "c_est": res.c_est,
               "iterations": res.iters, "residual": res.residual,
               "band_boundary_hits": res.boundary_hits}
    if res.direction == "backward":
        start = cfg["orbit_start"]
        if start is None:
            start = int(k.grid.ravel(np.asarray(k.grid.dims) // 2))
        orbit = backward_orbit(res.u, k, start, cfg["orbit_steps"], res.c_est)
        orbit.write_csv(out / "orbit.csv")
        summary["orbit_max_defect"] = float(np.max(np.abs(orbit.defects))) if orbit.defects else 0.0
    return summary


def cmd_critical(cfg, out):
    k = cfg.kernel()
    c, report = critical_value(k, cfg["tol"], cfg["max_iter"], cfg["damping"])
    write_cycle(out / "cycle.csv", k, karp_min_mean_cycle(k))
    return dict({"command": "critical", "c": c}, **report.as_dict())


def cmd_mather(cfg, out):
    k = cfg.kernel()
    pair = conjugate_pair(k, cfg["tol"], cfg["max_iter"], damping=cfg["damping"])
    mmc = karp_min_mean_cycle(k)
    mset = mather_set_approx(pair, cfg["mather_tol"], mmc)
    write_grid_function(out / "u_minus.csv", pair.u_minus, "u_minus")
    write_grid_function(out / "u_plus.csv", pair.u_plus, "u_plus")
    write_grid_function(out / "gap.csv", pair.gap, "gap")
    write_mather_set(out / "mather_set.csv", k, mset)
    write_cycle(out / "cycle.csv", k, mmc)
    return {"command": "mather", "c": pair.c, "c_minus": pair.c_minus, "c_plus": pair.c_plus,
            "mather_set_size": len(mset.points), "cycle": mmc.cycle,
            "gradient_defect": gradient_consistency(pair, cfg.model(), mmc.cycle)}


def cmd_symmetry(cfg, out):
    if not cfg["symmetry"]:
        raise ConfigError("symmetry-check needs a non-empty 'symmetry' list")
    k = cfg.kernel()
    group = group_from_descriptors(k.grid, cfg["symmetry"])
    dev = verify_symmetry(group, k)
    summary = {"command": "symmetry-check", "group_order": len(group), "label": group.label,
               "symmetry_deviation": dev}
    if dev > 1e-12:
        raise CheckFailed(f"kernel is not invariant under the group (deviation {dev:.3e})")
    tol, max_iter = cfg["tol"], cfg["max_iter"]
    inv = invariant_weak_kam(k, group, tol, max_iter, damping=cfg["damping"])
    write_grid_function(out / "invariant_solution.csv", inv.u, "u")
    summary["invariant_solution"] = {"c_est": inv.c_est, "residual": inv.residual,
                                     "deviation": check_invariance(inv.u, group)}
    # averaging a dominated function keeps it dominated
    rng = np.random.default_rng(cfg["seed"])
    w = dominated_envelope(GridFunction(k.grid, rng.random(k.grid.size)), k, inv.c_est + tol)
    summary["averaging_domination_worst"] = check_domination(average(w, group), inv.c_est + tol, k).worst
    report = invariance_harness(k, group, range(cfg["seed"], cfg["seed"] + cfg["harness_seeds"]),
                                tol, max_iter=max_iter, damping=cfg["damping"])
    summary["invariance"] = report.as_dict()
    _write_summary(out, summary)
    if report.asserted and not report.passed(10 * tol):
        raise CheckFailed(f"invariance deviation {report.worst():.3e} exceeds {10 * tol:.1e}")
    return summary


def cmd_pendulum(cfg, out):
    k = cfg.kernel()
    if k.grid.ndim != 1:
        raise ConfigError("pendulum-demo runs on a 1-D grid")
    back = solve_weak_kam(k, "backward", tol=cfg["tol"], max_iter=cfg["max_iter"],
                          damping=cfg["damping"])
    fwd = solve_weak_kam(k, "forward", tol=cfg["tol"], max_iter=cfg["max_iter"],
                         damping=cfg["damping"])
    plus, minus = ReferenceSolution(1), ReferenceSolution(-1)
    theta = k.grid.coords()[:, 0]
    i0 = int(np.argmin(np.abs(theta)))
    with open(out / "comparison.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["theta", "u_backward", "reference_plus", "u_forward", "reference_minus"])
        ub = back.u.values - back.u.values[i0]
        uf = fwd.u.values - fwd.u.values[i0]
        for t, a, b in zip(theta, ub, uf):
            wr.writerow([repr(float(t)), repr(float(a)), repr(plus(t)), repr(float(b)), repr(minus(t))])
    write_reference(out / "reference.csv", np.linspace(-np.pi, np.pi, 513))
    mmc = karp_min_mean_cycle(k)
    return {"command": "pendulum-demo", "c_est_backward": back.c_est, "c_est_forward": fwd.c_est,
            "c_disc": mmc.critical_value(k.dt),
            "sup_norm_backward": compare_to_reference(back.u, plus),
            "sup_norm_forward": compare_to_reference(fwd.u, minus)}


HANDLERS = {"solve": cmd_solve, "critical": cmd_critical, "mather": cmd_mather,
            "symmetry-check": cmd_symmetry, "pendulum-demo": cmd_pendulum}


def build_parser():
    p = argparse.ArgumentParser(prog="weakkam", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration (optional for pendulum-demo)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry; dotted keys reach nested fields")
    p.add_argument("--output", help="output directory (overrides output_dir)")
    return p


def run(command, cfg: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    try:
        summary = HANDLERS[command](cfg, out)
    except NonConvergenceError as exc:
        write_history(out / "residuals.csv", exc.history)
        print(f"weakkam: {exc}", file=sys.stderr)
        return 2
    except (ConsistencyError, CheckFailed) as exc:
        print(f"weakkam: check failed: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ConfigurationError, GridError, ModelError, SymmetryError) as exc:
        print(f"weakkam: invalid configuration: {exc}", file=sys.stderr)
        return 1
    _write_summary(out, summary)
    print(json.dumps(summary, sort_keys=True, default=str))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.config is None and args.command != "pendulum-demo":
        print("weakkam: --config is required for this command", file=sys.stderr)
        return 1
    try:
        cfg = RunConfig.load(args.config, args.overrides)
    except ConfigError as exc:
        print(f"weakkam: invalid configuration: {exc}", file=sys.stderr)
        return 1
    out = Path(args.output or cfg["output_dir"])
    return run(args.command, cfg, out)


if __name__ == "__main__":
    sys.exit(main())
