"""Command-line interface.

    modsynth synth  <task.json> [--mode conventional] [--seed N] [--out DIR] [--workers N]
    modsynth check  <task.json> <composition.json>
    modsynth plan   <result.json> --from I --to J [--out DIR]
    modsynth export <composition.json> [--out model.urdf]

Exit codes: 0 feasible or valid, 2 infeasible, 1 error.
"""
import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .composition import build_chain
from .library import LibraryError, load_library
from .planner import EndpointInCollision, PlannerSettings, PlanningFailed, plan, shortcut, verify_path_torques
from .results import (
    load_composition, load_result, read_json, save_composition, save_result, write_history_csv, write_json,
    write_path_csv, write_torque_csv,
)
from .synthesis import GaSettings, check_composition, synthesize
from .taskfile import TaskFileError, load_task
from .urdf import emit_urdf

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

log = logging.getLogger("modsynth")


def _library(args, extras=None, base_dir="."):
    path = args.library
    if path is None and extras and extras.get("library"):
        path = os.path.join(base_dir, extras["library"])
    return load_library(path), path


def _settings(task, args):
    settings = GaSettings.from_dict(task.settings) if task.settings else GaSettings()
    changes = {}
    if args.seed is not None:
        changes["rng_seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.population is not None:
        changes["population"] = args.population
    if args.generations is not None:
        changes["generations"] = args.generations
    if args.max_dof is not None:
        changes["max_dof"] = args.max_dof
    if getattr(args, "mode", None) == "conventional" or task.mode == "conventional_only":
        changes["conventional"] = True
    return replace(settings, **changes)


def cmd_synth(args):
    task, scene, extras = load_task(args.task)
    library, lib_path = _library(args, extras, os.path.dirname(os.path.abspath(args.task)))
    if args.mode == "conventional":
        task.mode = "conventional_only"
    settings = _settings(task, args)
    os.makedirs(args.out, exist_ok=True)
    result = synthesize(task, scene, library, settings)
    save_result(os.path.join(args.out, "result.json"), result, task, scene, lib_path)
    write_history_csv(os.path.join(args.out, "history.csv"), result.history)
    if result.composition is not None:
        save_composition(os.path.join(args.out, "composition.json"), result.composition)
        with open(os.path.join(args.out, "model.urdf"), "w") as fh:
            fh.write(emit_urdf(result.chain, task.name))
        write_torque_csv(os.path.join(args.out, "torques.csv"), result.evaluation.torques,
                         result.chain.effort_limits)
    if args.plots:
        from .plotting import plot_history, plot_tsl_torques

        plot_history(result.history, os.path.join(args.out, "history.svg"))
        if result.composition is not None:
            plot_tsl_torques(result.evaluation.torques, result.chain.effort_limits,
                             os.path.join(args.out, "tsl_torques.svg"))
    label = result.composition.label() if result.composition else "-"
    print(f"feasible={str(result.feasible).lower()} dof={result.composition.dof if result.composition else 0} "
          f"objective={result.objective_value:.6g} fitness={result.fitness:.6g} composition={label}")
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_check(args):
    task, scene, extras = load_task(args.task)
    library, _ = _library(args, extras, os.path.dirname(os.path.abspath(args.task)))
    comp = load_composition(args.composition)
    stored = read_json(args.composition).get("ik_solutions")
    settings = replace(_settings(task, args), ik_seeds=args.ik_seeds)
    ev, report = check_composition(comp, task, scene, library, settings, stored)
    out = {"composition": comp.label(), "feasible": bool(ev.feasible and report.ok),
           "objective_value": ev.objective, "verification": report.to_dict(),
           "ik_solutions": [np.asarray(q).tolist() for q in ev.ik_solutions]}
    if args.out:
        write_json(args.out, out)
    print(f"feasible={str(out['feasible']).lower()} composition={comp.label()} "
          f"max_position_residual={max(report.position_residuals):.3g} "
          f"min_clearance={min(report.clearances):.3g}")
    return EXIT_OK if out["feasible"] else EXIT_INFEASIBLE


def cmd_plan(args):
    data, task, scene, extras = load_result(args.result)
    library, _ = _library(args, extras, os.path.dirname(os.path.abspath(args.result)))
    if data["composition"] is None:
        raise ValueError("result holds no composition")
    comp = load_composition(args.result)
    chain = build_chain(comp, library)
    sols = data["ik_solutions"]
    for name, i in (("--from", args.start), ("--to", args.goal)):
        if not 0 <= i < len(sols):
            raise ValueError(f"{name} {i} out of range: result has {len(sols)} TSL solutions")
    settings = PlannerSettings(rng_seed=args.seed or 0, max_iterations=args.max_iterations)
    try:
        path = plan(chain, scene, sols[args.start], sols[args.goal], settings)
    except (EndpointInCollision, PlanningFailed) as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.shortcut:
        path = shortcut(path, chain, scene, attempts=args.shortcut, rng_seed=args.seed or 0)
    report = verify_path_torques(chain, path, payload=task.payload)
    os.makedirs(args.out, exist_ok=True)
    write_path_csv(os.path.join(args.out, "path.csv"), path.as_array())
    write_torque_csv(os.path.join(args.out, "torques.csv"), report.torques, report.limits)
    if args.plots:
        from .plotting import plot_torque_profile

        plot_torque_profile(report.times, report.torques, report.limits,
                            os.path.join(args.out, "torque_profile.svg"))
    print(f"waypoints={len(path)} length={path.length():.4g} rad "
          f"max_torque={np.array2string(report.max_abs, precision=3)} torque_ok={str(report.ok).lower()}")
    return EXIT_OK if report.ok else EXIT_INFEASIBLE


def cmd_export(args):
    library, _ = _library(args)
    comp = load_composition(args.composition)
    text = emit_urdf(build_chain(comp, library), args.name)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="modsynth", description="Task-based synthesis of modular manipulators.")
    p.add_argument("-v", "--verbose", action="store_true", help="log every GA generation")
    p.add_argument("--library", help="library config JSON (default: $MODSYNTH_LIBRARY or the built-in catalog)")
    sub = p.add_subparsers(dest="command", required=True)

    def ga_options(sp):
        sp.add_argument("--seed", type=int, help="GA and IK seed")
        sp.add_argument("--workers", type=int, help="parallel evaluation processes")
        sp.add_argument("--population", type=int)
        sp.add_argument("--generations", type=int)
        sp.add_argument("--max-dof", type=int, help="largest DoF the search may use (2-6)")

    s = sub.add_parser("synth", help="synthesize a composition for a task")
    s.add_argument("task")
    s.add_argument("--mode", choices=["full", "conventional"], default="full")
    s.add_argument("--out", default="out")
    s.add_argument("--no-plots", dest="plots", action="store_false")
    ga_options(s)
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("check", help="re-verify a composition against a task")
    c.add_argument("task")
    c.add_argument("composition")
    c.add_argument("--out", help="write the report as JSON")
    c.add_argument("--ik-seeds", type=int, default=50, help="IK restarts per TSL when solving afresh")
    ga_options(c)
    c.set_defaults(func=cmd_check)

    pl = sub.add_parser("plan", help="plan a path between two TSL solutions of a result")
    pl.add_argument("result")
    pl.add_argument("--from", dest="start", type=int, required=True)
    pl.add_argument("--to", dest="goal", type=int, required=True)
    pl.add_argument("--out", default="out")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--max-iterations", type=int, default=20000)
    pl.add_argument("--shortcut", type=int, default=100, help="shortcut attempts (0 disables)")
    pl.add_argument("--no-plots", dest="plots", action="store_false")
    pl.set_defaults(func=cmd_plan)

    e = sub.add_parser("export", help="write the URDF of a composition")
    e.add_argument("composition")
    e.add_argument("--out", help="output file (default: stdout)")
    e.add_argument("--name", default="modular_robot")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TaskFileError, LibraryError, ValueError, OSError) as exc:
        print(f"modsynth: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
