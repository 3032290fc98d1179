"""Command-line entry points for scenario runs and convergence studies.

Exit codes: 0 on success, 2 on configuration problems (bad flags, invalid
scenario, unusable checkpoint), 3 on numerical failure (non-finite state or
a singular system).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .scenario import ScenarioError, apply_override, scenario_from_dict
from .simulate import load_checkpoint, run_scenario, write_snapshot_csv
from .simulate import system_from_scenario
from .study import KINDS, run_convergence_study

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellmtf",
        description="Membrane electropermeabilization runs on spherical cells",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p, out_required=True):
        p.add_argument(
            "--scenario", required=True,
            help="scenario JSON file, or the name of a bundled scenario",
        )
        if out_required:
            p.add_argument("--out", required=True, help="output location")
        p.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="dot-path override applied before validation, "
                 "e.g. time.tau=2.5e-2 (repeatable)",
        )

    p_run = sub.add_parser("run", help="run a scenario and write its artifacts")
    scenario_flags(p_run)
    p_run.add_argument(
        "--checkpoint", help="write the final state here; with --resume, "
                             "also start from the state stored here",
    )
    p_run.add_argument(
        "--resume", action="store_true",
        help="start from the state in --checkpoint instead of rest",
    )

    p_study = sub.add_parser("study", help="run a refinement sweep")
    scenario_flags(p_study)
    p_study.add_argument("--kind", required=True, choices=KINDS)
    p_study.add_argument(
        "--values", required=True,
        help="comma-separated sweep values (degrees or step sizes)",
    )
    p_study.add_argument(
        "--reference", type=float, default=None,
        help="oracle resolution (closed-form degree or overkill degree)",
    )
    p_study.add_argument(
        "--sample-every", type=int, default=1,
        help="sampling stride on the shared comparison grid",
    )

    p_snap = sub.add_parser(
        "snapshot", help="evaluate the scenario's snapshot planes"
    )
    scenario_flags(p_snap)
    p_snap.add_argument(
        "--checkpoint",
        help="membrane state to evaluate at (dynamic scenarios; default rest)",
    )

    p_val = sub.add_parser("validate", help="validate and echo a scenario")
    scenario_flags(p_val, out_required=False)

    return parser


def _load_scenario_data(ref: str) -> dict:
    path = Path(ref)
    if path.exists():
        return json.loads(path.read_text())
    bundled = resources.files("cellmtf") / "scenarios" / f"{ref}.json"
    if bundled.is_file():
        return json.loads(bundled.read_text())
    raise FileNotFoundError(f"no scenario file or bundled scenario named {ref!r}")


def _scenario_from_args(args):
    data = _load_scenario_data(args.scenario)
    for assignment in args.override:
        apply_override(data, assignment)
    return scenario_from_dict(data)


def _cmd_run(args) -> int:
    scenario = _scenario_from_args(args)
    resume_from = None
    if args.resume:
        if not args.checkpoint:
            raise ScenarioError("--resume needs --checkpoint to read from")
        resume_from = args.checkpoint
    artifacts = run_scenario(
        scenario, args.out,
        checkpoint_path=args.checkpoint, resume_from=resume_from,
    )
    for name in sorted(artifacts.files):
        print(f"wrote {artifacts.files[name]}")
    return 0


def _cmd_study(args) -> int:
    data = _load_scenario_data(args.scenario)
    for assignment in args.override:
        apply_override(data, assignment)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ScenarioError(f"--values must be numbers, got {args.values!r}")
    out = Path(args.out)
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"study_{args.kind}.csv"
    report = run_convergence_study(
        args.kind, data, values,
        reference=args.reference, sample_every=args.sample_every,
        out_path=out, progress=lambda msg: print(msg, file=sys.stderr),
    )
    for col, rate in report.rates.items():
        print(f"rate {col} {rate:.4g}")
    print(f"wrote {out}")
    return 0


def _cmd_snapshot(args) -> int:
    scenario = _scenario_from_args(args)
    if not scenario.outputs.snapshots:
        raise ScenarioError("scenario defines no snapshot planes")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    system = system_from_scenario(scenario)

    t = 0.0
    v = None
    if scenario.mode != "static":
        if args.checkpoint:
            state, _ = load_checkpoint(args.checkpoint)
            t, v = state.time, state.v
        else:
            v = np.zeros((system.n_cells, system.nm))
    phi_d, phi_n = scenario.source.as_function(
        scenario.cells, scenario.sigma_out, system.L
    )(t)
    traces = system.solve_static(v=v, phi_d=phi_d, phi_n=phi_n)

    for i, snap_cfg in enumerate(scenario.outputs.snapshots):
        path = out_dir / f"snapshot_{i}.csv"
        write_snapshot_csv(path, scenario, traces, snap_cfg, t=t)
        print(f"wrote {path}")
    return 0


def _cmd_validate(args) -> int:
    scenario = _scenario_from_args(args)
    print(json.dumps(scenario.to_dict(), indent=2))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "study": _cmd_study,
    "snapshot": _cmd_snapshot,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    # LinAlgError subclasses ValueError, so numerical failures go first
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ScenarioError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
