#!/usr/bin/env python3
"""Regenerate the convergence sweeps over the bundled scenarios.

Writes one study CSV per sweep into the output directory.  The static
degree sweep and the two linear step sweeps finish in about a minute;
the nonlinear sweeps take a few hours combined and only run with
--full.
"""

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

from cellmtf.scenario import apply_override
from cellmtf.study import run_convergence_study

STATIC_DEGREES = [2, 5, 10, 20, 35, 50]
LINEAR_STEPS = [2.5e-2, 1.25e-2, 6.25e-3, 3.125e-3]
NONLINEAR_STEPS = [2.6e-3, 2.6e-4, 2.6e-5, 2.6e-6]
NONLINEAR_DEGREES = [11, 15, 19, 23, 27]


def bundled(name, **overrides):
    text = (resources.files("cellmtf") / "scenarios" / f"{name}.json").read_text()
    data = json.loads(text)
    for key, value in overrides.items():
        apply_override(data, f"{key}={value}")
    return data


def sweep(kind, data, values, out_path, **kwargs):
    t0 = time.perf_counter()
    report = run_convergence_study(
        kind, data, values, out_path=out_path,
        progress=lambda msg: print(f"  {msg}", file=sys.stderr), **kwargs
    )
    print(f"wrote {out_path} ({time.perf_counter() - t0:.0f}s)")
    for col, rate in report.rates.items():
        print(f"  rate {col} {rate:.3g}")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument(
        "--full", action="store_true",
        help="also run the nonlinear step and degree sweeps (hours)",
    )
    args = parser.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)

    sweep("static_L", bundled("ex1_point_source"), STATIC_DEGREES,
          args.out / "static_degree_sweep.csv")
    for drive, short in (("constant", "constant"), ("exp_decay", "exp")):
        sweep("linear_tau",
              bundled("linear_validation", **{"source.time_kind": drive}),
              LINEAR_STEPS, args.out / f"linear_step_sweep_{short}.csv")

    if args.full:
        sweep("nonlinear_tau", bundled("nonlinear_tau_study"), NONLINEAR_STEPS,
              args.out / "nonlinear_step_sweep.csv")
        sweep("nonlinear_L", bundled("nonlinear_spatial_study"),
              NONLINEAR_DEGREES, args.out / "nonlinear_degree_sweep.csv",
              reference=31, sample_every=8)
    return 0


if __name__ == "__main__":
    sys.exit(main())
