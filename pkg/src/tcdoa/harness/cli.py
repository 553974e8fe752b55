"""Command line entry point.

Subcommands (each takes a YAML config path and an optional ``--seed``)::

    tcdoa bounds-sweep   CONFIG [--output CSV]
    tcdoa montecarlo     CONFIG [--output CSV] [--diagnostics CSV] [--workers N]
    tcdoa verify         CONFIG [--count N]
    tcdoa dump-snapshots CONFIG --output FILE [--stream K]

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..bounds import SingularBoundError
from ..ivssf import IvError
from ..matstack import MatrixError
from ..sampler import GENERATOR_NAME, RngSpec
from ..scenario import ScenarioError, build_scenario
from . import io
from .config import ConfigError, load_document, experiment_from_document, load_verify, scenario_from_dict
from .experiments import NumericalFailure, _draw, run_bounds_sweep, run_montecarlo
from .theorems import run_theorem_suite

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("tcdoa")


def _spec(args):
    spec = experiment_from_document(load_document(args.config))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if getattr(args, "workers", None):
        spec = replace(spec, workers=args.workers)
    return spec


def _output(args, spec, default_name):
    out = args.output or spec.output or default_name
    return Path(out)


def cmd_bounds_sweep(args):
    spec = _spec(args)
    table = run_bounds_sweep(spec)
    path = _output(args, spec, Path(args.config).with_suffix(".bounds.csv").name)
    io.write_bounds_csv(table, path)
    io.write_metadata(path.with_suffix(".meta.json"), axis=spec.axis, mode=spec.mode)
    if not args.no_plot:
        io.write_plot_script(path, spec.axis, "bounds")
    print(path)
    return EXIT_OK


def cmd_montecarlo(args):
    spec = _spec(args)
    diag = [] if args.diagnostics else None
    report = run_montecarlo(spec, diagnostics=diag)
    path = _output(args, spec, Path(args.config).with_suffix(".csv").name)
    io.emit_outputs(report, path, plot=not args.no_plot, trials=spec.trials, M=spec.M)
    if diag is not None:
        io.write_diagnostics_csv(diag, args.diagnostics)
    print(path)
    return EXIT_OK


def cmd_verify(args):
    vs = load_verify(args.config)
    seed = vs.seed if args.seed is None else args.seed
    count = vs.count if args.count is None else args.count
    report = run_theorem_suite(seed, count, adversarial=args.adversarial)
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_dump_snapshots(args):
    doc = load_document(args.config)
    cfg = scenario_from_dict(doc.get("scenario"))
    seed = args.seed if args.seed is not None else (doc.get("experiment") or {}).get("seed", 0)
    scn = build_scenario(cfg)
    X = _draw(scn, cfg, RngSpec(seed, args.stream))
    io.dump_snapshots(args.output, X, seed)
    io.write_metadata(Path(args.output).with_suffix(".meta.json"), generator=GENERATOR_NAME,
                      seed=seed, stream=args.stream, scenario_hash=scn.fingerprint(),
                      shape=list(np.shape(X)))
    print(args.output)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="tcdoa", description="DOA bounds and IV-SSF experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="YAML configuration file")
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")

    sp = sub.add_parser("bounds-sweep", help="CRB table along the sweep axis")
    common(sp)
    sp.add_argument("--output", "-o")
    sp.add_argument("--no-plot", action="store_true")
    sp.set_defaults(func=cmd_bounds_sweep)

    sp = sub.add_parser("montecarlo", help="IV-SSF bias/std along the sweep axis")
    common(sp)
    sp.add_argument("--output", "-o")
    sp.add_argument("--diagnostics", help="per-trial CSV")
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--no-plot", action="store_true")
    sp.set_defaults(func=cmd_montecarlo)

    sp = sub.add_parser("verify", help="randomized bound and identity checks")
    common(sp)
    sp.add_argument("--count", type=int, default=None)
    sp.add_argument("--adversarial", type=int, default=0,
                    help="extra near-coherent scenarios (source gap 1e-3)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("dump-snapshots", help="write one snapshot matrix as a binary dump")
    common(sp)
    sp.add_argument("--output", "-o", required=True)
    sp.add_argument("--stream", type=int, default=0)
    sp.set_defaults(func=cmd_dump_snapshots)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ScenarioError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, SingularBoundError, IvError, MatrixError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except io.OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
