"""Command-line entry point: ``chordmink <command> ...``.

Commands
--------
solve          solve the discrete problem for a measure (or a density)
chord          chord integral and chord measures of a polytope
measure-check  admissibility checks for a measure
discretize     discretize a spherical density into a measure
verify         run the invariant battery

Every JSON output embeds the resolved configuration.  Parse errors exit
with status 2, domain errors with status 1.  Logs go to stderr.
"""
import argparse
import logging
import math
import secrets
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, chord, io
from .errors import ChordMinkError
from .measure import (discretize, general_position_check, hemisphere_check, hemisphere_margin,
                      sandwich_threshold, subspace_mass_check, total_mass)
from .solver import SolverConfig, solve, solve_continuous
from .verify import battery_from_json, invariant_suite

logger = logging.getLogger("chordmink")

DEFAULT_SEED = 0


# ---------------------------------------------------------------------------
# argument types (violations become usage errors, exit 2)

def _existing_file(text):
    path = Path(text)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return path


def _writable_path(text):
    if text == "-":
        return text
    path = Path(text)
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise argparse.ArgumentTypeError(f"output directory does not exist: {parent}")
    return path


def _seed(text):
    if text == "random":
        return "random"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be a non-negative integer or 'random'")
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be a non-negative integer or 'random'")
    return value


def _ranged(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a {kind.__name__}, got {text!r}")
        if isinstance(value, float) and not math.isfinite(value):
            raise argparse.ArgumentTypeError("value must be finite")
        if lo is not None and (value < lo or (lo_open and value == lo)):
            raise argparse.ArgumentTypeError(f"value must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and (value > hi or (hi_open and value == hi)):
            raise argparse.ArgumentTypeError(f"value must be {'<' if hi_open else '<='} {hi}")
        return value
    return parse


_P = _ranged(float, 0.0, 1.0, hi_open=True)
_Q = _ranged(float, 0.0, lo_open=True)
_Q0 = _ranged(float, 0.0)
_POS_INT = _ranged(int, 1)


def _resolutions(text):
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("resolutions are a comma separated list of integers")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("resolutions must be positive integers")
    return values


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                        help="integer seed (default 0) or 'random' for a fresh one")
    common.add_argument("--emit-plot", action="store_true",
                        help="also write CSV plot data and, if matplotlib is installed, a PNG")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="more log output on stderr")

    parser = argparse.ArgumentParser(prog="chordmink",
                                     description="Discrete L_p chord Minkowski problem toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="solve for a polytope")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--measure", type=_existing_file, help="measure JSON")
    src.add_argument("--density", type=_existing_file,
                     help="density config JSON, e.g. {\"family\": \"uniform\", \"dim\": 2}")
    s.add_argument("--p", type=_P, default=0.5, help="0 <= p < 1 (default 0.5)")
    s.add_argument("--q", type=_Q, default=1.0, help="q > 0 (default 1)")
    s.add_argument("--out", type=_writable_path, default=Path("report.json"))
    s.add_argument("--samples", type=_POS_INT, default=None,
                   help="Monte Carlo samples per facet (MC method only)")
    s.add_argument("--max-iters", type=_POS_INT, default=None, help="outer iteration budget")
    s.add_argument("--starts", type=_POS_INT, default=None, help="number of solver starts")
    s.add_argument("--method", choices=("auto", "quadrature", "mc"), default="auto")
    s.add_argument("--resolutions", type=_resolutions, default=[8, 16, 32],
                   help="discretization levels for --density (default 8,16,32)")

    c = sub.add_parser("chord", parents=[common], help="chord integral and measures of a polytope")
    c.add_argument("--polytope", type=_existing_file, required=True,
                   help="polytope JSON with normals and offsets")
    c.add_argument("--q", type=_Q0, required=True, help="q >= 0 (chord measures need q > 0)")
    c.add_argument("--method", choices=("quadrature", "volume", "lines", "mc"), default="quadrature",
                   help="estimator for I_q; 'mc' also switches the chord measures to Monte Carlo")
    c.add_argument("--samples", type=_POS_INT, default=10**6)
    c.add_argument("--out", type=_writable_path, default="-")

    m = sub.add_parser("measure-check", parents=[common], help="admissibility checks")
    m.add_argument("--measure", type=_existing_file, required=True)
    m.add_argument("--p", type=_P, default=None,
                   help="target p; general position is required for p = 0")
    m.add_argument("--q", type=_Q, default=None,
                   help="target q; enables the subspace mass check for 1 < q < n+1")
    m.add_argument("--out", type=_writable_path, default="-")

    d = sub.add_parser("discretize", parents=[common], help="discretize a spherical density")
    d.add_argument("--density", type=_existing_file, default=None, help="density config JSON")
    d.add_argument("--family", choices=("uniform", "von-mises-fisher"), default="uniform")
    d.add_argument("--dim", type=_ranged(int, 2), default=2)
    d.add_argument("--mean", type=float, nargs="+", default=None, help="von Mises-Fisher mean")
    d.add_argument("--kappa", type=_Q, default=1.0, help="von Mises-Fisher concentration")
    d.add_argument("--mass", type=_Q, default=1.0)
    d.add_argument("--m", type=_POS_INT, required=True, help="resolution (cell diameter < 1/m)")
    d.add_argument("--out", type=_writable_path, default="-")

    v = sub.add_parser("verify", parents=[common], help="run the invariant battery")
    v.add_argument("--battery", default="default",
                   help="'default' or a JSON file with shapes given by normals and offsets")
    v.add_argument("--samples", type=_POS_INT, default=4 * 10**5)
    v.add_argument("--omega-fault", type=_ranged(float, 0.0, lo_open=True), default=None,
                   help="multiply every unit-ball volume by this factor (self-test of the battery)")
    v.add_argument("--out", type=_writable_path, default=Path("table.json"))
    return parser


# ---------------------------------------------------------------------------
# commands

def _resolved(args) -> dict:
    out = {"command": args.command, "version": __version__}
    for key, value in sorted(vars(args).items()):
        if key in ("command", "verbose", "handler"):
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return out


def _plot(P, out, args):
    if not args.emit_plot:
        return
    if P.dim not in (2, 3):
        logger.warning("plot data is only produced for n = 2 and n = 3")
        return
    stem = Path("chordmink") if out == "-" else Path(out).with_suffix("")
    csv_path = stem.with_suffix(".csv")
    io.write_csv(csv_path, io.plot_rows(P))
    logger.info("wrote %s", csv_path)
    from .plotting import PlottingUnavailable, plot_polytope

    try:
        png = plot_polytope(P, stem.with_suffix(".png"))
        logger.info("wrote %s", png)
    except PlottingUnavailable as exc:
        logger.warning("%s; only the CSV was written", exc)


def cmd_solve(args) -> int:
    overrides = {"p": args.p, "q": args.q, "seed": args.seed, "method": args.method}
    if args.samples is not None:
        overrides["chord_samples"] = args.samples
    if args.max_iters is not None:
        overrides["max_outer_iters"] = args.max_iters
    if args.starts is not None:
        overrides["starts"] = args.starts
    config = replace(SolverConfig(), **overrides)
    logger.info("solver config: %s", config)
    if args.measure is not None:
        mu = io.load_measure(args.measure)
        report = solve(mu, config)
        body = report.to_json()
        data = {"config": _resolved(args), "solver_config": body.pop("config"), **body}
        polytope = report.polytope
        logger.info("max_rel %.3e, converged %s", report.max_rel, report.converged)
    else:
        density = io.load_density(args.density)
        result = solve_continuous(density, args.resolutions, config)
        data = {"config": _resolved(args), "density": density.to_json(), **result.to_json()}
        polytope = result.reports[-1].polytope
        logger.info("successive Hausdorff distances: %s", result.hausdorff)
    io.write_json(args.out, data)
    _plot(polytope, args.out, args)
    return 0


def cmd_chord(args) -> int:
    P = io.load_polytope(args.polytope)
    q = args.q
    if args.method == "quadrature":
        I = chord.chord_integral_quadrature(P, q)
    elif args.method == "volume":
        I = chord.chord_integral(P, q, samples=args.samples, seed=args.seed)
    else:
        I = chord.chord_integral_lines(P, q, samples=args.samples, seed=args.seed)
    data = {"config": _resolved(args), "q": q,
            "I_q": {"value": I.value, "std_error": I.std_error, "error_estimate": I.error_estimate,
                    "estimator": I.estimator}}
    if q > 0:
        F = chord.chord_measure(P, q, method="mc" if args.method == "mc" else "auto",
                                samples_per_facet=args.samples, seed=args.seed)
        G = chord.cone_chord_measure(P, q, F=F)
        data["normals"] = P.normals
        data["F_q"] = F.values
        data["F_q_std_error"] = F.std_errors
        data["F_q_error_estimate"] = F.error_estimates
        data["G_q"] = G.values
        data["G_q_std_error"] = G.std_errors
        data["G_q_error_estimate"] = G.error_estimates
    else:
        data["F_q"] = None
        data["G_q"] = None
    io.write_json(args.out, data)
    _plot(P, args.out, args)
    return 0


def cmd_measure_check(args) -> int:
    mu = io.load_measure(args.measure)
    n = mu.dim
    data = {"config": _resolved(args), "dim": n, "size": mu.size, "total_mass": total_mass(mu)}
    ok = True
    hemi = hemisphere_check(mu)
    data["hemisphere"] = {"passes": hemi, "margin": hemisphere_margin(mu.directions)}
    if not hemi:
        logger.error("hemisphere violation: the measure is concentrated on a closed hemisphere")
        ok = False
    spot = False
    try:
        gp = general_position_check(mu.directions, n)
    except ChordMinkError:
        spot = True
        gp = general_position_check(mu.directions, n, spot_check=True, seed=args.seed)
    data["general_position"] = {"passes": gp, "spot_check": spot}
    if args.p == 0.0 and not gp:
        logger.error("general position required for p=0: some n atom directions are "
                     "linearly dependent")
        ok = False
    if args.q is not None and 1.0 < args.q < n + 1.0:
        try:
            rep = subspace_mass_check(mu, args.q)
        except ChordMinkError:
            rep = subspace_mass_check(mu, args.q, spot_check=True, seed=args.seed)
        data["subspace_mass"] = rep.to_json()
        if not rep.passes:
            # a sufficient condition only, so this warns without failing
            logger.warning("subspace mass inequality fails in dimension %d",
                           rep.worst_dimension)
    data["admissible"] = ok
    io.write_json(args.out, data)
    return 0 if ok else 1


def cmd_discretize(args) -> int:
    if args.density is not None:
        cfg = io.read_json(args.density)
    else:
        cfg = {"family": args.family, "dim": args.dim, "mass": args.mass}
        if args.family == "von-mises-fisher":
            if args.mean is None or len(args.mean) != args.dim:
                raise ValueError(f"--mean needs {args.dim} components")
            cfg.update(mean=args.mean, kappa=args.kappa)
    from .measure import density_from_config

    density = density_from_config(cfg)
    mu = discretize(density, args.m, seed=args.seed)
    data = {"config": _resolved(args), "density": density.to_json(), "resolution": args.m,
            "sandwich_threshold": sandwich_threshold(density.dim), **mu.to_json()}
    io.write_json(args.out, data)
    return 0


def cmd_verify(args) -> int:
    battery = None
    if args.battery != "default":
        path = Path(args.battery)
        if not path.is_file():
            raise FileNotFoundError(f"battery file not found: {path}")
        battery = battery_from_json(io.read_json(path))
    report = invariant_suite(args.seed, battery=battery, samples=args.samples,
                             fault=args.omega_fault)
    data = {"config": _resolved(args), **report.to_json(), "digest": report.digest()}
    io.write_json(args.out, data)
    for row in report.failures:
        logger.warning("FAIL %s [%s] %s: %s", row.name, row.shape, row.params, row.detail)
    logger.info("%d rows, %d failed", len(report.rows), len(report.failures))
    return 0 if report.passed else 1


COMMANDS = {
    "solve": cmd_solve,
    "chord": cmd_chord,
    "measure-check": cmd_measure_check,
    "discretize": cmd_discretize,
    "verify": cmd_verify,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.seed == "random":
        args.seed = secrets.randbits(63)
    logger.info("command %s with seed %d", args.command, args.seed)
    try:
        return COMMANDS[args.command](args)
    except (ChordMinkError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"chordmink {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())
