"""Command-line interface: ``heatrecon <forward|invert|spectrum|compare|prep-image>``.

Every option can also come from a JSON file given with ``--config``; keys
are the option names with dashes replaced by underscores.  Explicit flags
override the file, and unknown keys are rejected.

Exit codes: 0 success, 1 numerical failure, 2 configuration error,
3 non-recoverable problem.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .field import resize_bilinear
from .forward import HeatSource, NumericalError, assemble, integrate
from .imageio import read_image, write_pgm
from .pipeline import (
    DEFAULT_EPSILON,
    DEFAULT_GAMMA,
    ExperimentSpec,
    NonRecoverableError,
    build_grid,
    build_initial_state,
    build_truth,
    compare_configs,
    resolve_image,
    run_experiment,
)
from .spectral import eigensystem, sensitivity_report, write_report

log = logging.getLogger("heatrecon")

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG, EXIT_DEGENERATE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _words(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


# name -> (default, type, help).  Text after "|" in help describes a default
# that is filled in later (per dimension, for instance).
PROBLEM_OPTS = {
    "dim": (1, int, "spatial dimension, 1 (circle) or 2 (torus)"),
    "J": (None, int, "nodes per axis|100 in 1D, 32 in 2D"),
    "truth": ("heaviside", str, "1D test case: heaviside, piecelinear3s, piecelinear4w, or constant"),
    "image": (None, str, "2D truth image (.pgm or .csv, or mnist:<k> for a bundled digit)|none"),
    "a_const": (0.01, float, "conductivity used by --truth constant"),
    "u0": (None, str, "initial condition: sin_2pix, coscos or constant|sin_2pix in 1D, coscos in 2D"),
    "source": (None, str, "heat source: sin_pi_t, sin_2pi_t or zero|sin_pi_t in 1D, sin_2pi_t in 2D"),
}
RUN_OPTS = {
    "sensors": (None, str, "sensor layout: circle, orbits4, static16, static64|circle in 1D, orbits4 in 2D"),
    "M": (None, int, "measurement times per sensor|100 in 1D, 256 in 2D"),
    "noise_sd": (0.0, float, "standard deviation of additive Gaussian measurement noise"),
    "epochs": (500, int, "gradient-descent epochs"),
    "gamma": (None, float, f"step size|{DEFAULT_GAMMA[1]:g} in 1D, {DEFAULT_GAMMA[2]:g} in 2D"),
    "epsilon": (DEFAULT_EPSILON, float, "squared gradient norm below which a Fourier mode is added (1D)"),
    "N": (9, int, "highest Fourier frequency (1D); dim theta <= 2N+1"),
    "init_log_a": (math.log(1e-2), float, "initial constant log-conductivity"),
    "seed": (0, int, "noise seed"),
}
COMMON_OPTS = {
    "out": (None, str, "output directory|runs/<command>"),
    "plots": (False, bool, "also write SVG figures"),
    "verbose": (False, bool, "log progress to stderr"),
}
COMMANDS = {
    "forward": {
        **PROBLEM_OPTS,
        "T": (1.0, float, "final time"),
        "steps": (100, int, "number of output time intervals on [0, T]"),
        "snapshots": ("0,0.5,1", str, "comma-separated snapshot times for --plots"),
        **COMMON_OPTS,
    },
    "invert": {**PROBLEM_OPTS, **RUN_OPTS, **COMMON_OPTS},
    "spectrum": {
        **PROBLEM_OPTS,
        "modes": (None, int, "report only this many slowest non-null modes|all"),
        **COMMON_OPTS,
    },
    "compare": {
        "image": ("mnist:0", str, "truth image (.pgm or .csv, or mnist:<k>)"),
        "J": (32, int, "nodes per axis"),
        "configs": ("orbits4,static16,static64", str, "comma-separated sensor layouts (at least two)"),
        "levels": ("1e-4,1e-5,1e-6", str, "comma-separated descending loss levels"),
        "M": (256, int, "measurement times per sensor"),
        "noise_sd": (0.0, float, "standard deviation of additive Gaussian measurement noise"),
        "epochs": (500, int, "gradient-descent epochs"),
        "gamma": (DEFAULT_GAMMA[2], float, "step size"),
        "init_log_a": (math.log(1e-2), float, "initial constant log-conductivity"),
        "seed": (0, int, "noise seed"),
        "jobs": (None, int, "worker threads|number of logical processors"),
        **COMMON_OPTS,
    },
    "prep-image": {
        "image": (None, str, "input grayscale image (.pgm or .csv), required|none"),
        "size": (32, int, "output side length"),
        **COMMON_OPTS,
    },
}
HELP = {
    "forward": "simulate the heat equation and write the trajectory",
    "invert": "reconstruct the conductivity from simulated sensor data",
    "spectrum": "eigenvalue sensitivity report of the heat operator",
    "compare": "loss/error frontier for several sensor layouts",
    "prep-image": "resize a grayscale image and write it as PGM",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatrecon", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", default=None, help="JSON file with option values (default: None)")
        for key, (default, typ, text) in opts.items():
            flag = "--" + key.replace("_", "-")
            text, _, shown = text.partition("|")
            shown = shown or default
            if typ is bool:
                p.add_argument(flag, action="store_true", default=None, help=f"{text} (default: {shown})")
            else:
                p.add_argument(flag, type=typ, default=None, help=f"{text} (default: {shown})")
    return parser


def resolve_options(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    opts = COMMANDS[command]
    merged = {k: v[0] for k, v in opts.items()}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        unknown = sorted(set(data) - set(opts))
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
        for k, v in data.items():
            typ = opts[k][1]
            merged[k] = v if v is None else (bool(v) if typ is bool else typ(v))
    for k in opts:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    if merged["out"] is None:
        merged["out"] = str(Path("runs") / command)
    return merged


def spec_from_options(o: dict) -> ExperimentSpec:
    return ExperimentSpec(
        dim=o["dim"], J=o["J"], truth=o["truth"], image=o["image"], a_const=o["a_const"],
        u0=o["u0"], source=o["source"], sensors=o["sensors"], M=o["M"], noise_sd=o["noise_sd"],
        gamma=o["gamma"], epsilon=o["epsilon"], max_epoch=o["epochs"], N=o["N"],
        initial_log_conductivity=o["init_log_a"], seed=o["seed"],
    )


def _problem_spec(o: dict) -> ExperimentSpec:
    """Spec for commands that only need grid, truth and initial data."""
    keys = ("dim", "J", "truth", "image", "a_const", "u0", "source")
    spec = ExperimentSpec(**{k: o[k] for k in keys})
    if spec.image is not None and not resolve_image(spec.image).exists():
        raise FileNotFoundError(f"image file not found: {spec.image}")
    return spec


def cmd_forward(o: dict) -> int:
    spec = _problem_spec(o)
    grid = build_grid(spec)
    truth = build_truth(spec, grid)
    u0 = build_initial_state(spec.u0, grid)
    snaps = _floats(o["snapshots"])
    if o["steps"] < 1 or o["T"] <= 0:
        raise ConfigError("steps must be >= 1 and T positive")
    t_grid = np.union1d(np.linspace(0.0, o["T"], o["steps"] + 1), [s for s in snaps if 0 <= s <= o["T"]])
    traj = integrate(assemble(truth, grid), u0, HeatSource(spec.source), t_grid)
    if not np.all(np.isfinite(traj.states)):
        raise NumericalError("forward solution is not finite")
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out / "trajectory.csv")
    if o["plots"]:
        from .plots import plot_snapshots

        plot_snapshots(traj, grid, snaps, out / "snapshots.svg")
    print(f"wrote {out / 'trajectory.csv'} ({len(traj.times)} times, {grid.size} nodes)")
    return EXIT_OK


def cmd_invert(o: dict) -> int:
    spec = spec_from_options(o)
    if spec.image is not None and not resolve_image(spec.image).exists():
        raise FileNotFoundError(f"image file not found: {spec.image}")
    result = run_experiment(spec, out_dir=o["out"], plots=o["plots"])
    print(f"loss={result.final_loss:.6e} rel_err={result.final_relative_error:.6e}")
    return EXIT_OK


def cmd_spectrum(o: dict) -> int:
    spec = _problem_spec(o)
    grid = build_grid(spec)
    es = eigensystem(assemble(build_truth(spec, grid), grid))
    if o["modes"] is not None and not 0 <= o["modes"] < es.size:
        raise ConfigError(f"--modes must lie in 0..{es.size - 1}")
    rows = sensitivity_report(es, o["modes"])
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_report(rows, out / "sensitivity.csv")
    print(f"wrote {out / 'sensitivity.csv'} ({len(rows)} rows)")
    return EXIT_OK


def cmd_compare(o: dict) -> int:
    configs = _words(o["configs"])
    if len(configs) < 2:
        raise ConfigError("compare needs at least two sensor configurations")
    if not resolve_image(o["image"]).exists():
        raise FileNotFoundError(f"image file not found: {o['image']}")
    base = ExperimentSpec(
        dim=2, J=o["J"], image=o["image"], M=o["M"], noise_sd=o["noise_sd"], gamma=o["gamma"],
        max_epoch=o["epochs"], initial_log_conductivity=o["init_log_a"], seed=o["seed"],
    )
    frontier = compare_configs(o["image"], configs, _floats(o["levels"]), base=base, jobs=o["jobs"])
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    frontier.to_csv(out / "frontier.csv")
    if o["plots"]:
        from .plots import plot_frontier

        plot_frontier(frontier, out / "frontier.svg")
    print(f"wrote {out / 'frontier.csv'} ({len(frontier.rows)} rows)")
    return EXIT_OK


def cmd_prep_image(o: dict) -> int:
    if o["image"] is None:
        raise ConfigError("--image is required")
    src = Path(o["image"])
    pixels = read_image(src)
    resized = resize_bilinear(pixels, o["size"])
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    dest = out / f"{src.stem}_{o['size']}.pgm"
    write_pgm(dest, resized)
    print(f"wrote {dest}")
    return EXIT_OK


HANDLERS = {
    "forward": cmd_forward,
    "invert": cmd_invert,
    "spectrum": cmd_spectrum,
    "compare": cmd_compare,
    "prep-image": cmd_prep_image,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else EXIT_CONFIG
    try:
        opts = resolve_options(args.command, args)
        logging.basicConfig(level=logging.INFO if opts["verbose"] else logging.WARNING, format="%(message)s")
        return HANDLERS[args.command](opts)
    except NonRecoverableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
