"""Command line entry point: ``pbrl simulate | tune | autocorr | surrogate``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import tuner
from .config import ConfigError, RunConfig, SourceSpec, parse_kv
from .harness import prepare_series, run_experiment, write_artifacts
from .qlearning import QParams
from .sequences import (
    DegenerateSeriesError,
    SampleSeries,
    autocorrelation,
    gen_normal,
    gen_uniform,
    load_chaos_path,
    shuffle_surrogate,
)

log = logging.getLogger("pbrl")

OUT_DIR_ENV = "PBRL_OUTPUT_DIR"
EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
TUNE_ROUNDS = {"pbrl-nm": 480, "pbrl-gs": 270, "q-nm": 480}

# flag dest -> config key
_FLAG_KEYS = {
    "agent": "agent",
    "source": "source",
    "stride": "stride",
    "rounds": "rounds",
    "episodes": "episodes",
    "max_steps": "max_steps",
    "seed": "seed",
    "chaos_length": "chaos_length",
    "delta_th": "delta_th",
    "a0": "a0",
    "pbrl_gamma": "pbrl_gamma",
    "r_penalty": "r_penalty",
    "q_gamma": "q_gamma",
    "alpha": "alpha",
    "epsilon0": "epsilon0",
}


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file (e.g. a manifest.cfg)")
    p.add_argument("--agent", choices=("pbrl", "qlearning"))
    p.add_argument(
        "--source",
        help="uniform | normal[:sigma] | synthetic-chaos[:lag] | chaos-file:PATH | surrogate:SOURCE",
    )
    p.add_argument("--stride", type=int, help="sampling interval in samples")
    p.add_argument("--rounds", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--seed", type=int, help="base seed; round r uses seed + r")
    p.add_argument("--chaos-length", dest="chaos_length", type=int)
    for name in ("delta_th", "a0", "pbrl_gamma", "r_penalty", "q_gamma", "alpha", "epsilon0"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key, e.g. env.force_mag=5")
    p.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./pbrl-out)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for rounds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbrl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an experiment and write CSV artifacts")
    _add_run_options(sim)

    tune = sub.add_parser("tune", help="tune agent parameters by FOM")
    tune.add_argument("target", choices=("pbrl-nm", "pbrl-gs", "q-nm"))
    tune.add_argument("--iterations", type=int, help="default 20 for Nelder-Mead, 25 for golden-section")
    tune.add_argument("--base", type=float, nargs=3, metavar=("DELTA_TH", "A0", "GAMMA"),
                      default=list(tuner.PBRL_BASE), help="pbrl-gs base parameters")
    _add_run_options(tune)

    ac = sub.add_parser("autocorr", help="write the lag,rho autocorrelation profile of a source")
    ac.add_argument("--source", required=True)
    ac.add_argument("--max-lag", dest="max_lag", type=int, default=20)
    ac.add_argument("--length", type=int, default=10**6, help="length for generated sources")
    ac.add_argument("--seed", type=int, default=0)
    ac.add_argument("--out", help="CSV path (default <outdir>/autocorr.csv)")

    sur = sub.add_parser("surrogate", help="write a time-shuffled copy of a chaos trace")
    sur.add_argument("input")
    sur.add_argument("output")
    sur.add_argument("--seed", type=int, default=0)
    return parser


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "pbrl-out"))


def resolve_config(args: argparse.Namespace, defaults: Optional[Dict[str, str]] = None) -> RunConfig:
    items: Dict[str, str] = dict(defaults or {})
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}")
        items.update(parse_kv(path.read_text()))
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            items[key] = str(value)
    for assignment in args.set:
        key, sep, value = assignment.partition("=")
        if not sep:
            raise ConfigError(assignment, "expected KEY=VALUE")
        items[key.strip()] = value.strip()
    config = RunConfig.from_items(items)
    for path in config.source.referenced_paths():
        if not Path(path).is_file():
            raise ConfigError("source", f"chaos file not found: {path}")
    return config


def cmd_simulate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    out = Path(args.out) if args.out else default_out_dir()
    curves = run_experiment(config, jobs=args.jobs)
    write_artifacts(curves, config, out)
    print(f"FOM {curves.fom}; artifacts in {out}")
    return EXIT_OK


def _tune_defaults(target: str) -> Dict[str, str]:
    defaults = {"rounds": str(TUNE_ROUNDS[target])}
    if target == "q-nm":
        defaults["agent"] = "qlearning"
    else:
        defaults["agent"] = "pbrl"
    if target == "pbrl-gs":
        defaults["source"] = "surrogate:synthetic-chaos:5"
    return defaults


def cmd_tune(args: argparse.Namespace) -> int:
    config = resolve_config(args, _tune_defaults(args.target))
    out = Path(args.out) if args.out else default_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs
    rows: List[tuner.LogRow] = []

    if args.target == "q-nm":
        names = tuner.Q_PARAM_NAMES

        def evaluate(v: np.ndarray) -> float:
            cfg = config.with_q(QParams(*map(float, v)))
            return run_experiment(cfg, jobs=jobs).fom

        objective = tuner.Objective(evaluate, box=tuner.Q_BOX)
        fom, best = tuner.nelder_mead(objective, tuner.q_initial_simplex(),
                                      args.iterations if args.iterations is not None else 20, log=rows)
        final = config.with_q(QParams(*map(float, best)))
    elif args.target == "pbrl-nm":
        names = tuner.PBRL_PARAM_NAMES

        def evaluate(v: np.ndarray) -> float:
            return run_experiment(config.with_pbrl(tuner.PbrlParams(*map(float, v))), jobs=jobs).fom

        objective = tuner.Objective(evaluate, box=tuner.PBRL_BOX)
        fom, best = tuner.nelder_mead(objective, tuner.pbrl_initial_simplex(),
                                      args.iterations if args.iterations is not None else 20, log=rows)
        final = config.with_pbrl(tuner.PbrlParams(*map(float, best)))
    else:
        names = ("c",)
        base = tuple(args.base)
        box_objective = tuner.Objective(
            lambda v: run_experiment(config.with_pbrl(tuner.PbrlParams(*v)), jobs=jobs).fom,
            box=tuner.PBRL_BOX,
        )

        def objective_c(c: float) -> float:
            return box_objective(tuner.scale_params(c, base).as_list())

        best_c = tuner.golden_section(objective_c, args.iterations if args.iterations is not None else 25,
                                      log=rows)
        fom = min(f for _, f in box_objective.history)
        final = config.with_pbrl(tuner.scale_params(best_c, base))
        print(f"best c {best_c!r} (10^c = {10.0 ** best_c:.4g})")

    tuner.write_log(rows, names, out / "tuning_log.csv")
    (out / "tuned.cfg").write_text(final.resolved().dumps())
    print(f"best FOM {fom:g}; log and tuned.cfg in {out}")
    return EXIT_OK


def _autocorr_series(spec: SourceSpec, length: int, seed: int) -> SampleSeries:
    if spec.kind == "uniform":
        return gen_uniform(length, seed)
    if spec.kind == "normal":
        return gen_normal(length, seed, sigma=spec.sigma)
    cfg = RunConfig(source=spec, seed=seed, chaos_length=length)
    return prepare_series(cfg)


def cmd_autocorr(args: argparse.Namespace) -> int:
    try:
        spec = SourceSpec.parse(args.source)
    except ValueError as exc:
        raise ConfigError("source", str(exc)) from None
    for path in spec.referenced_paths():
        if not Path(path).is_file():
            raise ConfigError("source", f"chaos file not found: {path}")
    series = _autocorr_series(spec, args.length, args.seed)
    profile = autocorrelation(series, args.max_lag)
    out = Path(args.out) if args.out else default_out_dir() / "autocorr.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    profile.to_csv(out)
    print(f"minimum rho {profile.rho.min():.4f} at lag {profile.argmin_lag()}; wrote {out}")
    return EXIT_OK


def cmd_surrogate(args: argparse.Namespace) -> int:
    src = Path(args.input)
    if not src.is_file():
        raise ConfigError("input", f"chaos file not found: {src}")
    shuffled = shuffle_surrogate(load_chaos_path(src), args.seed)
    dst = Path(args.output)
    if dst.suffix.lower() == ".txt":
        dst.write_text("".join(f"{int(v)}\n" for v in shuffled.samples))
    else:
        dst.write_bytes(shuffled.to_bytes())
    print(f"wrote {len(shuffled)} samples to {dst}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "tune": cmd_tune,
    "autocorr": cmd_autocorr,
    "surrogate": cmd_surrogate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"pbrl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateSeriesError as exc:
        print(f"pbrl: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        print(f"pbrl: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
