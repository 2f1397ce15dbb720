"""Command line entry point: ``ubitlab run <cfg>`` and ``ubitlab sweep <cfg>``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config, parse_number
from .errors import ConfigError, UbitlabError
from .experiments import run_experiment
from .model import ModelParams
from .output import Table, make_manifest, write_csv, write_result

log = logging.getLogger("ubitlab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

SWEEPABLE = ("lambda", "N", "s", "omega", "Omega", "seed", "t_freeze", "t_max")
ALIASES = {"λ": "lambda", "Ω": "Omega", "ω": "omega"}
SWEEP_COLUMNS = ("xi_fitted", "b_min", "t_star", "residual_X_max", "residual_Z_max", "residual_rms")


def output_dir(cfg: ExperimentConfig, cli_out: str | None) -> Path:
    if cli_out:
        return Path(cli_out)
    if cfg.out_dir:
        return Path(cfg.out_dir)
    return Path(os.environ.get("UBITLAB_OUT", "ubitlab-out"))


def apply_param(cfg: ExperimentConfig, name: str, value: float) -> ExperimentConfig:
    """Copy of ``cfg`` with one parameter changed; a ``lambda`` value sets ``s = lambda omega``."""
    p = cfg.params
    try:
        if name == "lambda":
            p = replace(p, s=value * p.omega)
        elif name == "N":
            if value != int(value):
                raise ConfigError(f"N must be an integer, got {value}")
            p = replace(p, N=int(value))
        elif name == "seed":
            p = replace(p, seed=int(value))
        elif name in ("s", "omega"):
            p = replace(p, **{name: value})
        elif name in ("Omega", "t_freeze", "t_max"):
            if name == "Omega" and value <= 0:
                raise ConfigError("Omega must be positive")
            return replace(cfg, **{name: value})
        else:
            raise ConfigError(f"cannot sweep {name!r}; choose from {', '.join(SWEEPABLE)}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return replace(cfg, params=p)


def value_seed(base: int, param: str, value: float) -> int:
    """Deterministic per-value seed derived from the base seed and the value itself."""
    key = zlib.crc32(f"{param}={value!r}".encode())
    return int(np.random.SeedSequence([base, key]).generate_state(1, np.uint64)[0])


def _run_one(cfg: ExperimentConfig, out: Path, extra: dict | None = None) -> dict:
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    wall = time.perf_counter() - t0
    manifest = make_manifest(cfg.source_hash, cfg.params.seed, result.experiment, wall,
                             N=cfg.params.N, s=cfg.params.s, omega=cfg.params.omega,
                             **(extra or {}))
    write_result(out, result, manifest, cfg.prefix)
    return result.summary


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.seed)
    if cfg.experiment == "sweep":
        return _sweep(cfg, cfg.sweep_param, cfg.sweep_values, args)
    out = output_dir(cfg, args.out)
    summary = _run_one(cfg, out)
    log.info("wrote %s (%s)", out, ", ".join(f"{k}={summary.get(k)}" for k in ("xi_fitted", "b_min", "t_star")))
    return EXIT_OK


def _sweep_worker(job):
    cfg, out, extra = job
    try:
        return "ok", _run_one(cfg, out, extra), ""
    except Exception as exc:  # reported per value; the sweep continues
        return "failed", {}, f"{type(exc).__name__}: {exc}"


def _sweep(cfg: ExperimentConfig, param: str, values, args) -> int:
    param = ALIASES.get(param, param)
    if param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {param!r}; choose from {', '.join(SWEEPABLE)}")
    if cfg.experiment == "sweep":
        cfg = replace(cfg, experiment=cfg.sweep_base)
    out = output_dir(cfg, args.out)
    header = ("param", "value", "seed", "status") + SWEEP_COLUMNS + ("error",)
    if not values:
        log.info("empty value list, nothing to do")
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / f"{cfg.prefix}sweep.csv", Table(header, []))
        return EXIT_OK
    jobs = []
    for v in values:
        c = apply_param(cfg, param, v)
        if param != "seed":
            c = replace(c, params=replace(c.params, seed=value_seed(cfg.params.seed, param, v)))
        jobs.append((c, out / f"{param}={v:g}", {"sweep_param": param, "sweep_value": v}))
    workers = args.threads or min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        results = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    rows = []
    for (c, _, _), v, (status, summary, err) in zip(jobs, values, results):
        get = lambda k: "" if summary.get(k) is None else summary[k]
        rows.append((param, v, c.params.seed, status, *(get(k) for k in SWEEP_COLUMNS), err))
        if status != "ok":
            log.error("%s=%g failed: %s", param, v, err)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"{cfg.prefix}sweep.csv", Table(header, rows))
    return EXIT_FAIL if any(r[3] != "ok" for r in rows) else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.seed)
    values = [parse_number(v, "--values") for v in args.values.split(",") if v.strip()]
    return _sweep(cfg, args.param, values, args)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ubitlab", description="Universal-rebit simulations.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="INI experiment file")
        p.add_argument("--out", help="output directory (default: config, then $UBITLAB_OUT)")
        p.add_argument("--seed", type=int, help="override the model seed")
        p.add_argument("--threads", type=int, default=0, help="worker processes for sweeps")

    run = sub.add_parser("run", help="run one experiment")
    common(run)
    run.set_defaults(func=cmd_run)
    sw = sub.add_parser("sweep", help="run an experiment over a list of parameter values")
    common(sw)
    sw.add_argument("--param", required=True, help=f"one of {', '.join(SWEEPABLE)} (λ is accepted for lambda)")
    sw.add_argument("--values", required=True, help="comma-separated values, may be empty")
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UbitlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
