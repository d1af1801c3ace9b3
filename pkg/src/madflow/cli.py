"""Command line entry point: run / validate / suite.

Exit codes: 0 all requested contracts pass, 1 configuration error,
2 contract violation.  The default output root comes from MADFLOW_OUT
(falling back to ./madflow-runs).
"""
from __future__ import annotations

import argparse
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analyses, archive, dynamics
from .errors import ConfigError, MadflowError
from .scenario import build_scenario, echo, parse_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CONTRACT = 2


def _load(config_path: str, overrides) -> dict:
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), overrides)


def _out_dir(args, name: str) -> Path:
    if args.out:
        return Path(args.out)
    root = os.environ.get("MADFLOW_OUT", "madflow-runs")
    return Path(root) / name


def run_scenario(config_path: str, out_dir: Path, overrides=None,
                 seed: int | None = None, quiet: bool = False) -> int:
    values = _load(config_path, overrides)
    if seed is not None:
        values["seed"] = seed
    scn = build_scenario(values)
    out_dir.mkdir(parents=True, exist_ok=True)

    run = None
    if scn.engine != "none" and scn.psi0 is not None:
        v_int = None
        if scn.get("interaction.kind") == "measurement-coupling":
            from .bipartite import MeasurementCoupling
            v_int = MeasurementCoupling(scn.get("interaction.g"),
                                        scn.get("interaction.t_on"),
                                        scn.get("interaction.t_off")).potential(scn.grid)
        run = dynamics.evolve(scn.psi0, scn.potential, scn.cfg, v_int=v_int)
    traj = analyses.make_trajectories(scn, run) if run is not None else None

    tables: dict[str, list[dict]] = {}
    summary: dict[str, object] = {
        "scenario": scn.name, "version": __version__, "seed": scn.seed,
        "engine": scn.engine,
    }
    if run is not None:
        summary["snapshots"] = len(run.times)
        summary["t_end"] = float(run.times[-1])
        summary["stopped_early"] = run.stopped_early
    all_pass = True
    for name in scn.analyses:
        records, scalars, passed = analyses.DISPATCH[name](scn, run, traj)
        tables[name] = records
        for key, val in scalars.items():
            summary[f"{name}.{key}"] = val
        summary[f"pass.{name}"] = passed
        all_pass = all_pass and passed
        if not quiet:
            print(f"[{'PASS' if passed else 'FAIL'}] {name}: " +
                  " ".join(f"{k}={v}" for k, v in scalars.items()))
    summary["overall_pass"] = all_pass

    files = ["manifest.txt", "summary.txt", "analyses.csv"]
    if run is not None:
        archive.write_snapshots(out_dir / "snapshots.bin", scn.grid, run.times,
                                run.psis)
        archive.write_density_csv(out_dir / "density.csv", scn.grid, run.times,
                                  run.psis)
        files += ["snapshots.bin", "density.csv"]
    if traj is not None:
        archive.write_trajectories(out_dir / "trajectories.bin", traj)
        archive.write_trajectories_csv(out_dir / "trajectories.csv", traj)
        files += ["trajectories.bin", "trajectories.csv"]
    archive.write_analyses_csv(out_dir / "analyses.csv", tables)
    archive.write_summary(out_dir / "summary.txt", summary)
    manifest = [f"# madflow run archive", f"version = {__version__}",
                f"files = {','.join(sorted(files))}", ""]
    (out_dir / "manifest.txt").write_text("\n".join(manifest) + echo(values) + "\n")
    if not quiet:
        print(f"archive written to {out_dir}")
    return EXIT_OK if all_pass else EXIT_CONTRACT


def validate_scenario(config_path: str, overrides=None) -> int:
    values = _load(config_path, overrides)
    build_scenario(values)
    print(echo(values))
    return EXIT_OK


def _suite_entry(item):
    config_path, out_dir, seed = item
    try:
        code = run_scenario(config_path, Path(out_dir), seed=seed, quiet=True)
        return config_path, code, ""
    except MadflowError as err:
        return config_path, EXIT_CONFIG, str(err)
    except Exception:
        return config_path, EXIT_CONFIG, traceback.format_exc(limit=3)


def run_suite(manifest_path: str, out_root: Path, threads: int,
              seed: int | None) -> int:
    path = Path(manifest_path)
    if not path.exists():
        print(f"error: manifest not found: {path}", file=sys.stderr)
        return EXIT_CONFIG
    entries = [ln.strip() for ln in path.read_text().splitlines()
               if ln.strip() and not ln.strip().startswith("#")]
    if not entries:
        print("error: no scenarios in manifest", file=sys.stderr)
        return EXIT_CONFIG
    jobs = []
    for entry in entries:
        cfg = (path.parent / entry).resolve()
        jobs.append((str(cfg), str(out_root / cfg.stem), seed))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_suite_entry, jobs))
    else:
        results = [_suite_entry(j) for j in jobs]
    width = max(len(Path(r[0]).name) for r in results)
    worst = EXIT_OK
    for cfg, code, msg in results:
        verdict = {EXIT_OK: "PASS", EXIT_CONTRACT: "FAIL"}.get(code, "ERROR")
        print(f"{Path(cfg).name:<{width}}  {verdict}" + (f"  {msg}" if msg else ""))
        worst = max(worst, code if code != EXIT_CONFIG else EXIT_CONTRACT)
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="madflow",
                                     description="wave-field flow laboratory")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write its archive")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=1)

    p_val = sub.add_parser("validate", help="check a scenario file, print the "
                                            "resolved config")
    p_val.add_argument("config")
    p_val.add_argument("--override", action="append", default=[])

    p_suite = sub.add_parser("suite", help="run every scenario in a manifest")
    p_suite.add_argument("manifest")
    p_suite.add_argument("--out", default=None)
    p_suite.add_argument("--threads", type=int, default=1)
    p_suite.add_argument("--seed", type=int, default=None)

    args = parser.parse_args(argv)
    try:
        if args.verb == "run":
            out = _out_dir(args, Path(args.config).stem)
            return run_scenario(args.config, out, args.override, args.seed)
        if args.verb == "validate":
            return validate_scenario(args.config, args.override)
        if args.verb == "suite":
            out_root = Path(args.out) if args.out else Path(
                os.environ.get("MADFLOW_OUT", "madflow-runs"))
            return run_suite(args.manifest, out_root, args.threads, args.seed)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except MadflowError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONTRACT
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
