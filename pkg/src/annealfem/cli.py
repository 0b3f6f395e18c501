"""Command-line front end: solve, cosine, ttt, gen-system.

Runs are configured by a JSON document plus flag overrides and leave a
manifest next to their outputs, also on failure paths.  Exit codes: 0
success, 2 configuration error, 3 sampler error, 4 residual tolerance not
reached.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .fem import LinearSystem, newmark_step
from .ising import StandardIsing
from .problems import poisson_1d_system, poisson_2d_system, wave_1d_setup
from .samplers import ExhaustiveSampler, RemoteSampler, SamplerError, SimulatedAnnealingSampler
from .search import SearchConfig, SearchTrace, run
from .ttt import DEFAULT_SWEEP_GRID, aggregate_search_ttt, ttt_compare
from .spanning import closed_form_cosine_measure, cosine_measure, generate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SAMPLER = 3
EXIT_TOLERANCE = 4

TOKEN_ENV = "ANNEALFEM_TOKEN"

_DEFAULT_CONFIG = {
    "problem": "poisson1d",
    "nodes": 25,
    "case": 1,
    "length": 1.0,
    "wave_speed": 1.0,
    "dt": 0.5,
    "timesteps": 4,
    "system_file": None,
    "method": "hyperoctant",
    "objective": "energy",
    "alpha0": None,
    "tolerance": None,
    "tolerance_mode": None,
    "reads": 10,
    "expansion": True,
    "growth": 2.0,
    "shrink": 0.5,
    "max_iterations": 5000,
    "sampler": "sa",
    "sweeps": 100,
    "t_hot": None,
    "t_cold": None,
    "endpoint": None,
    "anneal_time_us": 20.0,
    "seed": 0,
    "out": "run_output",
}


class ConfigError(ValueError):
    pass


def _load_config(args: argparse.Namespace) -> dict:
    config = dict(_DEFAULT_CONFIG)
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(config)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config.update(loaded)
    for key in config:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    # the wave steps use an absolute tolerance; everything else a normalized one
    if config["tolerance_mode"] is None:
        config["tolerance_mode"] = "absolute" if config["problem"] == "wave1d" else "normalized"
    if config["tolerance"] is None:
        config["tolerance"] = 1e-4 if config["problem"] == "wave1d" else 1e-5
    return config


def _build_sampler(config: dict):
    name = config["sampler"]
    if name == "sa":
        return SimulatedAnnealingSampler(
            sweeps=int(config["sweeps"]), t_hot=config["t_hot"], t_cold=config["t_cold"]
        )
    if name == "exhaustive":
        return ExhaustiveSampler()
    if name == "remote":
        endpoint = config["endpoint"] or os.environ.get("ANNEALFEM_ENDPOINT")
        if not endpoint:
            raise ConfigError("remote sampler requires an endpoint")
        return RemoteSampler(
            endpoint,
            token=os.environ.get(TOKEN_ENV),
            anneal_time_us=float(config["anneal_time_us"]),
        )
    raise ConfigError(f"unknown sampler {name!r}")


def _build_system(config: dict) -> LinearSystem:
    problem = config["problem"]
    if problem == "poisson1d":
        return poisson_1d_system(int(config["nodes"]), float(config["length"]))
    if problem == "poisson2d":
        return poisson_2d_system(int(config["nodes"]), int(config["case"]), float(config["length"]))
    if problem == "system":
        if not config["system_file"]:
            raise ConfigError("problem 'system' requires system_file")
        try:
            return LinearSystem.load_json(config["system_file"])
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot load system file: {exc}") from exc
    raise ConfigError(f"unknown problem {problem!r}")


def _search_config(config: dict) -> SearchConfig:
    try:
        return SearchConfig(
            method=config["method"],
            objective=config["objective"],
            alpha0=config["alpha0"],
            tolerance=float(config["tolerance"]),
            tolerance_mode=config["tolerance_mode"],
            reads_per_poll=int(config["reads"]),
            expansion=bool(config["expansion"]),
            growth=float(config["growth"]),
            shrink=float(config["shrink"]),
            max_iterations=int(config["max_iterations"]),
            seed=int(config["seed"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    manifest["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    manifest["outputs"] = sorted(
        str(p.name) for p in out_dir.iterdir() if p.is_file() and p.name != "manifest.json"
    )
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))


def _cmd_solve(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(config["out"])
    try:
        sampler = _build_sampler(config)
        search_cfg = _search_config(config)
        if config["problem"] == "wave1d":
            wave = wave_1d_setup(
                int(config["nodes"]),
                int(config["case"]),
                float(config["dt"]),
                float(config["length"]),
                float(config["wave_speed"]),
            )
        else:
            system = _build_system(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": __version__,
        "config": config,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "success": False,
    }

    try:
        if config["problem"] == "wave1d":
            code = _solve_wave(config, wave, search_cfg, sampler, out_dir, manifest)
        else:
            code = _solve_static(config, system, search_cfg, sampler, out_dir, manifest)
    except SamplerError as exc:
        manifest["reason"] = f"sampler error: {exc}"
        _write_manifest(out_dir, manifest)
        print(f"sampler error: {exc}", file=sys.stderr)
        return EXIT_SAMPLER
    _write_manifest(out_dir, manifest)
    return code


def _solve_static(
    config: dict,
    system: LinearSystem,
    search_cfg: SearchConfig,
    sampler,
    out_dir: Path,
    manifest: dict,
) -> int:
    trace = run(system, search_cfg, sampler)
    trace.save_csv(out_dir / "trace.csv")
    mesh_note = {"problem": config["problem"], "nodes": config["nodes"]}
    (out_dir / "solution.json").write_text(
        json.dumps({**mesh_note, "u": [float(x) for x in trace.solution]})
    )
    replay = {
        "system": system.to_json_dict(),
        "trace": trace.to_json_dict(include_iterates=True),
    }
    (out_dir / "replay.json").write_text(json.dumps(replay))
    manifest.update(
        {
            "final_residual": trace.residual,
            "normalized_residual": trace.normalized_residual(),
            "iterations": trace.iterations,
            "reason": trace.reason,
            "success": trace.converged,
        }
    )
    if not trace.converged:
        print(f"tolerance not reached: {trace.reason}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def _solve_wave(
    config: dict, wave, search_cfg: SearchConfig, sampler, out_dir: Path, manifest: dict
) -> int:
    mesh, stiffness, boundary, state = wave
    snapshots = [[float(x) for x in state.displacement]]
    all_converged = True
    final_residual = 0.0
    total_iterations = 0
    for step in range(int(config["timesteps"])):
        trace_holder: dict[str, SearchTrace] = {}

        def annealing_solve(system: LinearSystem) -> np.ndarray:
            trace = run(system, search_cfg, sampler)
            trace_holder["trace"] = trace
            return trace.solution

        state = newmark_step(state, stiffness, boundary, annealing_solve)
        trace = trace_holder["trace"]
        trace.save_csv(out_dir / f"trace_step_{step + 1:03d}.csv")
        snapshots.append([float(x) for x in state.displacement])
        all_converged &= trace.converged
        final_residual = trace.residual
        total_iterations += trace.iterations
    (out_dir / "solution.json").write_text(
        json.dumps(
            {
                "problem": "wave1d",
                "case": config["case"],
                "x": [float(x) for x in mesh.nodes],
                "times": [float(k * config["dt"]) for k in range(len(snapshots))],
                "snapshots": snapshots,
            }
        )
    )
    manifest.update(
        {
            "final_residual": final_residual,
            "iterations": total_iterations,
            "reason": "converged" if all_converged else "tolerance not reached",
            "success": all_converged,
        }
    )
    if not all_converged:
        print("tolerance not reached in at least one step", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def _cmd_gen_system(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args)
        if config["problem"] == "wave1d":
            raise ConfigError("gen-system emits static systems only")
        system = _build_system(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or "system.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    system.save_json(out)
    if args.matrix_market:
        system.save_matrix_market(args.matrix_market)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_cosine(args: argparse.Namespace) -> int:
    try:
        spanning = generate(args.kind, args.n)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = cosine_measure(spanning, restarts=args.restarts, seed=args.seed)
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_json_dict()))
    if closed_form_cosine_measure(args.kind, args.n) is not None and not report.matches_closed_form():
        print("estimate disagrees with the closed form", file=sys.stderr)
        return 1
    return EXIT_OK


def _parse_sweep_grid(text: str) -> tuple[int, ...]:
    try:
        grid = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"bad sweep grid {text!r}") from exc
    if not grid or any(k < 1 for k in grid):
        raise ConfigError("sweep grid needs positive sweep counts")
    return grid


def _cmd_ttt(args: argparse.Namespace) -> int:
    try:
        grid = _parse_sweep_grid(args.sweep_grid) if args.sweep_grid else DEFAULT_SWEEP_GRID
        if bool(args.input) == bool(args.replay):
            raise ConfigError("pass exactly one of --input or --replay")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    ref = SimulatedAnnealingSampler(sweeps=args.ref_sweeps)
    out_dir = Path(args.out or "ttt_output")
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.input:
            model = StandardIsing.from_json_dict(json.loads(Path(args.input).read_text()))
            report = ttt_compare(
                model,
                ref,
                sweep_grid=grid,
                reads=args.reads,
                percentile=args.percentile,
                seed=args.seed,
                ref_time_us=args.ref_time_us,
                sweep_time_us=args.sweep_time_us,
            )
            report.save_csv(out_dir / "ttt.csv")
            (out_dir / "ttt.json").write_text(json.dumps(report.to_json_dict()))
            print(
                f"target={report.target:.6g} ref_ttt_us={report.ref_ttt_us:.6g} "
                f"best_sweeps={report.best.sweeps} best_ttt_us={report.best.ttt_us:.6g}"
            )
        else:
            replay = json.loads(Path(args.replay).read_text())
            system = LinearSystem.from_json_dict(replay["system"])
            trace = _trace_from_replay(replay["trace"])
            aggregate = aggregate_search_ttt(
                system,
                trace,
                ref,
                iteration_count=args.iterations,
                sweep_grid=grid,
                reads=args.reads,
                percentile=args.percentile,
                seed=args.seed,
                ref_time_us=args.ref_time_us,
                sweep_time_us=args.sweep_time_us,
            )
            aggregate.save_csv(out_dir / "ttt.csv")
            aggregate.save_json(out_dir / "ttt.json")
            print(
                f"models={len(aggregate.items)} mean_ref_ttt_us={aggregate.mean_ref_ttt_us:.6g} "
                f"mean_cmp_ttt_us={aggregate.mean_cmp_ttt_us:.6g}"
            )
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SamplerError as exc:
        print(f"sampler error: {exc}", file=sys.stderr)
        return EXIT_SAMPLER
    return EXIT_OK


def _trace_from_replay(doc: dict) -> SearchTrace:
    from .search import IterationRecord

    records = [
        IterationRecord(
            r["iter"], r["alpha"], r["functional"], r["residual"], bool(r["success"]), r["phase"]
        )
        for r in doc["records"]
    ]
    return SearchTrace(
        records,
        np.asarray(doc["solution"], dtype=float),
        doc["reason"],
        float(doc["residual"]),
        float(doc["residual_scale"]),
        doc["objective"],
        doc["method"],
        [np.asarray(u, dtype=float) for u in doc.get("iterates", [])],
        [None if p is None else np.asarray(p, dtype=float) for p in doc.get("probe_points", [])],
    )


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--problem", choices=["poisson1d", "wave1d", "poisson2d", "system"])
    parser.add_argument("--nodes", type=int, help="node count (per side for 2D)")
    parser.add_argument("--case", type=int, help="wave case 1-5 or 2D case 1-2")
    parser.add_argument("--length", type=float)
    parser.add_argument("--wave-speed", dest="wave_speed", type=float)
    parser.add_argument("--dt", type=float)
    parser.add_argument("--timesteps", type=int)
    parser.add_argument("--system-file", dest="system_file")
    parser.add_argument("--method", choices=["poll2", "poll3", "poll4", "hyperoctant"])
    parser.add_argument("--objective", choices=["energy", "lsq"])
    parser.add_argument("--alpha0", type=float)
    parser.add_argument("--tolerance", type=float)
    parser.add_argument("--tolerance-mode", dest="tolerance_mode", choices=["normalized", "absolute"])
    parser.add_argument("--reads", type=int, help="samples per poll")
    parser.add_argument("--max-iterations", dest="max_iterations", type=int)
    parser.add_argument("--sampler", choices=["sa", "exhaustive", "remote"])
    parser.add_argument("--sweeps", type=int)
    parser.add_argument("--endpoint")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="annealfem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run an annealing search on a benchmark problem")
    _add_config_flags(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_gen = sub.add_parser("gen-system", help="emit an assembled linear system")
    _add_config_flags(p_gen)
    p_gen.add_argument("--matrix-market", dest="matrix_market", help="also write the matrix in Matrix Market format")
    p_gen.set_defaults(func=_cmd_gen_system)

    p_cos = sub.add_parser("cosine", help="estimate the cosine measure of a direction family")
    p_cos.add_argument("--kind", required=True, choices=["dplus", "d2", "d3", "d4", "d4_radix"])
    p_cos.add_argument("--n", required=True, type=int)
    p_cos.add_argument("--restarts", type=int, default=1000)
    p_cos.add_argument("--seed", type=int, default=0)
    p_cos.add_argument("--out")
    p_cos.set_defaults(func=_cmd_cosine)

    p_ttt = sub.add_parser("ttt", help="time-to-target comparison for a spin model or search run")
    p_ttt.add_argument("--input", help="StandardIsing JSON file")
    p_ttt.add_argument("--replay", help="replay.json of a solve run")
    p_ttt.add_argument("--sweep-grid", dest="sweep_grid", help="comma-separated sweep counts")
    p_ttt.add_argument("--reads", type=int, default=1000)
    p_ttt.add_argument("--percentile", type=float, default=10.0)
    p_ttt.add_argument("--iterations", type=int, default=20)
    p_ttt.add_argument("--ref-sweeps", dest="ref_sweeps", type=int, default=1000)
    p_ttt.add_argument("--ref-time-us", dest="ref_time_us", type=float)
    p_ttt.add_argument("--sweep-time-us", dest="sweep_time_us", type=float)
    p_ttt.add_argument("--seed", type=int, default=0)
    p_ttt.add_argument("--out")
    p_ttt.set_defaults(func=_cmd_ttt)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
