"""Time-to-target benchmarking of samplers.

A reference sampler's energy distribution fixes a percentile target; any
other sampler is then scored by the expected number of samples needed to
reach that target (1 / hit probability) times its per-sample wall time.
Per-sample times are measured locally unless explicit accounting constants
are supplied.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .fem import LinearSystem
from .ising import StandardIsing, build_frame, lsq_to_ising, spd_to_ising, to_standard
from .samplers import Sampler, SimulatedAnnealingSampler
from .search import SearchTrace

DEFAULT_SWEEP_GRID = (10, 20, 40, 100, 200, 400, 1000, 2000, 4000, 10000)


@dataclass
class EnergyDistribution:
    """Observed sample energies of one sampler configuration."""

    energies: np.ndarray
    kind: str = "unknown"
    sweeps: int | None = None
    time_per_sample_us: float | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        self.energies = np.asarray(self.energies, dtype=float)
        if self.energies.ndim != 1 or self.energies.size == 0:
            raise ValueError("a distribution needs at least one energy")

    @property
    def sample_count(self) -> int:
        return int(self.energies.size)


def target_energy(reference: EnergyDistribution, percentile: float = 10.0) -> float:
    """Nearest-rank percentile: the ceil(q/100 * n)-th smallest energy."""
    if not 0.0 < percentile < 100.0:
        raise ValueError("percentile must lie strictly between 0 and 100")
    ordered = np.sort(reference.energies)
    rank = math.ceil(percentile / 100.0 * ordered.size)
    return float(ordered[max(rank, 1) - 1])


def samples_to_target(distribution: EnergyDistribution, target: float) -> float:
    """Expected draws until a sample at or below the target; inf if unreachable."""
    p_hat = float(np.mean(distribution.energies <= target))
    return math.inf if p_hat == 0.0 else 1.0 / p_hat


def collect_distribution(
    sampler: Sampler,
    model: StandardIsing,
    reads: int,
    seed: int = 0,
    kind: str = "unknown",
    sweeps: int | None = None,
) -> tuple[EnergyDistribution, float]:
    """Sample a distribution and report the elapsed wall seconds."""
    started = time.perf_counter()
    samples = sampler.sample_batch(model, reads, seed)
    elapsed = time.perf_counter() - started
    energies = np.array([s.energy for s in samples])
    return EnergyDistribution(energies, kind=kind, sweeps=sweeps, seed=seed), elapsed


@dataclass
class SweepPoint:
    sweeps: int
    p_hat: float
    stt: float
    time_per_sample_us: float
    ttt_us: float


@dataclass
class TTTReport:
    """Target, the reference score, and one row per comparison sweep count."""

    percentile: float
    target: float
    ref_kind: str
    ref_p_hat: float
    ref_stt: float
    ref_time_per_sample_us: float
    ref_ttt_us: float
    points: list[SweepPoint]

    @property
    def best(self) -> SweepPoint:
        return min(self.points, key=lambda p: (p.ttt_us, p.sweeps))

    @property
    def all_unreachable(self) -> bool:
        return all(math.isinf(p.ttt_us) for p in self.points)

    def to_csv_text(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["sweeps", "p_hat", "stt", "time_per_sample_us", "ttt_us"])
        for p in self.points:
            writer.writerow(
                [p.sweeps, f"{p.p_hat:.17g}", f"{p.stt:.17g}", f"{p.time_per_sample_us:.17g}", f"{p.ttt_us:.17g}"]
            )
        return out.getvalue()

    def save_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text())

    def to_json_dict(self) -> dict:
        return {
            "percentile": self.percentile,
            "target": self.target,
            "reference": {
                "kind": self.ref_kind,
                "p_hat": self.ref_p_hat,
                "stt": self.ref_stt,
                "time_per_sample_us": self.ref_time_per_sample_us,
                "ttt_us": self.ref_ttt_us,
            },
            "points": [
                {
                    "sweeps": p.sweeps,
                    "p_hat": p.p_hat,
                    "stt": p.stt,
                    "time_per_sample_us": p.time_per_sample_us,
                    "ttt_us": p.ttt_us,
                }
                for p in self.points
            ],
            "best_sweeps": self.best.sweeps,
            "best_ttt_us": self.best.ttt_us,
        }


def ttt_compare(
    model: StandardIsing,
    ref_sampler: Sampler,
    sweep_grid: Sequence[int] = DEFAULT_SWEEP_GRID,
    reads: int = 1000,
    percentile: float = 10.0,
    seed: int = 0,
    ref_time_us: float | None = None,
    sweep_time_us: float | None = None,
    cmp_factory: Callable[[int], Sampler] | None = None,
) -> TTTReport:
    """Score a sweep grid of comparison samplers against a reference.

    ``ref_time_us`` fixes the reference per-sample accounting constant (for
    recorded hardware distributions); ``sweep_time_us`` fixes the per-sweep
    time of the comparison sampler.  Left unset, both are measured wall
    times.  The report's ``best`` row is the grid minimum.
    """
    if not sweep_grid:
        raise ValueError("sweep grid must not be empty")
    if reads < 1:
        raise ValueError("reads must be at least 1")
    if cmp_factory is None:
        cmp_factory = lambda sweeps: SimulatedAnnealingSampler(sweeps=sweeps)

    seed_seq = np.random.SeedSequence(seed)
    derived = seed_seq.generate_state(1 + len(sweep_grid), np.uint64)
    ref_dist, ref_elapsed = collect_distribution(
        ref_sampler, model, reads, int(derived[0]), kind="reference"
    )
    target = target_energy(ref_dist, percentile)
    ref_p = float(np.mean(ref_dist.energies <= target))
    ref_stt = samples_to_target(ref_dist, target)
    t_ref = ref_time_us if ref_time_us is not None else 1e6 * ref_elapsed / reads

    points = []
    for k, sweeps in enumerate(sweep_grid):
        dist, elapsed = collect_distribution(
            cmp_factory(int(sweeps)), model, reads, int(derived[1 + k]), kind="comparison", sweeps=int(sweeps)
        )
        t_s = sweep_time_us if sweep_time_us is not None else 1e6 * elapsed / (reads * sweeps)
        per_sample = sweeps * t_s
        p_hat = float(np.mean(dist.energies <= target))
        stt = samples_to_target(dist, target)
        points.append(SweepPoint(int(sweeps), p_hat, stt, per_sample, stt * per_sample))

    return TTTReport(percentile, target, ref_dist.kind, ref_p, ref_stt, t_ref, ref_stt * t_ref, points)


@dataclass
class AggregateTTTReport:
    """Per-model reports across a search run, plus their mean and spread."""

    items: list[dict]
    mean_ref_ttt_us: float
    mean_cmp_ttt_us: float
    std_cmp_ttt_us: float

    def to_json_dict(self) -> dict:
        return {
            "items": self.items,
            "mean_ref_ttt_us": self.mean_ref_ttt_us,
            "mean_cmp_ttt_us": self.mean_cmp_ttt_us,
            "std_cmp_ttt_us": self.std_cmp_ttt_us,
        }

    def to_csv_text(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["iteration", "step", "target", "ref_ttt_us", "best_sweeps", "best_ttt_us"])
        for item in self.items:
            writer.writerow(
                [
                    item["iteration"],
                    item["step"],
                    f"{item['target']:.17g}",
                    f"{item['ref_ttt_us']:.17g}",
                    item["best_sweeps"],
                    f"{item['best_ttt_us']:.17g}",
                ]
            )
        return out.getvalue()

    def save_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text())

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))


def _step_models(
    system: LinearSystem, trace: SearchTrace, index: int, objective: str
) -> list[tuple[int, StandardIsing]]:
    """The spin models a two-step iteration posed: (step, model) pairs."""
    u = trace.iterates[index]
    alpha = trace.records[index].alpha
    mapper = spd_to_ising if objective == "energy" else lsq_to_ising
    models = [(1, to_standard(mapper(system, build_frame(system, u, alpha))))]
    probe = trace.probe_points[index]
    if probe is not None:
        shift = 0.5 * (probe - u)
        frame2 = build_frame(system, u, alpha / 2.0, shift)
        models.append((2, to_standard(mapper(system, frame2))))
    return models


def aggregate_search_ttt(
    system: LinearSystem,
    trace: SearchTrace,
    ref_sampler: Sampler,
    iteration_count: int = 20,
    steps_per_iteration: int = 2,
    sweep_grid: Sequence[int] = DEFAULT_SWEEP_GRID,
    reads: int = 1000,
    percentile: float = 10.0,
    seed: int = 0,
    ref_time_us: float | None = None,
    sweep_time_us: float | None = None,
    cmp_factory: Callable[[int], Sampler] | None = None,
) -> AggregateTTTReport:
    """Score the spin models encountered across a completed search run.

    Draws iteration_count iterations uniformly at random (all of them when
    the run is shorter), rebuilds up to steps_per_iteration spin models per
    iteration, and aggregates their reports.
    """
    if not trace.iterates:
        raise ValueError("the trace carries no iterates to replay")
    if steps_per_iteration not in (1, 2):
        raise ValueError("steps_per_iteration must be 1 or 2")
    rng = np.random.default_rng(seed)
    available = len(trace.iterates)
    if iteration_count >= available:
        chosen = np.arange(available)
    else:
        chosen = np.sort(rng.choice(available, size=iteration_count, replace=False))

    items = []
    ref_ttts = []
    cmp_ttts = []
    for rank, index in enumerate(chosen):
        for step, model in _step_models(system, trace, int(index), trace.objective_kind)[
            :steps_per_iteration
        ]:
            report = ttt_compare(
                model,
                ref_sampler,
                sweep_grid=sweep_grid,
                reads=reads,
                percentile=percentile,
                seed=int(np.random.SeedSequence([seed, rank, step]).generate_state(1, np.uint64)[0]),
                ref_time_us=ref_time_us,
                sweep_time_us=sweep_time_us,
                cmp_factory=cmp_factory,
            )
            best = report.best
            items.append(
                {
                    "iteration": int(index),
                    "step": step,
                    "target": report.target,
                    "ref_ttt_us": report.ref_ttt_us,
                    "best_sweeps": best.sweeps,
                    "best_ttt_us": best.ttt_us,
                }
            )
            ref_ttts.append(report.ref_ttt_us)
            cmp_ttts.append(best.ttt_us)

    cmp_arr = np.asarray(cmp_ttts)
    finite = cmp_arr[np.isfinite(cmp_arr)]
    ref_arr = np.asarray(ref_ttts)
    ref_finite = ref_arr[np.isfinite(ref_arr)]
    return AggregateTTTReport(
        items,
        float(ref_finite.mean()) if ref_finite.size else math.inf,
        float(finite.mean()) if finite.size else math.inf,
        float(finite.std()) if finite.size else math.inf,
    )
