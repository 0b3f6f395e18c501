"""Direct-search driver polling spin neighborhoods with a sampler.

Each iteration builds the spin model for the current iterate, draws a batch
of samples, decodes them, and accepts the best candidate only on strict
improvement of the objective.  The step scale grows while early polls keep
succeeding (expansion) and halves on every failed poll afterwards
(contraction), until the residual tolerance, a scale underflow, or the
iteration cap is reached.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fem import LinearSystem, residual_norm
from .ising import (
    build_frame,
    decode,
    lsq_to_ising,
    nested_compose,
    nested_decode,
    nested_frame,
    spd_to_ising,
    to_standard,
)
from .samplers import Sample, Sampler

POLL_METHODS = ("poll2", "poll3", "poll4", "hyperoctant")
PHASE_EXPANSION = "expansion"
PHASE_CONTRACTION = "contraction"


def objective_value(system: LinearSystem, u: np.ndarray, kind: str = "energy") -> float:
    """Classical evaluation of the polled objective.

    "energy" is 1/2 u'Au - u'b (SPD systems); "lsq" is the squared residual
    |Au - b|^2, whose minimizers coincide with those of the residual norm.
    """
    u = np.asarray(u, dtype=float)
    if kind == "energy":
        return float(0.5 * u @ (system.matrix @ u) - u @ system.rhs)
    if kind == "lsq":
        r = system.matrix @ u - system.rhs
        return float(r @ r)
    raise ValueError(f"unknown objective {kind!r}")


def default_alpha0(system: LinearSystem) -> float:
    """Scale heuristic max|b| / max|A|; the expansion phase corrects it upward."""
    a_peak = float(np.abs(system.matrix.data).max()) if system.matrix.nnz else 0.0
    b_peak = float(np.abs(system.rhs).max())
    if a_peak == 0.0 or b_peak == 0.0:
        return 1.0
    return b_peak / a_peak


@dataclass
class SearchConfig:
    method: str = "hyperoctant"
    objective: str = "energy"
    alpha0: float | None = None
    tolerance: float = 1e-5
    tolerance_mode: str = "normalized"  # or "absolute"
    reads_per_poll: int = 10
    expansion: bool = True
    growth: float = 2.0
    shrink: float = 0.5
    max_iterations: int = 5000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in POLL_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.objective not in ("energy", "lsq"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.tolerance_mode not in ("normalized", "absolute"):
            raise ValueError(f"unknown tolerance mode {self.tolerance_mode!r}")
        if not 0.0 < self.shrink < 1.0 < self.growth:
            raise ValueError("need 0 < shrink < 1 < growth")
        if self.alpha0 is not None and not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.reads_per_poll < 1:
            raise ValueError("reads_per_poll must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class PollOutcome:
    """Result of one poll: the strict improver (or None) and what was seen.

    ``candidates`` lists every decoded point in evaluation order; for the
    two-step method the first reads_per_poll entries belong to step one and
    ``probe_point`` is the step-one winner.
    """

    best: np.ndarray | None
    best_objective: float
    samples: list[Sample]
    candidates: list[np.ndarray]
    probe_point: np.ndarray | None = None


def _derived_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1, np.uint64)[0])


def _spin_model(system: LinearSystem, frame, objective: str):
    if objective == "energy":
        return spd_to_ising(system, frame)
    return lsq_to_ising(system, frame)


def poll_step(
    system: LinearSystem,
    u: np.ndarray,
    alpha: float,
    method: str,
    sampler: Sampler,
    reads: int,
    objective: str = "energy",
    seed: int = 0,
) -> PollOutcome:
    """Sample one neighborhood and return the best strict improver, if any."""
    frame = build_frame(system, u, alpha)
    if method == "poll2":
        model = _spin_model(system, frame, objective)
        decoder = lambda spins: decode(frame, spins)
    elif method in ("poll3", "poll4"):
        nests = nested_frame(frame, "d3" if method == "poll3" else "d4")
        model = nested_compose(system, nests, objective)
        decoder = lambda spins: nested_decode(nests, spins)
    else:
        raise ValueError(f"poll_step does not drive method {method!r}")
    samples = sampler.sample_batch(to_standard(model), reads, seed)
    base = objective_value(system, u, objective)
    best, best_val = None, base
    candidates = []
    for sample in samples:
        cand = decoder(sample.spins)
        candidates.append(cand)
        val = objective_value(system, cand, objective)
        if val < best_val:
            best, best_val = cand, val
    return PollOutcome(best, best_val, samples, candidates)


def hyperoctant_step(
    system: LinearSystem,
    u: np.ndarray,
    alpha: float,
    sampler: Sampler,
    reads: int,
    objective: str = "energy",
    seed: int = 0,
) -> PollOutcome:
    """Two-step poll: pick the best corner, then probe at half scale around
    the midpoint between the iterate and that corner.

    Every second-step candidate stays inside the hyperoctant the first step
    selected: its offset from the iterate is (corner_offset + half_step) per
    component, which is either zero or carries the corner's sign.
    """
    frame1 = build_frame(system, u, alpha)
    model1 = _spin_model(system, frame1, objective)
    samples1 = sampler.sample_batch(to_standard(model1), reads, _derived_seed(seed, 0))
    cands1 = [decode(frame1, s.spins) for s in samples1]
    vals1 = [objective_value(system, c, objective) for c in cands1]
    ia = int(np.argmin(vals1))
    corner, corner_val = cands1[ia], vals1[ia]

    shift = 0.5 * (corner - u)
    frame2 = build_frame(system, u, alpha / 2.0, shift)
    model2 = _spin_model(system, frame2, objective)
    samples2 = sampler.sample_batch(to_standard(model2), reads, _derived_seed(seed, 1))
    cands2 = [decode(frame2, s.spins) for s in samples2]
    vals2 = [objective_value(system, c, objective) for c in cands2]
    ib = int(np.argmin(vals2))

    best_cand, best_val = corner, corner_val
    if vals2[ib] < corner_val:
        best_cand, best_val = cands2[ib], vals2[ib]

    base = objective_value(system, u, objective)
    improved = best_val < base
    return PollOutcome(
        best_cand if improved else None,
        best_val if improved else base,
        samples1 + samples2,
        cands1 + cands2,
        probe_point=corner,
    )


@dataclass
class IterationRecord:
    index: int
    alpha: float
    objective: float
    residual: float
    success: bool
    phase: str


TRACE_COLUMNS = ("iter", "alpha", "functional", "residual", "success", "phase")


@dataclass
class SearchTrace:
    """Per-iteration history plus the final iterate and termination reason.

    ``iterates`` holds the iterate at the start of each recorded iteration
    and ``probe_points`` the step-one winner of two-step polls, which is
    enough to rebuild every spin model the run posed.
    """

    records: list[IterationRecord]
    solution: np.ndarray
    reason: str
    residual: float
    residual_scale: float
    objective_kind: str
    method: str
    iterates: list[np.ndarray] = field(default_factory=list)
    probe_points: list[np.ndarray | None] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.reason == "converged"

    def normalized_residual(self) -> float:
        return self.residual / self.residual_scale if self.residual_scale > 0 else self.residual

    def to_csv_text(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.records:
            writer.writerow(
                [
                    r.index,
                    f"{r.alpha:.17g}",
                    f"{r.objective:.17g}",
                    f"{r.residual:.17g}",
                    int(r.success),
                    r.phase,
                ]
            )
        return out.getvalue()

    def save_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text())

    def to_json_dict(self, include_iterates: bool = False) -> dict:
        doc = {
            "method": self.method,
            "objective": self.objective_kind,
            "reason": self.reason,
            "residual": self.residual,
            "residual_scale": self.residual_scale,
            "records": [
                {
                    "iter": r.index,
                    "alpha": r.alpha,
                    "functional": r.objective,
                    "residual": r.residual,
                    "success": r.success,
                    "phase": r.phase,
                }
                for r in self.records
            ],
            "solution": [float(x) for x in self.solution],
        }
        if include_iterates:
            doc["iterates"] = [[float(x) for x in u] for u in self.iterates]
            doc["probe_points"] = [
                None if p is None else [float(x) for x in p] for p in self.probe_points
            ]
        return doc

    def save_json(self, path: str | Path, include_iterates: bool = False) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(include_iterates)))


def run(
    system: LinearSystem,
    config: SearchConfig,
    sampler: Sampler,
    initial: np.ndarray | None = None,
) -> SearchTrace:
    """Iterate polls until the residual tolerance is met.

    The starting point is zeros with the prescribed boundary values unless
    given.  A normalized tolerance compares against the residual of the
    starting point; the trace keeps one record per poll.
    """
    u = system.initial_guess() if initial is None else np.asarray(initial, dtype=float).copy()
    alpha0 = config.alpha0 if config.alpha0 is not None else default_alpha0(system)
    alpha = alpha0
    scale = residual_norm(system, u) if config.tolerance_mode == "normalized" else 1.0
    target = config.tolerance * scale if config.tolerance_mode == "normalized" else config.tolerance

    records: list[IterationRecord] = []
    iterates: list[np.ndarray] = []
    probes: list[np.ndarray | None] = []
    phase = PHASE_EXPANSION if config.expansion else PHASE_CONTRACTION
    reason = "max_iterations"

    for i in range(config.max_iterations):
        res = residual_norm(system, u)
        if res <= target:
            reason = "converged"
            break
        if alpha < 1e-14 * alpha0:
            reason = "alpha_underflow"
            break
        seed_i = _derived_seed(config.seed, i)
        if config.method == "hyperoctant":
            outcome = hyperoctant_step(
                system, u, alpha, sampler, config.reads_per_poll, config.objective, seed_i
            )
        else:
            outcome = poll_step(
                system,
                u,
                alpha,
                config.method,
                sampler,
                config.reads_per_poll,
                config.objective,
                seed_i,
            )
        success = outcome.best is not None
        records.append(
            IterationRecord(
                i, alpha, objective_value(system, u, config.objective), res, success, phase
            )
        )
        iterates.append(u.copy())
        probes.append(outcome.probe_point)
        if success:
            u = outcome.best
            if phase == PHASE_EXPANSION:
                alpha *= config.growth
        else:
            if phase == PHASE_EXPANSION:
                phase = PHASE_CONTRACTION
            alpha *= config.shrink
    if reason == "max_iterations" and residual_norm(system, u) <= target:
        reason = "converged"

    return SearchTrace(
        records,
        u,
        reason,
        residual_norm(system, u),
        scale if config.tolerance_mode == "normalized" else 0.0,
        config.objective,
        config.method,
        iterates,
        probes,
    )
