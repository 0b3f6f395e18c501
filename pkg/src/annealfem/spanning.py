"""Positive spanning sets and numerical cosine measures.

The set families correspond to the candidate grids a spin register can
reach: "dplus" are the 2N signed coordinate directions, "d2" the 2^N corner
set of one spin per dof, "d3" the 3^N grid two stacked equal-scale registers
produce (zero vector included), and "d4" the 4^N symmetric ladder
{-1.5, -0.5, +0.5, +1.5}^N of a half-scale second register.  The asymmetric
radix variant {-1, 0, 1, 2}^N is exposed as "d4_radix".

The cosine measure

    cm(D) = min over unit v of  max over nonzero d in D of  v.d / (|v||d|)

is estimated by multi-start local minimax refinement on the unit sphere.
Structured starts always include the signed coordinate axes and, when the
grid contains the 3^N family, the equal-angle witness directions, so the
known optima are never missed; random restarts cover the rest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, nnls

SET_KINDS = ("dplus", "d2", "d3", "d4", "d4_radix")
ENUMERATION_LIMIT = 2**24


@dataclass(frozen=True)
class SpanningSet:
    dimension: int
    vectors: np.ndarray
    kind: str

    @property
    def size(self) -> int:
        return int(self.vectors.shape[0])

    def nonzero_unit_vectors(self) -> np.ndarray:
        norms = np.linalg.norm(self.vectors, axis=1)
        keep = norms > 0
        return self.vectors[keep] / norms[keep, None]


def _radix_grid(dimension: int, base: int, levels: np.ndarray) -> np.ndarray:
    """All levels^dimension rows, most significant digit first."""
    count = base**dimension
    codes = np.arange(count)
    digits = (codes[:, None] // base ** np.arange(dimension - 1, -1, -1)[None, :]) % base
    return levels[digits]


def generate(kind: str, dimension: int) -> SpanningSet:
    """Exact construction of one of the direction families."""
    if dimension < 1:
        raise ValueError("dimension must be at least 1")
    if kind == "dplus":
        eye = np.eye(dimension)
        vectors = np.vstack([eye, -eye])
        return SpanningSet(dimension, vectors, kind)
    bases = {"d2": 2, "d3": 3, "d4": 4, "d4_radix": 4}
    if kind not in bases:
        raise ValueError(f"unknown spanning set kind {kind!r}")
    base = bases[kind]
    if base**dimension >= ENUMERATION_LIMIT:
        raise ValueError(
            f"{base}^{dimension} states exceed the enumeration cap of 2^24"
        )
    levels = {
        "d2": np.array([-1.0, 1.0]),
        "d3": np.array([-1.0, 0.0, 1.0]),
        "d4": np.array([-1.5, -0.5, 0.5, 1.5]),
        "d4_radix": np.array([-1.0, 0.0, 1.0, 2.0]),
    }[kind]
    return SpanningSet(dimension, _radix_grid(dimension, base, levels), kind)


def is_positive_spanning(candidate: SpanningSet) -> tuple[bool, dict[str, np.ndarray]]:
    """Nonnegative-combination test with coefficient certificates.

    A set positively spans R^N iff every signed coordinate axis is a
    nonnegative combination of its vectors; the certificate maps each axis
    label to the coefficients found.
    """
    if candidate.dimension > 12:
        raise ValueError("positive spanning check capped at dimension 12")
    columns = candidate.vectors.T
    certificate: dict[str, np.ndarray] = {}
    for axis in range(candidate.dimension):
        for sign, label in ((1.0, f"+e{axis}"), (-1.0, f"-e{axis}")):
            target = np.zeros(candidate.dimension)
            target[axis] = sign
            coeffs, rnorm = nnls(columns, target)
            if rnorm > 1e-9:
                return False, certificate
            certificate[label] = coeffs
    return True, certificate


def d3_cosine_measure(dimension: int) -> float:
    """Closed-form cosine measure of the 3^N grid.

    1 / sqrt(sum over j of (sqrt(j) - sqrt(j-1))^2); equals 1 at dimension 1
    and decays like 1 / sqrt(log N).
    """
    if dimension < 1:
        raise ValueError("dimension must be at least 1")
    j = np.arange(1, dimension + 1, dtype=float)
    return float(1.0 / np.sqrt(((np.sqrt(j) - np.sqrt(j - 1)) ** 2).sum()))


def d3_log_lower_bound(dimension: int | np.ndarray) -> np.ndarray:
    """Lower bound 1 / sqrt(ln N + 1) for the 3^N cosine measure."""
    n = np.asarray(dimension, dtype=float)
    return 1.0 / np.sqrt(np.log(n) + 1.0)


def d3_witness_direction(v: np.ndarray) -> np.ndarray:
    """Equal-angle direction for the cone of 3^N vectors nearest to v.

    Components are (sqrt(j) - sqrt(j-1)) in decreasing |v| order, carrying
    v's signs; evaluating the inner alignment maximum there yields the
    closed-form cosine measure.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0 or not np.any(v != 0):
        raise ValueError("need a nonzero vector")
    n = v.size
    order = np.argsort(-np.abs(v), kind="stable")
    signs = np.sign(v[order])
    signs[signs == 0] = 1.0
    j = np.arange(1, n + 1, dtype=float)
    ladder = (np.sqrt(j) - np.sqrt(j - 1)) * signs
    witness = np.empty(n)
    witness[order] = ladder
    return witness


def alignment_max(spanning: SpanningSet, v: np.ndarray) -> float:
    """Inner maximum of the cosine-measure objective at direction v."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("need a nonzero vector")
    units = spanning.nonzero_unit_vectors()
    return float((units @ v).max() / norm)


@dataclass
class CosineMeasureReport:
    dimension: int
    kind: str
    estimate: float
    closed_form: float | None
    witness: np.ndarray
    restarts: int
    refine_tol: float

    def matches_closed_form(self, tol: float = 1e-3) -> bool:
        if self.closed_form is None:
            return True
        return abs(self.estimate - self.closed_form) <= tol

    def to_json_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "kind": self.kind,
            "estimate": self.estimate,
            "closed_form": self.closed_form,
            "witness": [float(x) for x in self.witness],
            "restarts": self.restarts,
            "refine_tol": self.refine_tol,
        }

    def to_text(self) -> str:
        closed = "-" if self.closed_form is None else f"{self.closed_form:.6f}"
        return (
            f"kind={self.kind} n={self.dimension} "
            f"estimate={self.estimate:.6f} closed_form={closed} "
            f"restarts={self.restarts}"
        )


def closed_form_cosine_measure(kind: str, dimension: int) -> float | None:
    """1/sqrt(N) for the coordinate and corner families, the ladder formula
    for the 3^N grid, and None where no closed form is known."""
    if kind in ("dplus", "d2"):
        return float(1.0 / np.sqrt(dimension))
    if kind == "d3":
        return d3_cosine_measure(dimension)
    return None


def cosine_measure(
    spanning: SpanningSet,
    restarts: int = 1000,
    refine_tol: float = 1e-9,
    seed: int = 0,
) -> CosineMeasureReport:
    """Multi-start minimax estimate of the cosine measure.

    Every evaluated direction upper-bounds the measure, so the returned
    estimate can only sit above the true value by whatever the restarts
    missed, never below it (up to floating error).
    """
    units = spanning.nonzero_unit_vectors()
    if units.shape[0] == 0:
        raise ValueError("the set contains only zero vectors")
    n = spanning.dimension

    def inner_max(w: np.ndarray) -> float:
        norm = np.linalg.norm(w)
        if norm < 1e-12:
            return 1.0
        return float((units @ w).max() / norm)

    rng = np.random.default_rng(seed)
    starts = [np.eye(n)[i] * s for i in range(n) for s in (1.0, -1.0)]
    if spanning.kind in ("d3", "d4", "d4_radix"):
        for _ in range(min(8, max(1, restarts // 8))):
            probe = rng.normal(size=n)
            while not np.any(probe != 0):
                probe = rng.normal(size=n)
            starts.append(d3_witness_direction(probe))
    starts.extend(rng.normal(size=(restarts, n)))

    best_val = np.inf
    best_dir = starts[0]
    for start in starts:
        if not np.any(start != 0):
            continue
        raw = inner_max(start)
        if raw < best_val:
            best_val, best_dir = raw, np.asarray(start, dtype=float)
        result = minimize(
            inner_max,
            start,
            method="Nelder-Mead",
            options={"xatol": refine_tol, "fatol": refine_tol, "maxiter": 400 * n},
        )
        if result.fun < best_val and np.linalg.norm(result.x) > 1e-12:
            best_val, best_dir = float(result.fun), result.x
    witness = best_dir / np.linalg.norm(best_dir)
    return CosineMeasureReport(
        n,
        spanning.kind,
        float(best_val),
        closed_form_cosine_measure(spanning.kind, n),
        witness,
        restarts,
        refine_tol,
    )


def save_report_json(report: CosineMeasureReport, path) -> None:
    from pathlib import Path

    Path(path).write_text(json.dumps(report.to_json_dict()))
