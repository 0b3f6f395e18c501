"""Mapping quadratic objectives around an iterate onto Ising-form energies.

A search frame pins the Dirichlet entries of the iterate and assigns one spin
to every remaining unknown; a spin vector q decodes to

    u(q) = center + shift + scale * q        (on the active entries)

Substituting u(q) into either the energy functional 1/2 u'Au - u'b of a
symmetric positive definite system or the squared residual |Au - b|^2 of a
general one yields a quadratic form in q.  The constructors below collect its
coefficients so that the spin energy reproduces the objective exactly,
constant included: energy(q) == objective(decode(q)) for every q in {-1,+1}^n.
Dirichlet unknowns are removed from the spin register entirely, so no sampler
can ever violate a prescribed value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import LinearSystem


@dataclass(frozen=True)
class SearchFrame:
    """Decode map from spins to candidate solutions around ``center``."""

    center: np.ndarray
    shift: np.ndarray
    scale: float
    dirichlet_mask: np.ndarray
    active: np.ndarray

    @property
    def n_active(self) -> int:
        return int(self.active.size)


def build_frame(
    system: LinearSystem,
    center: np.ndarray,
    scale: float,
    shift: np.ndarray | None = None,
) -> SearchFrame:
    """Frame of width ``scale`` around ``center``, optionally translated.

    ``center`` must satisfy the prescribed values (to 1e-12) and the shift
    must vanish on them; both are stored exactly.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    center = np.asarray(center, dtype=float).copy()
    if center.shape != (system.n,):
        raise ValueError("center length does not match the system")
    mask = system.dirichlet_mask
    for node, value in system.boundary.value_by_node.items():
        if abs(center[node] - value) > 1e-12:
            raise ValueError(f"center violates the prescribed value at node {node}")
    if shift is None:
        shift = np.zeros(system.n)
    else:
        shift = np.asarray(shift, dtype=float).copy()
        if shift.shape != (system.n,):
            raise ValueError("shift length does not match the system")
        if np.any(np.abs(shift[mask]) > 1e-12):
            raise ValueError("shift must vanish on Dirichlet entries")
        shift[mask] = 0.0
    return SearchFrame(center, shift, float(scale), mask, np.flatnonzero(~mask))


def decode(frame: SearchFrame, spins: np.ndarray) -> np.ndarray:
    """center + shift + scale * spins on the active entries."""
    spins = np.asarray(spins)
    if spins.shape != (frame.n_active,):
        raise ValueError("spin vector length does not match the frame")
    if not np.all(np.abs(spins) == 1):
        raise ValueError("spins must be +/-1")
    u = frame.center + frame.shift
    u[frame.active] += frame.scale * spins
    return u


@dataclass
class ModifiedIsing:
    """Quadratic spin energy q'Jq + q'h + sum(diag_terms) + constant.

    ``couplings`` is hollow; ``diag_terms`` holds the coefficients of the
    q_k^2 terms, which are constant for spins and therefore enter as their
    sum.  Keeping them and the scalar makes the energy identity with the
    source objective exact and testable.
    """

    couplings: np.ndarray
    biases: np.ndarray
    diag_terms: np.ndarray
    constant: float

    @property
    def n(self) -> int:
        return int(self.biases.size)

    def energy(self, spins: np.ndarray) -> float:
        spins = np.asarray(spins, dtype=float)
        if spins.shape != (self.n,):
            raise ValueError("spin vector length does not match")
        if not np.all(np.abs(spins) == 1):
            raise ValueError("spins must be +/-1")
        return float(
            spins @ (self.couplings @ spins)
            + spins @ self.biases
            + self.diag_terms.sum()
            + self.constant
        )

    def energies(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=float)
        quad = ((batch @ self.couplings) * batch).sum(axis=1)
        return quad + batch @ self.biases + self.diag_terms.sum() + self.constant


@dataclass
class StandardIsing:
    """Sampler-facing energy q'Jq + q'h + offset with strictly upper J.

    ``offset`` carries the constant dropped when folding a ModifiedIsing,
    so sample energies remain directly comparable with the objective.
    """

    couplings: np.ndarray
    biases: np.ndarray
    offset: float = 0.0

    def __post_init__(self) -> None:
        self.couplings = np.asarray(self.couplings, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.couplings.shape != (self.n, self.n):
            raise ValueError("couplings/biases dimensions disagree")
        if np.any(np.tril(self.couplings) != 0.0):
            raise ValueError("couplings must be strictly upper triangular")

    @property
    def n(self) -> int:
        return int(self.biases.size)

    def symmetric_couplings(self) -> np.ndarray:
        return self.couplings + self.couplings.T

    def energy(self, spins: np.ndarray) -> float:
        spins = np.asarray(spins, dtype=float)
        return float(spins @ (self.couplings @ spins) + spins @ self.biases + self.offset)

    def energies(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=float)
        quad = ((batch @ self.couplings) * batch).sum(axis=1)
        return quad + batch @ self.biases + self.offset

    def to_json_dict(self) -> dict:
        quadratic = {}
        rows, cols = np.nonzero(self.couplings)
        for i, j in zip(rows, cols):
            quadratic[f"{int(i)},{int(j)}"] = float(self.couplings[i, j])
        return {
            "linear": {str(i): float(h) for i, h in enumerate(self.biases)},
            "quadratic": quadratic,
            "offset": float(self.offset),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "StandardIsing":
        linear = doc["linear"]
        n = len(linear)
        biases = np.zeros(n)
        for key, value in linear.items():
            biases[int(key)] = float(value)
        couplings = np.zeros((n, n))
        for key, value in doc.get("quadratic", {}).items():
            i, j = (int(p) for p in key.split(","))
            if i >= j:
                raise ValueError(f"coupling key {key!r} is not upper triangular")
            couplings[i, j] = float(value)
        return cls(couplings, biases, float(doc.get("offset", 0.0)))


def to_standard(model: ModifiedIsing) -> StandardIsing:
    """Fold the lower triangle up and move the constant terms into the offset."""
    j = np.triu(model.couplings, 1) + np.tril(model.couplings, -1).T
    return StandardIsing(j, model.biases.copy(), float(model.diag_terms.sum() + model.constant))


def rescale_to_range(std: StandardIsing, bound: float = 1.0) -> tuple[StandardIsing, float]:
    """Scale couplings and biases into [-bound, bound].

    Returns the scaled model and the factor s such that
    original_energy = s * scaled_energy + offset (offsets excluded from the
    scaling).  The factor is never below 1, so well-ranged models pass
    through unchanged.
    """
    peak = 0.0
    if std.n:
        peak = max(float(np.abs(std.couplings).max()), float(np.abs(std.biases).max()))
    factor = max(1.0, peak / bound)
    scaled = StandardIsing(std.couplings / factor, std.biases / factor, 0.0)
    return scaled, factor


def _active_block(system: LinearSystem, active: np.ndarray) -> np.ndarray:
    return system.matrix[active][:, active].toarray()


def spd_to_ising(system: LinearSystem, frame: SearchFrame) -> ModifiedIsing:
    """Spin form of the energy functional 1/2 u'Au - u'b around the frame.

    Requires an SPD system; energy(q) equals the functional at decode(q)
    exactly for every spin assignment.
    """
    if not system.spd:
        raise ValueError("system is not flagged SPD; use lsq_to_ising")
    act = frame.active
    point = frame.center + frame.shift
    gradient = system.matrix @ point - system.rhs
    quad = 0.5 * frame.scale**2 * _active_block(system, act)
    diag = np.diag(quad).copy()
    couplings = quad - np.diag(diag)
    biases = frame.scale * gradient[act]
    constant = float(point @ (0.5 * (system.matrix @ point) - system.rhs))
    return ModifiedIsing(couplings, biases, diag, constant)


def lsq_to_ising(system: LinearSystem, frame: SearchFrame) -> ModifiedIsing:
    """Spin form of the squared residual |Au - b|^2 around the frame.

    Valid for any matrix; energy(q) equals the squared residual at decode(q)
    exactly for every spin assignment.
    """
    act = frame.active
    cols = system.matrix.tocsc()[:, act]
    point = frame.center + frame.shift
    residual = system.matrix @ point - system.rhs
    normal = (cols.T @ cols).toarray()
    quad = frame.scale**2 * normal
    diag = np.diag(quad).copy()
    couplings = quad - np.diag(diag)
    biases = 2.0 * frame.scale * (cols.T @ residual)
    constant = float(residual @ residual)
    return ModifiedIsing(couplings, biases, diag, constant)


@dataclass(frozen=True)
class NestedFrame:
    """Two stacked frames around the same center.

    grid "d3": equal scales, so the two spin registers decode to the per-dof
    ladder {-2s, 0, +2s} (the zero displacement twice); grid "d4": the inner
    scale is halved, giving {-1.5s, -0.5s, +0.5s, +1.5s}.
    """

    base: SearchFrame
    inner_scale: float
    grid: str


def nested_frame(frame: SearchFrame, grid: str) -> NestedFrame:
    if np.any(frame.shift != 0.0):
        raise ValueError("nested frames require an untranslated base frame")
    if grid == "d3":
        inner = frame.scale
    elif grid == "d4":
        inner = frame.scale / 2.0
    else:
        raise ValueError(f"unknown nested grid {grid!r}")
    return NestedFrame(frame, inner, grid)


def _check_nested_scales(nested: NestedFrame) -> None:
    expected = nested.base.scale if nested.grid == "d3" else nested.base.scale / 2.0
    if not np.isclose(nested.inner_scale, expected, rtol=1e-12, atol=0.0):
        raise ValueError(
            f"inner scale {nested.inner_scale} violates the {nested.grid} relation"
        )


def nested_decode(nested: NestedFrame, spins: np.ndarray) -> np.ndarray:
    """center + s0 * q_outer + s1 * q_inner on the active entries."""
    frame = nested.base
    n = frame.n_active
    spins = np.asarray(spins)
    if spins.shape != (2 * n,):
        raise ValueError("spin vector length does not match the nested frame")
    if not np.all(np.abs(spins) == 1):
        raise ValueError("spins must be +/-1")
    u = frame.center.copy()
    u[frame.active] += frame.scale * spins[:n] + nested.inner_scale * spins[n:]
    return u


def nested_compose(
    system: LinearSystem, nested: NestedFrame, objective: str = "energy"
) -> ModifiedIsing:
    """Single spin model over both registers of a nested frame.

    The energy over the stacked spins (q_outer, q_inner) equals the chosen
    objective evaluated at nested_decode exactly, including the constant,
    which is the objective at the frame center.  The cross block couples the
    two registers through the system matrix.
    """
    _check_nested_scales(nested)
    if objective not in ("energy", "lsq"):
        raise ValueError(f"unknown objective {objective!r}")
    frame = nested.base
    act = frame.active
    n = act.size
    s0, s1 = frame.scale, nested.inner_scale
    center = frame.center
    residual = system.matrix @ center - system.rhs

    quad = np.zeros((2 * n, 2 * n))
    if objective == "energy":
        if not system.spd:
            raise ValueError("system is not flagged SPD; use the lsq objective")
        block = _active_block(system, act)
        quad[:n, :n] = 0.5 * s0**2 * block
        quad[n:, n:] = 0.5 * s1**2 * block
        quad[n:, :n] = s0 * s1 * block
        lin = residual[act]
        biases = np.concatenate([s0 * lin, s1 * lin])
        constant = float(center @ (0.5 * (system.matrix @ center) - system.rhs))
    else:
        cols = system.matrix.tocsc()[:, act]
        block = (cols.T @ cols).toarray()
        quad[:n, :n] = s0**2 * block
        quad[n:, n:] = s1**2 * block
        quad[n:, :n] = 2.0 * s0 * s1 * block
        lin = cols.T @ residual
        biases = np.concatenate([2.0 * s0 * lin, 2.0 * s1 * lin])
        constant = float(residual @ residual)

    diag = np.diag(quad).copy()
    couplings = quad - np.diag(diag)
    return ModifiedIsing(couplings, biases, diag, constant)
