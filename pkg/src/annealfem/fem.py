"""Finite element assembly for the benchmark problems.

Systems are assembled dense (problem sizes here are a few hundred unknowns),
Dirichlet conditions are folded in symmetrically (row/column lift with unit
diagonal, prescribed value on the right-hand side), and the result is stored
sparse.  The lift keeps the full matrix symmetric positive definite, so the
residual of the complete nodal vector vanishes at the exact solution and the
prescribed entries can be carried along unchanged by downstream solvers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.io import mmread, mmwrite


@dataclass(frozen=True)
class Mesh1D:
    """Uniform mesh on (0, length) with node_count equispaced nodes."""

    length: float
    node_count: int

    def __post_init__(self) -> None:
        if self.node_count < 2:
            raise ValueError("mesh needs at least 2 nodes")
        if not self.length > 0:
            raise ValueError("mesh length must be positive")

    @property
    def spacing(self) -> float:
        return self.length / (self.node_count - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.node_count)


@dataclass(frozen=True)
class Mesh2D:
    """Structured grid of 4-noded squares on (0, length)^2.

    Node (ix, iy) has index iy * nodes_per_side + ix; coordinates are
    (ix * spacing, iy * spacing).
    """

    length: float
    nodes_per_side: int

    def __post_init__(self) -> None:
        if self.nodes_per_side < 2:
            raise ValueError("mesh needs at least 2 nodes per side")
        if not self.length > 0:
            raise ValueError("mesh length must be positive")

    @property
    def spacing(self) -> float:
        return self.length / (self.nodes_per_side - 1)

    @property
    def node_count(self) -> int:
        return self.nodes_per_side**2

    @property
    def element_count(self) -> int:
        return (self.nodes_per_side - 1) ** 2

    def node_index(self, ix: int, iy: int) -> int:
        return iy * self.nodes_per_side + ix

    @property
    def node_coords(self) -> np.ndarray:
        m = self.nodes_per_side
        line = np.linspace(0.0, self.length, m)
        xx, yy = np.meshgrid(line, line)
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class BoundarySpec:
    """Prescribed nodal values plus flux segments.

    ``neumann_edges`` holds (node_a, node_b, flux) triples; a constant outward
    flux on the segment contributes -flux * len/2 to the load at each end
    node.  A segment may touch the Dirichlet set at one end (a corner) but
    must not lie inside it.
    """

    dirichlet_nodes: tuple[int, ...] = ()
    dirichlet_values: tuple[float, ...] = ()
    neumann_edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self) -> None:
        if len(self.dirichlet_nodes) != len(self.dirichlet_values):
            raise ValueError("one value per Dirichlet node required")
        if len(set(self.dirichlet_nodes)) != len(self.dirichlet_nodes):
            raise ValueError("duplicate Dirichlet node")
        if not all(np.isfinite(self.dirichlet_values)):
            raise ValueError("non-finite Dirichlet value")
        fixed = set(self.dirichlet_nodes)
        for a, b, _ in self.neumann_edges:
            if a in fixed and b in fixed:
                raise ValueError(f"flux edge ({a}, {b}) lies inside the Dirichlet set")

    @property
    def value_by_node(self) -> dict[int, float]:
        return dict(zip(self.dirichlet_nodes, self.dirichlet_values))


@dataclass
class LinearSystem:
    """Assembled system A u = b with the boundary data it was built from.

    ``spd`` marks systems whose matrix is symmetric and positive definite on
    the free unknowns (true for every assembly in this package).
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    boundary: BoundarySpec
    spd: bool = True

    def __post_init__(self) -> None:
        self.rhs = np.asarray(self.rhs, dtype=float)
        if self.matrix.shape != (self.n, self.n):
            raise ValueError("matrix/rhs dimensions disagree")
        for node in self.boundary.dirichlet_nodes:
            if not 0 <= node < self.n:
                raise ValueError(f"Dirichlet node {node} out of range")

    @property
    def n(self) -> int:
        return self.rhs.shape[0]

    @property
    def dirichlet_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[list(self.boundary.dirichlet_nodes)] = True
        return mask

    @property
    def free_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet_mask)

    def initial_guess(self) -> np.ndarray:
        """Zeros everywhere except the prescribed boundary values."""
        u = np.zeros(self.n)
        for node, value in self.boundary.value_by_node.items():
            u[node] = value
        return u

    def to_json_dict(self) -> dict:
        coo = self.matrix.tocoo()
        return {
            "n": self.n,
            "triplets": [[int(i), int(j), float(v)] for i, j, v in zip(coo.row, coo.col, coo.data)],
            "b": [float(x) for x in self.rhs],
            "dirichlet": [
                [int(node), float(value)]
                for node, value in zip(self.boundary.dirichlet_nodes, self.boundary.dirichlet_values)
            ],
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LinearSystem":
        n = int(doc["n"])
        mat = sp.coo_matrix(
            (
                [float(t[2]) for t in doc["triplets"]],
                (
                    [int(t[0]) for t in doc["triplets"]],
                    [int(t[1]) for t in doc["triplets"]],
                ),
            ),
            shape=(n, n),
        ).tocsr()
        rhs = np.asarray(doc["b"], dtype=float)
        boundary = BoundarySpec(
            dirichlet_nodes=tuple(int(p[0]) for p in doc["dirichlet"]),
            dirichlet_values=tuple(float(p[1]) for p in doc["dirichlet"]),
        )
        sys = cls(mat, rhs, boundary, spd=False)
        sys.spd = _is_spd(sys)
        return sys

    @classmethod
    def load_json(cls, path: str | Path) -> "LinearSystem":
        return cls.from_json_dict(json.loads(Path(path).read_text()))

    def save_matrix_market(self, path: str | Path) -> None:
        mmwrite(str(path), self.matrix)


def load_matrix_market(path: str | Path) -> sp.csr_matrix:
    return sp.csr_matrix(mmread(str(path)))


def _is_spd(system: LinearSystem, sym_rtol: float = 1e-12) -> bool:
    a = system.matrix
    scale = max(abs(a.max()), abs(a.min()), 1e-300)
    if abs(a - a.T).max() > sym_rtol * scale:
        return False
    free = system.free_indices
    if free.size == 0:
        return True
    block = a[free][:, free].toarray()
    try:
        np.linalg.cholesky(block)
    except np.linalg.LinAlgError:
        return False
    return True


def min_free_eigenvalue(system: LinearSystem) -> float:
    """Smallest eigenvalue of the full (lifted) matrix, by dense solve."""
    return float(np.linalg.eigvalsh(system.matrix.toarray())[0])


def _lift_dirichlet(k: np.ndarray, f: np.ndarray, boundary: BoundarySpec) -> tuple[np.ndarray, np.ndarray]:
    """Fold prescribed values into the load and reduce rows/columns to identity."""
    nodes = np.asarray(boundary.dirichlet_nodes, dtype=int)
    if nodes.size == 0:
        return k, f
    values = np.asarray(boundary.dirichlet_values, dtype=float)
    lift = np.zeros(f.shape[0])
    lift[nodes] = values
    f = f - k @ lift
    k = k.copy()
    k[nodes, :] = 0.0
    k[:, nodes] = 0.0
    k[nodes, nodes] = 1.0
    f[nodes] = values
    return k, f


def assemble_poisson_1d(
    mesh: Mesh1D,
    forcing: Sequence[float] | np.ndarray | Callable[[np.ndarray], np.ndarray],
    boundary: BoundarySpec,
) -> LinearSystem:
    """Linear-element system for u'' = f on the mesh.

    ``forcing`` is either per-node samples or a callable evaluated at the
    nodes; the load uses the consistent integral of its piecewise-linear
    interpolant.  Point fluxes may be supplied as degenerate (i, i, flux)
    edges.
    """
    x = mesh.nodes
    f = np.asarray(forcing(x) if callable(forcing) else forcing, dtype=float)
    if f.shape != (mesh.node_count,):
        raise ValueError("forcing must provide one sample per node")
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite forcing sample")
    n, h = mesh.node_count, mesh.spacing

    k = np.zeros((n, n))
    load = np.zeros(n)
    for e in range(n - 1):
        k[e : e + 2, e : e + 2] += np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
        load[e] += h * (2.0 * f[e] + f[e + 1]) / 6.0
        load[e + 1] += h * (f[e] + 2.0 * f[e + 1]) / 6.0
    b = -load
    for a_node, b_node, flux in boundary.neumann_edges:
        if a_node == b_node:
            b[a_node] -= flux
        else:
            half = flux * abs(x[b_node] - x[a_node]) / 2.0
            b[a_node] -= half
            b[b_node] -= half

    k, b = _lift_dirichlet(k, b, boundary)
    return LinearSystem(sp.csr_matrix(k), b, boundary, spd=True)


# Laplacian stiffness of a bilinear shape-function square; size-independent in 2D.
_QUAD_STIFFNESS = np.array(
    [
        [4.0, -1.0, -2.0, -1.0],
        [-1.0, 4.0, -1.0, -2.0],
        [-2.0, -1.0, 4.0, -1.0],
        [-1.0, -2.0, -1.0, 4.0],
    ]
) / 6.0


def assemble_poisson_2d(
    mesh: Mesh2D,
    forcing: float,
    boundary: BoundarySpec,
    conductivity: float = 1.0,
) -> LinearSystem:
    """Bilinear-quad system for div(conductivity * grad u) = f, f constant."""
    m = mesh.nodes_per_side
    n = mesh.node_count
    h = mesh.spacing
    k = np.zeros((n, n))
    b = np.zeros(n)
    for ey in range(m - 1):
        for ex in range(m - 1):
            n00 = mesh.node_index(ex, ey)
            conn = [n00, n00 + 1, n00 + m + 1, n00 + m]
            k[np.ix_(conn, conn)] += conductivity * _QUAD_STIFFNESS
            b[conn] -= forcing * h * h / 4.0
    coords = mesh.node_coords
    for a_node, b_node, flux in boundary.neumann_edges:
        for node in (a_node, b_node):
            if not 0 <= node < n:
                raise ValueError(f"flux edge node {node} out of range")
        length = float(np.linalg.norm(coords[b_node] - coords[a_node]))
        b[a_node] -= flux * length / 2.0
        b[b_node] -= flux * length / 2.0
    for node in boundary.dirichlet_nodes:
        if not 0 <= node < n:
            raise ValueError(f"Dirichlet node {node} out of range")

    k, b = _lift_dirichlet(k, b, boundary)
    return LinearSystem(sp.csr_matrix(k), b, boundary, spd=True)


def assemble_wave_1d(
    mesh: Mesh1D, wave_speed: float
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Spatial operator and lumped mass for u_tt = wave_speed^2 u_xx.

    Returns (stiffness, mass) for the semi-discrete system
    mass * u_tt + stiffness @ u = 0; the stiffness already carries the
    wave_speed^2 factor and no boundary treatment.
    """
    n, h = mesh.node_count, mesh.spacing
    k = np.zeros((n, n))
    for e in range(n - 1):
        k[e : e + 2, e : e + 2] += np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    mass = np.full(n, h)
    mass[0] = mass[-1] = h / 2.0
    return sp.csr_matrix(wave_speed**2 * k), mass


@dataclass
class NewmarkState:
    """One time level of the second-order system mass * u_tt + K u = F."""

    displacement: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    dt: float
    mass: np.ndarray
    beta: float = 0.25
    gamma: float = 0.5
    wave_speed: float = 1.0

    def __post_init__(self) -> None:
        self.displacement = np.asarray(self.displacement, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        self.acceleration = np.asarray(self.acceleration, dtype=float)
        self.mass = np.asarray(self.mass, dtype=float)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(self.mass > 0):
            raise ValueError("mass entries must be strictly positive")
        if not (0 < self.beta <= 1 and 0 < self.gamma <= 1):
            raise ValueError("beta and gamma must lie in (0, 1]")


def initial_newmark_state(
    u0: np.ndarray,
    v0: np.ndarray,
    dt: float,
    stiffness: sp.csr_matrix,
    mass: np.ndarray,
    boundary: BoundarySpec,
    wave_speed: float = 1.0,
) -> NewmarkState:
    """State at t=0 with the acceleration consistent with the equation of motion."""
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    a0 = -(stiffness @ u0) / np.asarray(mass, dtype=float)
    fixed = list(boundary.dirichlet_nodes)
    a0[fixed] = 0.0
    v0 = v0.copy()
    v0[fixed] = 0.0
    return NewmarkState(u0, v0, a0, dt=dt, mass=mass, wave_speed=wave_speed)


def newmark_effective_system(
    state: NewmarkState,
    stiffness: sp.csr_matrix,
    boundary: BoundarySpec,
    forcing: np.ndarray | None = None,
) -> LinearSystem:
    """SPD system whose solution is the acceleration at the next time level."""
    dt, beta = state.dt, state.beta
    u_pred = state.displacement + dt * state.velocity + dt * dt * (0.5 - beta) * state.acceleration
    eff = beta * dt * dt * stiffness.toarray()
    eff[np.diag_indices_from(eff)] += state.mass
    rhs = -(stiffness @ u_pred)
    if forcing is not None:
        rhs = rhs + forcing
    # prescribed displacement is constant in time, so its acceleration is zero
    accel_boundary = replace(
        boundary, dirichlet_values=tuple(0.0 for _ in boundary.dirichlet_nodes)
    )
    eff, rhs = _lift_dirichlet(eff, rhs, accel_boundary)
    return LinearSystem(sp.csr_matrix(eff), rhs, accel_boundary, spd=True)


def newmark_step(
    state: NewmarkState,
    stiffness: sp.csr_matrix,
    boundary: BoundarySpec,
    solve: Callable[[LinearSystem], np.ndarray],
    forcing: np.ndarray | None = None,
) -> NewmarkState:
    """Advance one step, delegating the acceleration solve to ``solve``."""
    dt, beta, gamma = state.dt, state.beta, state.gamma
    system = newmark_effective_system(state, stiffness, boundary, forcing)
    a_new = np.asarray(solve(system), dtype=float)
    u_pred = state.displacement + dt * state.velocity + dt * dt * (0.5 - beta) * state.acceleration
    v_pred = state.velocity + dt * (1.0 - gamma) * state.acceleration
    return NewmarkState(
        u_pred + beta * dt * dt * a_new,
        v_pred + gamma * dt * a_new,
        a_new,
        dt=dt,
        mass=state.mass,
        beta=beta,
        gamma=gamma,
        wave_speed=state.wave_speed,
    )


def discrete_wave_energy(state: NewmarkState, stiffness: sp.csr_matrix) -> float:
    """Total mechanical energy 1/2 v'Mv + 1/2 u'Ku of the semi-discrete system."""
    u, v = state.displacement, state.velocity
    return float(0.5 * v @ (state.mass * v) + 0.5 * u @ (stiffness @ u))


def residual_norm(system: LinearSystem, u: np.ndarray) -> float:
    """Euclidean norm of A u - b."""
    u = np.asarray(u, dtype=float)
    if u.shape != (system.n,):
        raise ValueError("vector length does not match the system")
    return float(np.linalg.norm(system.matrix @ u - system.rhs))


def direct_solve(system: LinearSystem) -> np.ndarray:
    return spla.spsolve(system.matrix.tocsc(), system.rhs)


def system_from_arrays(
    matrix: np.ndarray,
    rhs: np.ndarray,
    dirichlet_nodes: Sequence[int] = (),
    dirichlet_values: Sequence[float] = (),
    lift: bool = False,
) -> LinearSystem:
    """Wrap a raw (dense) system, optionally lifting the prescribed values."""
    boundary = BoundarySpec(tuple(dirichlet_nodes), tuple(dirichlet_values))
    k = np.asarray(matrix, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if lift:
        k, b = _lift_dirichlet(k, b, boundary)
    sys = LinearSystem(sp.csr_matrix(k), b, boundary, spd=False)
    sys.spd = _is_spd(sys)
    return sys


_GAUSS_POINTS, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(4)


def l2_error(
    mesh: Mesh1D, values: np.ndarray, exact: Callable[[np.ndarray], np.ndarray]
) -> float:
    """L2 norm of (piecewise-linear interpolant of values) - exact over the domain."""
    values = np.asarray(values, dtype=float)
    x = mesh.nodes
    h = mesh.spacing
    total = 0.0
    for e in range(mesh.node_count - 1):
        xm = 0.5 * (x[e] + x[e + 1])
        xg = xm + 0.5 * h * _GAUSS_POINTS
        t = (xg - x[e]) / h
        uh = (1.0 - t) * values[e] + t * values[e + 1]
        diff = uh - exact(xg)
        total += 0.5 * h * float(_GAUSS_WEIGHTS @ diff**2)
    return float(np.sqrt(total))
