"""The benchmark problems: 1D Poisson, 1D wave, 2D Poisson.

Each builder returns assembled objects ready for the search driver; the
analytic solutions used as references in tests live here too.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fem import (
    BoundarySpec,
    LinearSystem,
    Mesh1D,
    Mesh2D,
    NewmarkState,
    assemble_poisson_1d,
    assemble_poisson_2d,
    assemble_wave_1d,
    initial_newmark_state,
)


def poisson_1d_forcing(x: np.ndarray, length: float = 1.0) -> np.ndarray:
    """Linear ramp forcing -128 x / L + 64."""
    return -128.0 * np.asarray(x) / length + 64.0


def poisson_1d_exact(x: np.ndarray, length: float = 1.0) -> np.ndarray:
    """Closed form for u'' = poisson_1d_forcing with u(0) = u(L) = 0.

    Integrating twice: u = -64 x^3 / (3 L) + 32 x^2 + C x, and u(L) = 0
    fixes C = -32 L / 3.
    """
    x = np.asarray(x, dtype=float)
    return -64.0 * x**3 / (3.0 * length) + 32.0 * x**2 - 32.0 * length * x / 3.0


def poisson_1d_system(node_count: int, length: float = 1.0) -> LinearSystem:
    """Ramp-forced Poisson problem with homogeneous Dirichlet ends."""
    mesh = Mesh1D(length, node_count)
    boundary = BoundarySpec((0, node_count - 1), (0.0, 0.0))
    return assemble_poisson_1d(mesh, lambda x: poisson_1d_forcing(x, length), boundary)


# initial displacement profiles and right-end condition per wave case;
# "free" right ends are natural (zero-flux) boundaries
_WAVE_CASES = {
    1: (lambda x, L: np.sin(np.pi * x / L), "fixed"),
    2: (lambda x, L: np.sin(2.0 * np.pi * x / L), "fixed"),
    3: (lambda x, L: np.sin(25.0 * np.pi * x / L), "fixed"),
    4: (lambda x, L: np.sin(np.pi * x / (2.0 * L)), "free"),
    5: (lambda x, L: np.sin(25.0 * np.pi * x / L), "free"),
}


def wave_1d_setup(
    node_count: int,
    case: int,
    dt: float,
    length: float = 1.0,
    wave_speed: float = 1.0,
) -> tuple[Mesh1D, sp.csr_matrix, BoundarySpec, NewmarkState]:
    """Mesh, scaled stiffness, boundary and t=0 state for a wave case.

    All cases start from rest.  Cases 1-3 fix both ends, cases 4-5 fix only
    the left end.
    """
    if case not in _WAVE_CASES:
        raise ValueError(f"unknown wave case {case}")
    profile, right_end = _WAVE_CASES[case]
    mesh = Mesh1D(length, node_count)
    stiffness, mass = assemble_wave_1d(mesh, wave_speed)
    if right_end == "fixed":
        boundary = BoundarySpec((0, node_count - 1), (0.0, 0.0))
    else:
        boundary = BoundarySpec((0,), (0.0,))
    u0 = profile(mesh.nodes, length)
    for node, value in boundary.value_by_node.items():
        u0[node] = value
    v0 = np.zeros(node_count)
    state = initial_newmark_state(u0, v0, dt, stiffness, mass, boundary, wave_speed)
    return mesh, stiffness, boundary, state


def wave_1d_exact_case1(
    x: np.ndarray, t: float, length: float = 1.0, wave_speed: float = 1.0
) -> np.ndarray:
    """Standing-wave solution sin(pi x / L) cos(pi c t / L) for case 1."""
    x = np.asarray(x, dtype=float)
    return np.sin(np.pi * x / length) * np.cos(np.pi * wave_speed * t / length)


def poisson_2d_system(nodes_per_side: int, case: int, length: float = 1.0) -> LinearSystem:
    """The two square-domain Poisson cases.

    Case 1: parabolic profile 4 x^2/L^2 - 4 x/L prescribed on the top and
    bottom faces, zero flux on the left/right faces, constant forcing 0.02.
    Case 2: value 1 on the top face, 0 on the other three, no forcing; the
    top corners take the top-face value.
    """
    mesh = Mesh2D(length, nodes_per_side)
    m = nodes_per_side
    coords = mesh.node_coords
    if case == 1:
        values: dict[int, float] = {}
        for ix in range(m):
            x = coords[mesh.node_index(ix, 0), 0]
            g = 4.0 * x**2 / length**2 - 4.0 * x / length
            values[mesh.node_index(ix, 0)] = g
            values[mesh.node_index(ix, m - 1)] = g
        edges = []
        for iy in range(m - 1):
            edges.append((mesh.node_index(0, iy), mesh.node_index(0, iy + 1), 0.0))
            edges.append((mesh.node_index(m - 1, iy), mesh.node_index(m - 1, iy + 1), 0.0))
        boundary = BoundarySpec(
            tuple(values.keys()), tuple(values.values()), tuple(edges)
        )
        forcing = 0.02
    elif case == 2:
        values = {}
        for ix in range(m):
            values[mesh.node_index(ix, 0)] = 0.0
        for iy in range(m):
            values[mesh.node_index(0, iy)] = 0.0
            values[mesh.node_index(m - 1, iy)] = 0.0
        for ix in range(m):
            values[mesh.node_index(ix, m - 1)] = 1.0
        boundary = BoundarySpec(tuple(values.keys()), tuple(values.values()))
        forcing = 0.0
    else:
        raise ValueError(f"unknown 2D case {case}")
    return assemble_poisson_2d(mesh, forcing, boundary)
