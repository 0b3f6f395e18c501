"""Annealing-sampler based solvers for finite element linear systems.

The package assembles small FEM benchmark systems, maps quadratic objectives
around a current iterate onto Ising-form energies over spin registers,
polls exponentially large direct-search neighborhoods with interchangeable
samplers (simulated annealing, exhaustive enumeration, remote annealers),
and benchmarks samplers with time-to-target metrics.
"""

from .fem import (
    BoundarySpec,
    LinearSystem,
    Mesh1D,
    Mesh2D,
    NewmarkState,
    assemble_poisson_1d,
    assemble_poisson_2d,
    assemble_wave_1d,
    direct_solve,
    l2_error,
    newmark_step,
    residual_norm,
    system_from_arrays,
)
from .ising import (
    ModifiedIsing,
    NestedFrame,
    SearchFrame,
    StandardIsing,
    build_frame,
    decode,
    lsq_to_ising,
    nested_compose,
    nested_decode,
    nested_frame,
    spd_to_ising,
    to_standard,
)
from .samplers import (
    ExhaustiveSampler,
    RemoteSampler,
    SaConfig,
    Sample,
    Sampler,
    SamplerError,
    SimulatedAnnealingSampler,
    exhaustive,
    sample_batch,
    simulated_anneal,
)
from .search import (
    PollOutcome,
    SearchConfig,
    SearchTrace,
    default_alpha0,
    hyperoctant_step,
    objective_value,
    poll_step,
    run,
)
from .spanning import (
    CosineMeasureReport,
    SpanningSet,
    cosine_measure,
    d3_cosine_measure,
    d3_witness_direction,
    generate,
    is_positive_spanning,
)
from .ttt import (
    EnergyDistribution,
    TTTReport,
    aggregate_search_ttt,
    samples_to_target,
    target_energy,
    ttt_compare,
)

__version__ = "0.1.0"
