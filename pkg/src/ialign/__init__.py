"""Distributed interference alignment on K-user MIMO interference channels.

Simulation toolkit built around two alternating beamformer designs that
need only local channel knowledge: leakage minimization and per-stream
SINR maximization.  Supporting pieces: reproducible channel ensembles
(including two-slot relay-induced virtual MIMO), rate and alignment
metrics, baselines for comparison, a numeric feasibility probe, and a
scenario harness with a command line front end.
"""

from ._backend import BACKEND as backend
from .channel import (
    ChannelSet,
    NetworkConfig,
    RelayParams,
    channels_from_json,
    channels_to_json,
    extend_diagonal,
    generate_network,
    matched_relay_gain,
    random_relay_params,
    reciprocal_channels,
    relay_effective_channels,
    whiten_noise,
)
from .harness import (
    FeasibilitySpec,
    ResultTable,
    ScenarioSpec,
    derive_seed,
    emit_csv,
    feasibility_table,
    relay_sweep,
    run_scenario,
)
from .linalg import (
    TOL,
    EigenPair,
    Tolerances,
    eigh_smallest,
    inv_sqrt_pd,
    logdet_pd,
    orthonormalize,
    solve_pd,
)
from .rates import (
    RateReport,
    aligned_rate,
    dof_slope,
    interference_fraction,
    isotropic_sum_rate,
    stream_sinr,
    sum_rate,
    tdma_sum_rate,
)
from .solvers import (
    IterationTrace,
    Solution,
    SolverOptions,
    closed_form_ia_3user,
    interference_covariance,
    leakage,
    max_sinr_vector,
    run_interference_avoidance,
    run_max_sinr,
    run_min_leakage,
    solution_from_json,
    solution_to_json,
    stream_covariance,
    weighted_leakage,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
