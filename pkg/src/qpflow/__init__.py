"""Fast-decoupled AC power flow solved by an HHL quantum linear solver.

The package splits into:

* linalg       -- dense Hermitian eigen/Cholesky/solve kernels
* statevector  -- the three-register statevector circuit simulator
* hhl          -- the quantum linear-system solver built on it
* network      -- grid model, Y-bus, fast-decoupled matrices, mismatch
* solvers      -- quantum and classical power-flow iterations
* stochastic   -- correlated Monte Carlo studies
* caseio / cli -- file formats and the command-line drivers
* cases        -- bundled example networks
"""

from .hhl import HHLConfig, HHLSolution, PreparedSystem, prepare_system
from .hhl import solve as hhl_solve
from .network import (
    Branch,
    Bus,
    FastDecoupledMatrices,
    Mismatch,
    NetworkCase,
    build_b_matrices,
    build_ybus,
    compute_mismatch,
    scaled_rhs,
)
from .solvers import (
    ResourceReport,
    SolveReport,
    SolverConfig,
    branch_flows,
    resource_estimate,
    solve_fast_decoupled,
    solve_newton,
    solve_qpf,
)
from .statevector import RegisterLayout, StateVector
from .stochastic import (
    CorrelationSpec,
    MonteCarloResult,
    UncertainInjection,
    pearson,
    run_monte_carlo,
    sample_injections,
)

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "Bus",
    "CorrelationSpec",
    "FastDecoupledMatrices",
    "HHLConfig",
    "HHLSolution",
    "Mismatch",
    "MonteCarloResult",
    "NetworkCase",
    "PreparedSystem",
    "RegisterLayout",
    "ResourceReport",
    "SolveReport",
    "SolverConfig",
    "StateVector",
    "UncertainInjection",
    "branch_flows",
    "build_b_matrices",
    "build_ybus",
    "compute_mismatch",
    "hhl_solve",
    "pearson",
    "prepare_system",
    "resource_estimate",
    "run_monte_carlo",
    "sample_injections",
    "scaled_rhs",
    "solve_fast_decoupled",
    "solve_newton",
    "solve_qpf",
]
