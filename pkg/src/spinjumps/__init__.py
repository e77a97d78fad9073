"""Counting statistics of quantum jumps in a long-range dissipative
transverse-field Ising chain.

Solvers, from exact to approximate:

* :mod:`spinjumps.dense` — dense tilted-Lindbladian integration for small N
  (the oracle everything else is checked against).
* :mod:`spinjumps.trajectories` — Monte Carlo wavefunction unraveling with
  per-site jump records.
* :mod:`spinjumps.fcs_cmf` — cluster mean-field factorization of the tilted
  dynamics; joint distributions and covariance growth rates.
* :mod:`spinjumps.cumulant` — second-order cumulant closure with all-to-all
  correlations; covariance rates at arbitrary distance.
* :mod:`spinjumps.wtd` — waiting-time distributions: closed single-site form
  and Monte Carlo cluster sampling.
"""

from .counting import CountDistribution, connected_joint, quadrant_sums
from .cumulant import (
    CumulantState,
    covariance_rate,
    evolve_cumulants,
    steady_cumulants,
)
from .dense import fcs_dense, integrate_lindblad, steady_state, wtd_dense
from .fcs_cmf import (
    CmfSolver,
    cmf_steady_state,
    covariance_growth_rate,
    magnetization_boundary,
    reconstruct_pn,
)
from .model import ModelParams, build_cmf_hamiltonian, build_full_hamiltonian, kac_norm
from .trajectories import JumpRecord, McwfEngine, empirical_fcs, trajectory_rng
from .wtd import (
    WtdAnalytic,
    mx_star,
    wtd_analytic_cdf,
    wtd_analytic_pdf,
    wtd_monte_carlo,
    wtd_moments,
    wtd_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "CmfSolver",
    "CountDistribution",
    "CumulantState",
    "JumpRecord",
    "McwfEngine",
    "ModelParams",
    "WtdAnalytic",
    "build_cmf_hamiltonian",
    "build_full_hamiltonian",
    "cmf_steady_state",
    "connected_joint",
    "covariance_growth_rate",
    "covariance_rate",
    "empirical_fcs",
    "evolve_cumulants",
    "fcs_dense",
    "integrate_lindblad",
    "kac_norm",
    "magnetization_boundary",
    "mx_star",
    "quadrant_sums",
    "reconstruct_pn",
    "steady_cumulants",
    "steady_state",
    "trajectory_rng",
    "wtd_analytic_cdf",
    "wtd_analytic_pdf",
    "wtd_dense",
    "wtd_monte_carlo",
    "wtd_moments",
    "wtd_sweep",
]
