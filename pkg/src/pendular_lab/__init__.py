"""Centroidal net-wrench force distribution and its closed-form balance limits.

Library layout:

- :mod:`pendular_lab.model` -- domain types and centroidal dynamics.
- :mod:`pendular_lab.forceqp` -- per-step cone-constrained force QP.
- :mod:`pendular_lab.analysis` -- moment-map SVD, geometric floor, kink,
  task prefactor, pointwise certificate.
- :mod:`pendular_lab.ocp` -- direct-transcription trajectory solver.
- :mod:`pendular_lab.harness` -- sweep battery with CSV/SVG artifacts.
- :mod:`pendular_lab.cli` -- the ``pendular-lab`` command.
"""

from .model import (
    CentroidalState,
    Contact,
    NetWrench,
    StanceConfig,
    cone_half_angle,
    dcm,
    dcm_rate,
    excitation_baseline,
    friction_contains,
    net_wrench,
    pendular_force,
    zmp,
)
from .forceqp import ForceSolution, QpWeights, SolverOptions, solve, solve_unconstrained
from .analysis import (
    FloorReport,
    KinkReport,
    MomentJacobian,
    geometric_floor,
    kink_analysis,
    moment_jacobian,
    rect_stance_sigmas,
    scaling_constant,
    task_prefactor,
)
from .ocp import BoundaryState, OcpOptions, OcpProblem, OcpSolution, metrics, solve_ocp

__version__ = "0.1.0"

__all__ = [
    "CentroidalState",
    "Contact",
    "NetWrench",
    "StanceConfig",
    "cone_half_angle",
    "dcm",
    "dcm_rate",
    "excitation_baseline",
    "friction_contains",
    "net_wrench",
    "pendular_force",
    "zmp",
    "ForceSolution",
    "QpWeights",
    "SolverOptions",
    "solve",
    "solve_unconstrained",
    "FloorReport",
    "KinkReport",
    "MomentJacobian",
    "geometric_floor",
    "kink_analysis",
    "moment_jacobian",
    "rect_stance_sigmas",
    "scaling_constant",
    "task_prefactor",
    "BoundaryState",
    "OcpOptions",
    "OcpProblem",
    "OcpSolution",
    "metrics",
    "solve_ocp",
    "__version__",
]
