"""Overdamped flow of inextensible strings and triods under gravity.

The inextensibility constraint is relaxed by a smooth invertible
tangent/stress map with strength ``eps``; the resulting gradient flow is
integrated by minimizing movements on a uniform arclength grid, and the
tension, junction balance and energy dissipation are checked along the way.
"""

from .diagnostics import (
    CertificateReport,
    EdgeFields,
    certificate_report,
    constraint_report,
    dissipation_inequality_report,
    edge_fields,
    energy_balance_report,
    junction_report,
)
from .energy import (
    EnergyBreakdown,
    GradientField,
    constraint_operator_pairing,
    energy_gradient,
    total_energy,
)
from .errors import *  # noqa: F401,F403
from .evolve import StepParams, StepReport, Trajectory, implicit_step, run_flow, steady_detect
from .experiments import (
    RunConfig,
    catenary_oracle,
    epsilon_sweep,
    export_series,
    format_config,
    parse_config,
    reference_triod_pins,
)
from .network import (
    CircularArc,
    ExplicitPolyline,
    Grid,
    NetworkState,
    Topology,
    build_initial,
    edge_tangents,
    validate_state,
)
from .regularization import (
    RegularizationParams,
    f_eps,
    g_eps,
    grad_g_eps,
    q_eps,
    tension_of_tangent,
)
from .tension_bvp import TensionSolution, projected_gravity, solve_tension_bvp

__version__ = "0.1.0"
