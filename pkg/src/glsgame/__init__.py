"""Strategic data provision for GLS regression: equilibria via convex
potential minimization, optimal experimental design, and asymptotic-rate
verification at desk scale."""

from ._backend import BACKEND, compiled_available
from .model import (
    AttributeSpace,
    DesignMeasure,
    JointDistribution,
    PlayerPopulation,
    PrecisionProfile,
    ProvisionCost,
    Scalarization,
    build_attribute_space,
    build_joint_distribution,
    polynomial_design_space,
)
from .estimator import (
    GlsSimulation,
    InformationMatrix,
    ModelParameters,
    complete_info_potential,
    gls_cost,
    gls_cost_gradient,
    info_matrix,
    joint_info_matrix,
    ols_cost,
    potential,
    potential_gradient,
    simulate_gls,
    social_cost,
)
from .solver import (
    DesignResult,
    EquilibriumResult,
    SolverOptions,
    kkt_residual,
    minimize_complete_info,
    minimize_potential,
    minimize_social_cost,
    solve_optimal_design,
)
from .analysis import (
    AsymptoticBounds,
    DesignGap,
    EquivalenceReport,
    PoaReport,
    RateFit,
    asymptotic_bounds,
    degradation_ratio,
    design_equivalence_gap,
    equilibrium_design_measure,
    equivalence_check,
    poa_report,
    rate_fit,
    scaling_prediction,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
