"""Gradient-flow solver for a quasi-linear bi-stable system with dynamic
boundary conditions, stepped as proximal implicit Euler on a smoothed
convex energy, plus an experiment harness for its qualitative guarantees."""

from .energy import (
    EnergyParams,
    ForcingField,
    SmoothPerturbation,
    energy_terms,
    euler_lagrange_residual,
    free_energy,
    grad_phi_regularized,
    is_feasible,
    phi_exact,
    phi_regularized,
)
from .errors import ConfigError, NonconvergenceError, SolverError
from .flow import FlowParams, StepRecord, proximal_step, resolvent, run_flow
from .meshes import (
    DiscMesh,
    IntervalMesh,
    build_mesh,
    bulk_gradient,
    h_inner,
    h_norm,
    laplace_beltrami,
    surface_gradient,
)
from .norms import SmoothedNorm, sgn_select
from .potentials import (
    CompatibilityConstants,
    ScalarConvexPotential,
    check_compatibility,
    indicator,
    potential_from_spec,
    quadratic,
    tabulated,
)

__all__ = [
    "CompatibilityConstants",
    "ConfigError",
    "DiscMesh",
    "EnergyParams",
    "FlowParams",
    "ForcingField",
    "IntervalMesh",
    "NonconvergenceError",
    "ScalarConvexPotential",
    "SmoothPerturbation",
    "SmoothedNorm",
    "SolverError",
    "StepRecord",
    "build_mesh",
    "bulk_gradient",
    "check_compatibility",
    "energy_terms",
    "euler_lagrange_residual",
    "free_energy",
    "grad_phi_regularized",
    "h_inner",
    "h_norm",
    "indicator",
    "is_feasible",
    "laplace_beltrami",
    "phi_exact",
    "phi_regularized",
    "potential_from_spec",
    "proximal_step",
    "quadratic",
    "resolvent",
    "run_flow",
    "sgn_select",
    "surface_gradient",
    "tabulated",
]
