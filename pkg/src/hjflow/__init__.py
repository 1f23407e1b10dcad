"""
hjflow
======

Hamilton-Jacobi treatment of constrained Hamiltonian systems: a small
expression engine, extended Hamiltonians and their integrability test,
multi-parameter RK4 integration, the charged particle in a plane wave,
and its light-cone quantum evolution.

Submodules
----------
expr       expression trees, derivatives, brackets, zero testing
engine     constrained systems and integrability
flow       total differential equations, path checks, Dirac reference
planewave  plane-wave model, closed-form oracles, Legendre check
quantum    split-step evolution, Klein-Gordon residual, sliced kernel
cli        the ``hjflow`` command
"""

__version__ = "0.1.0"

from . import expr
from .engine import (
    ABELIAN, NOT_INTEGRABLE, ON_SURFACE, ConstrainedSystem, IntegrabilityReport,
    build_extended_hamiltonians, classify, integrability_matrix, load_system,
    load_system_file, pfaffian_rhs,
)
from .flow import (
    ParameterPath, PhasePoint, TrajectoryRecord, dirac_reference, integrate, make_path,
    path_independence_check,
)
from .planewave import (
    ModelParams, PotentialSpec, cosine_params, free_particle_system, nonintegrable_fixture,
    plane_wave_system, quadrature_solution, verify_legendre,
)
from .quantum import (
    GridSpec, KernelMatrix, WaveGrid, apply_kernel, ehrenfest_compare, evolve_splitstep,
    init_gaussian, kg_residual, observables, sliced_kernel,
)

__all__ = [
    "__version__", "expr",
    "ABELIAN", "NOT_INTEGRABLE", "ON_SURFACE", "ConstrainedSystem", "IntegrabilityReport",
    "build_extended_hamiltonians", "classify", "integrability_matrix", "load_system",
    "load_system_file", "pfaffian_rhs",
    "ParameterPath", "PhasePoint", "TrajectoryRecord", "dirac_reference", "integrate",
    "make_path", "path_independence_check",
    "ModelParams", "PotentialSpec", "cosine_params", "free_particle_system",
    "nonintegrable_fixture", "plane_wave_system", "quadrature_solution", "verify_legendre",
    "GridSpec", "KernelMatrix", "WaveGrid", "apply_kernel", "ehrenfest_compare",
    "evolve_splitstep", "init_gaussian", "kg_residual", "observables", "sliced_kernel",
]
