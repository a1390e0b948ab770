"""Ensemble solvers for two-domain coupled heat equations with random
interface friction and random diffusion coefficients.

The package builds structured conforming meshes of two unit squares glued
along an interface, assembles P1 finite element operators, and advances
ensembles of samples with time steppers that share one factorized
coefficient matrix per subdomain across many right-hand sides.
"""

from .mesh import Mesh, build_two_domain_mesh, dof_maps, dump_mesh
from .assembly import (
    CoefficientPositivityError,
    EmptyInterfaceError,
    QuadratureRule,
    SubdomainSpace,
    apply_dirichlet,
    assemble_interface_operators,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    error_h1,
    error_l2,
    norm_interface,
    norm_l2,
    norm_l2_pair,
    seminorm_h1,
    space,
)
from .sparse import (
    CgResult,
    NotSpdError,
    SpdFactorization,
    add_scaled,
    cg_solve,
    csr_from_triplets,
    factorize_spd,
    matvec,
    mm_read,
    mm_write,
    solve,
)
from .sampling import (
    AffineInOmega,
    Constant,
    Explicit,
    SampleSet,
    SampleSpec,
    SinusoidalInTime,
    ThetaBounds,
    Uniform,
    case1_samples,
    case2_samples,
    draw_samples,
    estimate_theta_bounds,
    kappa_max,
    nu_bar,
    nu_bar_time_avg,
    write_sample_manifest,
)
from .manufactured import (
    ManufacturedSolution,
    UnsupportedFamilyError,
    attach_manufactured_forcing,
    derive_forcing,
    interface_residual,
    manufactured_family,
    pde_residual,
)
from .stepping import (
    EnsembleState,
    ProblemSpec,
    RunDiagnostics,
    StepperConfig,
    assemble_system_matrix,
    build_system_factorization,
    check_stability_bound,
    energy,
    init_state,
    make_stepper,
    monte_carlo_mean,
    run,
)
from .experiments import (
    ConvergenceResult,
    RunConfig,
    StabilityResult,
    TimingResult,
    compute_rates,
    run_convergence_study,
    run_stability_study,
    run_timing_study,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
