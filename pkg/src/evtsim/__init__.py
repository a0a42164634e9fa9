"""Simulation and verification toolkit for functional extreme value processes.

Max-stable and generalized Pareto processes on a discretized [0,1] are
simulated exactly from generator processes; their functional norms and
distribution functions are estimated by Monte Carlo and checked against the
identities they must satisfy.
"""

from ._kernels import BACKEND
from .dnorm import (
    ProbabilityEstimate,
    TakahashiReport,
    dnorm_mc,
    fidi_dnorm,
    inf_functional,
    msp_cdf,
    takahashi_test,
)
from .generator import (
    CappedLogGaussianGenerator,
    ConstantGenerator,
    DNormEstimate,
    FiniteSpectralGenerator,
    GeneratorNotReadyError,
    PathSample,
    generator_constant,
    sample_path,
    sample_paths,
    shifted_ramp_generator,
    two_ramp_generator,
    validate_generator,
)
from .gridfun import (
    DEFAULT_GRID_SIZE,
    EFunction,
    Grid,
    constant_function,
    default_bank,
    load_bank,
    make_grid,
    save_bank,
    sup_norm,
)
from .simulate import (
    MarginParams,
    StoppingRule,
    apply_margins,
    general_msp_cdf,
    simulate_copula,
    simulate_copula_paths,
    simulate_gpp,
    simulate_gpp_paths,
    simulate_msp,
    simulate_msp_paths,
    standardize_function,
)

__version__ = "0.1.0"
