"""Online kernel least squares driven by stationary mixing Markov chains."""
from .chains import ChainConfig, chain_stats, label_stream, sample_chain
from .copulas import (
    Copula,
    GridCopula,
    MixingProfile,
    beta_coefficient,
    conditional_cdf,
    copula_density,
    darsow_product,
    fit_mixing_profile,
    iterate_copula,
    phi_coefficient,
)
from .kernels import Kernel, RkhsFunction, compact, eval_kernel, evaluate, k_distance, k_norm, kernel_sup_bound, rho_norm, scaled_update
from .quadrature import Quadrature, gauss_legendre

__version__ = "0.1.0"
