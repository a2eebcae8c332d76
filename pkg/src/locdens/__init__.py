"""Local log-density estimation with finite-sample certificates."""

from .errors import LocdensError
from .kernels import BACKEND
from .model import BasisSpec, KernelSpec, ModelSpec, make_basis, make_model
from .likelihood import Sample, fit_mle, log_likelihood
from .population import DensityOracle, make_oracle, summarize
from .certificates import Certificate, check_conditions

__all__ = [
    "BACKEND", "BasisSpec", "Certificate", "DensityOracle", "KernelSpec", "LocdensError",
    "ModelSpec", "Sample", "check_conditions", "fit_mle", "log_likelihood", "make_basis",
    "make_model", "make_oracle", "summarize",
]

__version__ = "0.1.0"
