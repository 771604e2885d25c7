"""gaussconc: numerical study of variance-based Gaussian concentration.

For a smooth f of a standard Gaussian vector Y the classical one-sided
tail bound is exp(-x^2 / (2 K^2)) with K the Lipschitz constant; under a
sign condition on the derivatives it sharpens to exp(-x^2 / (2 Var f(Y))).
This package checks those hypotheses on user-supplied expressions,
estimates the interpolation kernel behind the proof, and verifies the
underlying integration-by-parts identities against independent oracles.
"""
from .autodiff import FiniteDifferenceReport, FunctionModel, finite_difference_check
from .backends import backend_name, compiled_available
from .config import EstimatorConfig
from .expressions import ExpressionTree, parse_expression

__version__ = "0.1.0"

__all__ = [
    "EstimatorConfig",
    "ExpressionTree",
    "FiniteDifferenceReport",
    "FunctionModel",
    "backend_name",
    "compiled_available",
    "finite_difference_check",
    "parse_expression",
    "__version__",
]
