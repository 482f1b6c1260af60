"""Characteristic-parallelogram identity for semilinear hyperbolic equations

    a u_11 + 2b u_12 + c u_22 = f(x, u, u_1, u_2)

in two variables: validation of characteristic pairs, the identity integrand,
vertex sums over curvilinear parallelograms, and solvers built on them.
"""

from .characteristics import (
    CharacteristicPair,
    GridCharacteristicPair,
    InverseMapError,
    TraceError,
    invert,
    trace_characteristics,
    validate_characteristics,
)
from .exprlang import Expr, ParseError, parse, simplify, to_source
from .kernel import DegenerateKernelError, KernelContext, A_gamma_at, K_tilde_at, beta_at
from .parallelogram import (
    CharRectangle,
    IdentityReport,
    ProbeReport,
    SolutionField,
    converse_probe,
    identity_residual,
    vertices,
)
from .problem import DomainSpec, EquationSpec, NonHyperbolicError, check_hyperbolicity, factor_characteristic_ode
from .quadrature import DEFAULT_RULE, QuadratureRule, gauss_legendre, integrate1d, integrate2d

__version__ = "0.1.0"

__all__ = [
    "A_gamma_at",
    "CharRectangle",
    "CharacteristicPair",
    "DEFAULT_RULE",
    "DegenerateKernelError",
    "DomainSpec",
    "EquationSpec",
    "Expr",
    "GridCharacteristicPair",
    "IdentityReport",
    "InverseMapError",
    "K_tilde_at",
    "KernelContext",
    "NonHyperbolicError",
    "ParseError",
    "ProbeReport",
    "QuadratureRule",
    "SolutionField",
    "TraceError",
    "beta_at",
    "check_hyperbolicity",
    "converse_probe",
    "factor_characteristic_ode",
    "gauss_legendre",
    "identity_residual",
    "integrate1d",
    "integrate2d",
    "invert",
    "parse",
    "simplify",
    "to_source",
    "trace_characteristics",
    "validate_characteristics",
    "vertices",
]
