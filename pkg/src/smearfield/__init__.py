"""Smeared free scalar fields, Wick algebra and test-function regularised interactions.

Modules
-------
testfn
    Gaussian packets, lattice bumps, contracted envelopes and the scale functional.
freefield
    Mass-shell inner product, commutators and 1+1 Green functions.
wick
    Normal-ordered ladder polynomials and vacuum expectation values.
fock
    Truncated Fock-space matrices over a finite single-particle span.
interacting
    Smeared interaction operator, first-order interacting field and sweeps.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ContextMismatch,
    DegenerateError,
    GeometryError,
    ProjectionError,
    QuadratureMismatch,
    SmearfieldError,
)
from .freefield import FieldContext, MassShellQuadrature, inner_product, inner_product_closed  # noqa: E402
from .testfn import (  # noqa: E402
    BumpFunction,
    EnvelopeSpec,
    EnvelopeVariant,
    GaussianPacket,
    GaussianSum,
    Grid,
    ScaleFunctionalSpec,
    contract_envelope,
    scale_functional,
    smooth_bump,
)

__all__ = [
    "BumpFunction",
    "ConfigError",
    "ContextMismatch",
    "DegenerateError",
    "EnvelopeSpec",
    "EnvelopeVariant",
    "FieldContext",
    "GaussianPacket",
    "GaussianSum",
    "GeometryError",
    "Grid",
    "MassShellQuadrature",
    "ProjectionError",
    "QuadratureMismatch",
    "ScaleFunctionalSpec",
    "SmearfieldError",
    "contract_envelope",
    "inner_product",
    "inner_product_closed",
    "scale_functional",
    "smooth_bump",
]
