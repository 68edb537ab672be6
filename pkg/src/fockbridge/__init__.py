"""Classical field ensembles as density matrices over a truncated bosonic Fock
space, with exact normal-ordering algebra on the operator side."""

__version__ = "0.1.0"

from .dynamics import ClassicalState, DistributionSpec, Ensemble, HamiltonianSpec
from .fock import FockBasis
from .parsing import parse_operator, parse_phipi, reduce_text
from .reports import EquivalenceReport
from .symbolic import OperatorPolynomial, PhiPiPolynomial

__all__ = [
    "ClassicalState", "DistributionSpec", "Ensemble", "EquivalenceReport", "FockBasis",
    "HamiltonianSpec", "OperatorPolynomial", "PhiPiPolynomial", "__version__",
    "parse_operator", "parse_phipi", "reduce_text",
]
