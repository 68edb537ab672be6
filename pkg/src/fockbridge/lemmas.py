"""Commutator / derivative identities, checked symbolically and as matrices.

Each identity is an instance ``[X, F] = R`` built from a random polynomial.
Symbolically both sides are rewritten to normal form and compared coefficient
by coefficient (exact arithmetic).  As matrices the commutator of the
truncated matrices is compared with ``R`` on kets far enough from the cutoff
that no word in either side can reach it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fock
from .fock import FockBasis
from .scalar import ExactScalar
from .symbolic import (
    ANNIHILATE,
    CREATE,
    OperatorPolynomial,
    PhiPiPolynomial,
    evaluate_matrix,
    field_phi_symbolic,
    field_pi_symbolic,
    partial_derivative,
    random_phipi,
    rewrite_to_normal_form,
    substitute_normal,
    yz_to_operator,
)

IDENTITIES = (
    "creation-derivative",
    "annihilation-derivative",
    "normal-creation-derivative",
    "normal-annihilation-derivative",
    "field-power",
    "phi-commutator",
    "pi-commutator",
)

_I = ExactScalar.imag_unit()


@dataclass(frozen=True)
class IdentityInstance:
    name: str
    x: OperatorPolynomial
    f: OperatorPolynomial
    rhs: OperatorPolynomial

    @property
    def margin(self) -> int:
        """Longest word appearing on either side, plus one."""
        deg = max(self.x.degree() + self.f.degree(), self.rhs.degree())
        return deg + 1


def _keep_block(f: PhiPiPolynomial, block: str) -> PhiPiPolynomial:
    """Drop the other block's exponents (``y``-only or ``z``-only polynomial)."""
    n = f.modes
    out: dict = {}
    for exps, c in f.terms.items():
        e = list(exps)
        if block == "y":
            e[n:] = [0] * n
        else:
            e[:n] = [0] * n
        out[tuple(e)] = out.get(tuple(e), ExactScalar.coerce(0)) + c
    return PhiPiPolynomial(n, out, "yz")


def make_instance(name: str, rng: np.random.Generator, modes: int, max_degree: int = 4,
                  n_terms: int = 4) -> IdentityInstance:
    j = int(rng.integers(1, modes + 1))
    a = OperatorPolynomial.generator(modes, ANNIHILATE, j)
    ad = OperatorPolynomial.generator(modes, CREATE, j)
    if name in ("creation-derivative", "annihilation-derivative",
                "normal-creation-derivative", "normal-annihilation-derivative"):
        f = random_phipi(rng, modes, max_degree, n_terms, chart="yz", complex_coefs=True)
        if name == "creation-derivative":
            f = _keep_block(f, "y")
        elif name == "annihilation-derivative":
            f = _keep_block(f, "z")
        if name in ("creation-derivative", "normal-creation-derivative"):
            return IdentityInstance(name, a, yz_to_operator(f), yz_to_operator(partial_derivative(f, "y", j)))
        return IdentityInstance(name, ad, yz_to_operator(f), -yz_to_operator(partial_derivative(f, "z", j)))
    if name == "field-power":
        k = int(rng.integers(1, modes + 1))
        m = int(rng.integers(1, max_degree + 1))
        pk = field_pi_symbolic(k, modes)
        rhs = (pk ** (m - 1)) * (_I * m) if j == k else OperatorPolynomial.zero(modes)
        return IdentityInstance(name, field_phi_symbolic(j, modes), pk ** m, rhs)
    if name in ("phi-commutator", "pi-commutator"):
        g = random_phipi(rng, modes, max_degree, n_terms, complex_coefs=True)
        if name == "phi-commutator":
            return IdentityInstance(name, field_phi_symbolic(j, modes), substitute_normal(g),
                                    substitute_normal(partial_derivative(g, "pi", j)) * _I)
        return IdentityInstance(name, field_pi_symbolic(j, modes), substitute_normal(g),
                                substitute_normal(partial_derivative(g, "phi", j)) * (-_I))
    raise ValueError(f"unknown identity {name!r}; choose from {IDENTITIES}")


def symbolic_holds(inst: IdentityInstance) -> bool:
    lhs = rewrite_to_normal_form(inst.x * inst.f - inst.f * inst.x)
    return lhs == rewrite_to_normal_form(inst.rhs)


def matrix_gap(inst: IdentityInstance, basis: FockBasis) -> float:
    """Largest entry of ``[X, F] - R`` on kets at least ``margin`` below the cutoff.

    Returns ``nan`` when the cutoff leaves no such kets.
    """
    inner = basis.interior(inst.margin)
    if inner.size == 0:
        return float("nan")
    x = fock.to_dense(evaluate_matrix(inst.x, basis))
    f = fock.to_dense(evaluate_matrix(inst.f, basis))
    r = fock.to_dense(evaluate_matrix(inst.rhs, basis))
    diff = fock.restrict(x @ f - f @ x - r, inner)
    return float(np.max(np.abs(diff), initial=0.0))


def truncation_defect(cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """Single-mode ``[a, a^+]`` and the predicted ``I - (M+1)|M><M|``, both as integer arrays.

    Squared ladder entries are integers, so rounding the float product is exact
    at any reasonable cutoff.
    """
    b = FockBasis(1, cutoff)
    a = fock.to_dense(fock.annihilation_matrix(1, b)).real
    comm = np.rint(a @ a.T - a.T @ a).astype(np.int64)
    expected = np.eye(cutoff + 1, dtype=np.int64)
    expected[cutoff, cutoff] -= cutoff + 1
    return comm, expected
