"""Exact algebra on bosonic ladder-operator words and classical phase-space polynomials.

A generator is a pair ``(kind, mode)`` with ``kind = 0`` for a creation
operator ``a_j^+`` and ``kind = 1`` for an annihilation operator ``a_j``
(modes are 1-based).  With that encoding, sorting a word gives its normal
product directly: creation block first, each block ordered by mode.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping
from functools import lru_cache

import numpy as np

from .scalar import ONE, ZERO, ExactScalar, format_scalar

CREATE = 0
ANNIHILATE = 1

Generator = tuple  # (kind, mode)
Word = tuple  # tuple of generators, left to right = operator product order


def create(mode: int) -> Generator:
    return (CREATE, mode)


def annihilate(mode: int) -> Generator:
    return (ANNIHILATE, mode)


def is_normal_word(word: Word) -> bool:
    return all(word[i] <= word[i + 1] for i in range(len(word) - 1))


def _word_key(word: Word):
    return (len(word), word)


def _merge(terms: dict, word, coef) -> None:
    c = terms.get(word)
    c = coef if c is None else c + coef
    if c.is_zero():
        terms.pop(word, None)
    else:
        terms[word] = c


class OperatorPolynomial:
    """Linear combination of ladder-operator words with exact coefficients.

    Words are stored as given; use :func:`rewrite_to_normal_form` or
    :func:`normal_product` to obtain the canonical normal-ordered form.
    """

    __slots__ = ("modes", "terms")

    def __init__(self, modes: int, terms: Mapping | Iterable = ()):
        self.modes = int(modes)
        merged: dict = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for word, coef in items:
            word = tuple(word)
            for kind, mode in word:
                if not 1 <= mode <= self.modes:
                    raise ValueError(f"generator mode {mode} outside 1..{self.modes}")
            _merge(merged, word, ExactScalar.coerce(coef))
        self.terms = merged

    # -- constructors ---------------------------------------------------
    @classmethod
    def identity(cls, modes: int, coef=ONE) -> "OperatorPolynomial":
        return cls(modes, {(): coef})

    @classmethod
    def zero(cls, modes: int) -> "OperatorPolynomial":
        return cls(modes)

    @classmethod
    def generator(cls, modes: int, kind: int, mode: int) -> "OperatorPolynomial":
        return cls(modes, {((kind, mode),): ONE})

    # -- queries --------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_normal(self) -> bool:
        return all(is_normal_word(w) for w in self.terms)

    def degree(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: _word_key(kv[0]))

    # -- arithmetic -----------------------------------------------------
    def _check(self, other: "OperatorPolynomial") -> None:
        if other.modes != self.modes:
            raise ValueError(f"mode count mismatch: {self.modes} vs {other.modes}")

    def __add__(self, other):
        if not isinstance(other, OperatorPolynomial):
            other = OperatorPolynomial.identity(self.modes, ExactScalar.coerce(other))
        self._check(other)
        out = dict(self.terms)
        for w, c in other.terms.items():
            _merge(out, w, c)
        return OperatorPolynomial(self.modes, out)

    __radd__ = __add__

    def __neg__(self):
        return OperatorPolynomial(self.modes, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, OperatorPolynomial):
            self._check(other)
            out: dict = {}
            for w1, c1 in self.terms.items():
                for w2, c2 in other.terms.items():
                    _merge(out, w1 + w2, c1 * c2)
            return OperatorPolynomial(self.modes, out)
        s = ExactScalar.coerce(other)
        if s.is_zero():
            return OperatorPolynomial(self.modes)
        return OperatorPolynomial(self.modes, {w: c * s for w, c in self.terms.items()})

    def __rmul__(self, other):
        s = ExactScalar.coerce(other)
        return self * s

    def __truediv__(self, other):
        return self * ExactScalar.coerce(other).inverse()

    def __pow__(self, n: int):
        result = OperatorPolynomial.identity(self.modes)
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other):
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        return self.modes == other.modes and self.terms == other.terms

    def __hash__(self):
        return hash((self.modes, frozenset(self.terms.items())))

    def adjoint(self) -> "OperatorPolynomial":
        """Reverse each word, flip daggers, conjugate coefficients."""
        out = {}
        for w, c in self.terms.items():
            out[tuple((1 - k, m) for k, m in reversed(w))] = c.conjugate()
        return OperatorPolynomial(self.modes, out)

    def __repr__(self) -> str:
        from .parsing import format_operator

        return f"OperatorPolynomial({format_operator(self)!r})"


# -- normal ordering ----------------------------------------------------


def normal_product(p: OperatorPolynomial) -> OperatorPolynomial:
    """Reorder each word into creation-left form, with no commutator corrections."""
    out: dict = {}
    for w, c in p.terms.items():
        _merge(out, tuple(sorted(w)), c)
    return OperatorPolynomial(p.modes, out)


@lru_cache(maxsize=None)
def _normal_form_word(word: Word, strategy: str) -> tuple:
    disorder = [i for i in range(len(word) - 1) if word[i] > word[i + 1]]
    if not disorder:
        return ((word, 1),)
    i = disorder[0] if strategy == "leftmost" else disorder[-1]
    x, y = word[i], word[i + 1]
    swapped = word[:i] + (y, x) + word[i + 2:]
    acc: dict = {}
    for w, c in _normal_form_word(swapped, strategy):
        acc[w] = acc.get(w, 0) + c
    if x[0] == ANNIHILATE and y[0] == CREATE and x[1] == y[1]:
        # a_j a_j^+ = a_j^+ a_j + 1
        for w, c in _normal_form_word(word[:i] + word[i + 2:], strategy):
            acc[w] = acc.get(w, 0) + c
    return tuple((w, c) for w, c in acc.items() if c != 0)


def rewrite_to_normal_form(p: OperatorPolynomial, strategy: str = "leftmost") -> OperatorPolynomial:
    """Return an equal operator in normal form, using [a_i, a_j^+] = delta_ij.

    ``strategy`` picks which out-of-order adjacent pair is resolved first
    (``"leftmost"`` or ``"rightmost"``); the result does not depend on it.
    """
    if strategy not in ("leftmost", "rightmost"):
        raise ValueError(f"unknown strategy {strategy!r}")
    out: dict = {}
    for w, c in p.terms.items():
        for nw, k in _normal_form_word(w, strategy):
            _merge(out, nw, c * k)
    return OperatorPolynomial(p.modes, out)


def symbolic_commutator(a: OperatorPolynomial, b: OperatorPolynomial) -> OperatorPolynomial:
    if a.modes != b.modes:
        raise ValueError(f"mode count mismatch: {a.modes} vs {b.modes}")
    return rewrite_to_normal_form(a * b - b * a)


# -- classical polynomials ------------------------------------------------

_CHART_NAMES = {"phipi": ("phi", "pi"), "yz": ("y", "z")}


class PhiPiPolynomial:
    """Commutative polynomial in ``2N`` variables with exact coefficients.

    Exponent vectors are ordered ``(phi_1..phi_N, pi_1..pi_N)``.  The same
    container holds the complex chart ``(y_1..y_N, z_1..z_N)`` when
    ``chart == "yz"``; there ``y`` pairs with creation operators and ``z``
    with annihilation operators.
    """

    __slots__ = ("modes", "terms", "chart")

    def __init__(self, modes: int, terms: Mapping | Iterable = (), chart: str = "phipi"):
        if chart not in _CHART_NAMES:
            raise ValueError(f"unknown chart {chart!r}")
        self.modes = int(modes)
        self.chart = chart
        merged: dict = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for exps, coef in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != 2 * self.modes or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent vector {exps} for {self.modes} modes")
            _merge(merged, exps, ExactScalar.coerce(coef))
        self.terms = merged

    # -- constructors ---------------------------------------------------
    @classmethod
    def constant(cls, modes: int, value=ONE, chart: str = "phipi") -> "PhiPiPolynomial":
        return cls(modes, {(0,) * (2 * modes): value}, chart)

    @classmethod
    def variable(cls, modes: int, name: str, mode: int, chart: str | None = None) -> "PhiPiPolynomial":
        slot, chart = _variable_slot(modes, name, mode, chart)
        exps = [0] * (2 * modes)
        exps[slot] = 1
        return cls(modes, {tuple(exps): ONE}, chart)

    @classmethod
    def harmonic(cls, modes: int) -> "PhiPiPolynomial":
        """``sum_j (phi_j^2 + pi_j^2)/2``."""
        half = ExactScalar(1, 0) / 2
        terms = {}
        for j in range(2 * modes):
            e = [0] * (2 * modes)
            e[j] = 2
            terms[tuple(e)] = half
        return cls(modes, terms)

    # -- queries --------------------------------------------------------
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def is_real(self) -> bool:
        return all(c.is_real() for c in self.terms.values())

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), tuple(-e for e in kv[0])))

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Exponent matrix ``(T, 2N)`` and complex coefficient vector ``(T,)``."""
        items = self.sorted_terms()
        exps = np.array([e for e, _ in items], dtype=np.int64).reshape(len(items), 2 * self.modes)
        coefs = np.array([complex(c) for _, c in items], dtype=np.complex128)
        return exps, coefs

    def evaluate(self, phi, pi) -> complex:
        """Evaluate at one point; ``phi``/``pi`` are the first/second variable blocks."""
        x = np.concatenate([np.asarray(phi, dtype=complex).ravel(), np.asarray(pi, dtype=complex).ravel()])
        if x.size != 2 * self.modes:
            raise ValueError(f"expected {self.modes} values per block, got {x.size // 2}")
        total = 0j
        for exps, c in self.sorted_terms():
            total += complex(c) * np.prod(x ** np.array(exps))
        return complex(total)

    # -- arithmetic -----------------------------------------------------
    def _check(self, other: "PhiPiPolynomial") -> None:
        if other.modes != self.modes or other.chart != self.chart:
            raise ValueError("polynomials live on different variable sets")

    def __add__(self, other):
        if not isinstance(other, PhiPiPolynomial):
            other = PhiPiPolynomial.constant(self.modes, ExactScalar.coerce(other), self.chart)
        self._check(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            _merge(out, e, c)
        return PhiPiPolynomial(self.modes, out, self.chart)

    __radd__ = __add__

    def __neg__(self):
        return PhiPiPolynomial(self.modes, {e: -c for e, c in self.terms.items()}, self.chart)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PhiPiPolynomial):
            self._check(other)
            out: dict = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    _merge(out, tuple(a + b for a, b in zip(e1, e2)), c1 * c2)
            return PhiPiPolynomial(self.modes, out, self.chart)
        s = ExactScalar.coerce(other)
        if s.is_zero():
            return PhiPiPolynomial(self.modes, (), self.chart)
        return PhiPiPolynomial(self.modes, {e: c * s for e, c in self.terms.items()}, self.chart)

    def __rmul__(self, other):
        return self * ExactScalar.coerce(other)

    def __truediv__(self, other):
        return self * ExactScalar.coerce(other).inverse()

    def __pow__(self, n: int):
        result = PhiPiPolynomial.constant(self.modes, ONE, self.chart)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, PhiPiPolynomial):
            return NotImplemented
        return (self.modes, self.chart, self.terms) == (other.modes, other.chart, other.terms)

    def __hash__(self):
        return hash((self.modes, self.chart, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        from .parsing import format_phipi

        return f"PhiPiPolynomial({format_phipi(self)!r})"


def _variable_slot(modes: int, name: str, mode: int, chart: str | None = None) -> tuple[int, str]:
    for ch, (first, second) in _CHART_NAMES.items():
        if name in (first, second):
            if chart is not None and chart != ch:
                raise ValueError(f"variable {name} does not belong to chart {chart!r}")
            if not 1 <= mode <= modes:
                raise ValueError(f"variable {name}[{mode}] outside 1..{modes}")
            return (mode - 1 if name == first else modes + mode - 1), ch
    raise ValueError(f"unknown variable {name!r}")


def partial_derivative(g: PhiPiPolynomial, name: str, mode: int) -> PhiPiPolynomial:
    """Formal partial derivative with respect to ``name[mode]``."""
    slot, chart = _variable_slot(g.modes, name, mode)
    if chart != g.chart:
        raise ValueError(f"variable {name} not in chart {g.chart!r}")
    out: dict = {}
    for exps, c in g.terms.items():
        k = exps[slot]
        if k == 0:
            continue
        e = list(exps)
        e[slot] = k - 1
        _merge(out, tuple(e), c * k)
    return PhiPiPolynomial(g.modes, out, g.chart)


def _linear_sub(g: PhiPiPolynomial, images: list, chart: str) -> PhiPiPolynomial:
    """Substitute each variable slot by a polynomial from ``images``."""
    out = PhiPiPolynomial(g.modes, (), chart)
    cache: dict = {}
    for exps, c in g.terms.items():
        term = PhiPiPolynomial.constant(g.modes, c, chart)
        for slot, k in enumerate(exps):
            if k:
                key = (slot, k)
                if key not in cache:
                    cache[key] = images[slot] ** k
                term = term * cache[key]
        out = out + term
    return out


def to_yz(g: PhiPiPolynomial) -> PhiPiPolynomial:
    """Change of variables ``phi = (z + y)/sqrt2``, ``pi = (z - y)/(i sqrt2)``."""
    if g.chart == "yz":
        return g
    n = g.modes
    r = ExactScalar.inv_sqrt2()
    images = []
    for j in range(1, n + 1):
        y = PhiPiPolynomial.variable(n, "y", j)
        z = PhiPiPolynomial.variable(n, "z", j)
        images.append((z + y) * r)
    for j in range(1, n + 1):
        y = PhiPiPolynomial.variable(n, "y", j)
        z = PhiPiPolynomial.variable(n, "z", j)
        images.append((z - y) * (r / ExactScalar.imag_unit()))
    return _linear_sub(g, images, "yz")


def from_yz(f: PhiPiPolynomial) -> PhiPiPolynomial:
    """Inverse chart: ``y = (phi - i pi)/sqrt2``, ``z = (phi + i pi)/sqrt2``."""
    if f.chart == "phipi":
        return f
    n = f.modes
    r = ExactScalar.inv_sqrt2()
    i = ExactScalar.imag_unit()
    images = [None] * (2 * n)
    for j in range(1, n + 1):
        phi = PhiPiPolynomial.variable(n, "phi", j)
        pi = PhiPiPolynomial.variable(n, "pi", j)
        images[j - 1] = (phi - pi * i) * r
        images[n + j - 1] = (phi + pi * i) * r
    return _linear_sub(f, images, "phipi")


def yz_to_operator(f: PhiPiPolynomial) -> OperatorPolynomial:
    """Normal-ordered operator ``f_n(a^+, a)``: each ``y^i z^j`` becomes ``(a^+)^i a^j``."""
    if f.chart != "yz":
        raise ValueError("expected a polynomial in the (y, z) chart")
    n = f.modes
    out = {}
    for exps, c in f.terms.items():
        word = []
        for j in range(n):
            word.extend([(CREATE, j + 1)] * exps[j])
        for j in range(n):
            word.extend([(ANNIHILATE, j + 1)] * exps[n + j])
        out[tuple(word)] = c
    return OperatorPolynomial(n, out)


def operator_to_yz(p: OperatorPolynomial) -> PhiPiPolynomial:
    """Inverse of :func:`yz_to_operator` for normal-ordered input."""
    if not p.is_normal():
        raise ValueError("operator is not in normal form")
    n = p.modes
    out = {}
    for w, c in p.terms.items():
        exps = [0] * (2 * n)
        for kind, mode in w:
            exps[(mode - 1) if kind == CREATE else (n + mode - 1)] += 1
        out[tuple(exps)] = c
    return PhiPiPolynomial(n, out, "yz")


def substitute_normal(g: PhiPiPolynomial) -> OperatorPolynomial:
    """Normal-form operator ``g_n(Phi, Pi)`` of a classical polynomial."""
    return yz_to_operator(to_yz(g))


def field_phi_symbolic(j: int, modes: int) -> OperatorPolynomial:
    """``Phi_j = (a_j + a_j^+)/sqrt2``."""
    return substitute_normal(PhiPiPolynomial.variable(modes, "phi", j))


def field_pi_symbolic(j: int, modes: int) -> OperatorPolynomial:
    """``Pi_j = (a_j - a_j^+)/(i sqrt2)``."""
    return substitute_normal(PhiPiPolynomial.variable(modes, "pi", j))


def _distinct_permutations(items: list) -> list:
    return sorted(set(itertools.permutations(items)))


def substitute_symmetric(g: PhiPiPolynomial) -> OperatorPolynomial:
    """Weyl-symmetric operator for ``g``: each monomial averaged over all factor orderings.

    Returned in normal form (commutator corrections included).
    """
    if g.chart != "phipi":
        g = from_yz(g)
    n = g.modes
    fields = [field_phi_symbolic(j, n) for j in range(1, n + 1)] + [
        field_pi_symbolic(j, n) for j in range(1, n + 1)
    ]
    total = OperatorPolynomial(n)
    for exps, c in g.terms.items():
        factors = [slot for slot, k in enumerate(exps) for _ in range(k)]
        orders = _distinct_permutations(factors)
        acc = OperatorPolynomial(n)
        for order in orders:
            prod = OperatorPolynomial.identity(n)
            for slot in order:
                prod = rewrite_to_normal_form(prod * fields[slot])
            acc = acc + prod
        total = total + acc * (c / len(orders))
    return rewrite_to_normal_form(total)


def random_phipi(rng: np.random.Generator, modes: int, max_degree: int, n_terms: int,
                 chart: str = "phipi", complex_coefs: bool = False) -> PhiPiPolynomial:
    """Random polynomial with small Gaussian-rational coefficients (test fixture helper)."""
    terms = {}
    for _ in range(n_terms):
        deg = int(rng.integers(0, max_degree + 1))
        exps = [0] * (2 * modes)
        for _ in range(deg):
            exps[int(rng.integers(0, 2 * modes))] += 1
        re = ExactScalar(int(rng.integers(-4, 5)), 0) / int(rng.integers(1, 4))
        im = ExactScalar(0, int(rng.integers(-4, 5))) / int(rng.integers(1, 4)) if complex_coefs else ZERO
        terms[tuple(exps)] = terms.get(tuple(exps), ZERO) + re + im
    return PhiPiPolynomial(modes, terms, chart)


def evaluate_matrix(p: OperatorPolynomial, basis, sparse: bool | None = None):
    """Numeric operator: generators replaced by truncated ladder matrices, words multiplied left to right."""
    from . import fock

    if p.modes != basis.modes:
        raise ValueError(f"polynomial has {p.modes} modes, basis has {basis.modes}")
    gens = {}
    total = fock.identity_matrix(basis, sparse=True) * 0
    ident = fock.identity_matrix(basis, sparse=True)
    for word, c in p.sorted_terms():
        m = ident
        for kind, mode in word:
            g = gens.get((kind, mode))
            if g is None:
                mk = fock.creation_matrix if kind == CREATE else fock.annihilation_matrix
                g = gens[(kind, mode)] = mk(mode, basis, sparse=True)
            m = m @ g
        total = total + complex(c) * m
    return fock._finish(total, basis, sparse)
