"""Text grammar for operator and phase-space polynomials.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" INT)?
    atom   := NUMBER | "i" | "sqrt2" | NAME "[" INT "]" | "(" expr ")"

``NAME`` is one of ``a``, ``ad`` (ladder generators), ``Phi``, ``Pi`` (field
operators, expanded into ladder generators), ``phi``, ``pi`` (classical
variables) or ``y``, ``z`` (complex chart).  A ``NUMBER`` is an integer or
decimal, optionally followed directly by ``i`` to make it imaginary.  Real
fractions are ordinary exact division (``pi[1]^2/2``).  The one fraction
literal is ``p/qi``, which means ``(p/q)*i`` so that printed coefficients such
as ``(1/2+3/4i)`` read back unchanged.  Operator and classical symbols cannot
be mixed in one expression.

Canonical output of :func:`format_operator` looks like
``(1+0i)*ad[1]*ad[2]*a[1]*a[2] + (1/2+0i)*sqrt2*a[1]`` and re-parses to the
same polynomial.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .scalar import ExactScalar, format_scalar
from .symbolic import (
    ANNIHILATE,
    CREATE,
    OperatorPolynomial,
    PhiPiPolynomial,
    field_phi_symbolic,
    field_pi_symbolic,
    normal_product,
    rewrite_to_normal_form,
)

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+/\d+i|(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?i?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()\[\]])"
    r")"
)

_OPERATOR_NAMES = {"a", "ad", "Phi", "Pi"}
_CLASSICAL_NAMES = {"phi", "pi", "y", "z"}


class ParseError(ValueError):
    """Raised for malformed polynomial text; ``position`` is a 0-based column."""

    def __init__(self, message: str, text: str, position: int):
        self.message = message
        self.text = text
        self.position = position
        caret = " " * position + "^"
        super().__init__(f"{message} at position {position}\n  {text}\n  {caret}")


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _number(literal: str) -> ExactScalar | None:
    imaginary = literal.endswith("i")
    if imaginary:
        literal = literal[:-1]
    try:
        value = Fraction(literal)
    except ZeroDivisionError:
        return None
    return ExactScalar(0, value) if imaginary else ExactScalar(value)


class _Parser:
    def __init__(self, text: str, modes: int | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.modes = modes
        self.kind = None  # "operator" | "classical"
        self.chart = None
        self.max_mode = 0

    # -- token helpers --------------------------------------------------
    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.advance()
        if tok[1] != value:
            found = tok[1] or "end of input"
            raise ParseError(f"expected {value!r}, found {found!r}", self.text, tok[2])
        return tok

    # -- grammar ---------------------------------------------------------
    # The tree is evaluated only after parsing, once the mode count is known
    # (it defaults to the largest index seen).
    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", self.text, tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            tok = self.advance()
            rhs = self.unary()
            node = ("mul" if tok[1] == "*" else ("div", tok[2]), node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok[1] in ("+", "-"):
            self.advance()
            inner = self.unary()
            return inner if tok[1] == "+" else ("neg", inner)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.advance()
            tok = self.advance()
            if tok[0] != "num" or not tok[1].isdigit():
                raise ParseError("exponent must be a nonnegative integer", self.text, tok[2])
            return ("pow", base, int(tok[1]))
        return base

    def atom(self):
        tok = self.advance()
        kind, value, pos = tok
        if kind == "num":
            c = _number(value)
            if c is None:
                raise ParseError("division by zero", self.text, pos)
            return ("const", c)
        if kind == "name":
            if value == "i":
                return ("const", ExactScalar.imag_unit())
            if value == "sqrt2":
                return ("const", ExactScalar.sqrt2())
            if value in _OPERATOR_NAMES or value in _CLASSICAL_NAMES:
                self._note_kind(value, pos)
                self.expect("[")
                idx = self.advance()
                if idx[0] != "num" or not idx[1].isdigit() or int(idx[1]) < 1:
                    raise ParseError("mode index must be a positive integer", self.text, idx[2])
                self.expect("]")
                mode = int(idx[1])
                if self.modes is not None and mode > self.modes:
                    raise ParseError(f"mode {mode} exceeds declared mode count {self.modes}",
                                     self.text, idx[2])
                self.max_mode = max(self.max_mode, mode)
                return ("sym", value, mode)
            raise ParseError(f"unknown symbol {value!r}", self.text, pos)
        if value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = value or "end of input"
        raise ParseError(f"unexpected token {found!r}", self.text, pos)

    def _note_kind(self, name: str, pos: int):
        kind = "operator" if name in _OPERATOR_NAMES else "classical"
        if self.kind is None:
            self.kind = kind
        elif self.kind != kind:
            raise ParseError("cannot mix operator and classical symbols", self.text, pos)
        if kind == "classical":
            chart = "phipi" if name in ("phi", "pi") else "yz"
            if self.chart is None:
                self.chart = chart
            elif self.chart != chart:
                raise ParseError("cannot mix (phi, pi) and (y, z) variables", self.text, pos)

    # -- evaluation -------------------------------------------------------
    def build(self, node, modes: int):
        tag = node[0]
        if tag == "const":
            return node[1]
        if tag == "sym":
            _, name, mode = node
            if name == "a":
                return OperatorPolynomial.generator(modes, ANNIHILATE, mode)
            if name == "ad":
                return OperatorPolynomial.generator(modes, CREATE, mode)
            if name == "Phi":
                return field_phi_symbolic(mode, modes)
            if name == "Pi":
                return field_pi_symbolic(mode, modes)
            return PhiPiPolynomial.variable(modes, name, mode)
        if tag == "neg":
            return -self.build(node[1], modes)
        if tag == "pow":
            base = self.build(node[1], modes)
            return base ** node[2]
        lhs = self.build(node[1], modes)
        rhs = self.build(node[2], modes)
        if tag == "add":
            return lhs + rhs
        if tag == "sub":
            return lhs - rhs
        if tag == "mul":
            return lhs * rhs
        # division: only by scalars
        if not isinstance(rhs, ExactScalar):
            raise ParseError("can only divide by a scalar", self.text, tag[1])
        if rhs.is_zero():
            raise ParseError("division by zero", self.text, tag[1])
        return lhs / rhs


def _parse(text: str, modes: int | None, want: str):
    p = _Parser(text, modes)
    tree = p.parse()
    if p.kind is not None and p.kind != want:
        label = "operator" if want == "operator" else "classical"
        raise ParseError(f"expected a {label} polynomial", text, 0)
    n = modes if modes is not None else max(p.max_mode, 1)
    value = p.build(tree, n)
    if isinstance(value, ExactScalar):
        if want == "operator":
            return OperatorPolynomial.identity(n, value)
        return PhiPiPolynomial.constant(n, value, p.chart or "phipi")
    if want == "classical" and p.chart == "yz" and value.chart != "yz":
        value = PhiPiPolynomial(n, value.terms, "yz")
    return value


def parse_operator(text: str, modes: int | None = None) -> OperatorPolynomial:
    """Parse ladder-operator text into a (raw, not yet normal-ordered) polynomial."""
    return _parse(text, modes, "operator")


def parse_phipi(text: str, modes: int | None = None) -> PhiPiPolynomial:
    """Parse a classical polynomial in ``phi[j]``/``pi[j]`` (or ``y[j]``/``z[j]``)."""
    return _parse(text, modes, "classical")


def _gen_text(gen) -> str:
    kind, mode = gen
    return f"{'ad' if kind == CREATE else 'a'}[{mode}]"


def format_operator(p: OperatorPolynomial) -> str:
    """Serialize with terms ordered by word length, then word."""
    if p.is_zero():
        return "0"
    parts = []
    for word, coef in p.sorted_terms():
        pieces = [format_scalar(coef)] + [_gen_text(g) for g in word]
        parts.append("*".join(pieces))
    return " + ".join(parts)


def format_phipi(g: PhiPiPolynomial) -> str:
    if g.is_zero():
        return "0"
    first, second = ("phi", "pi") if g.chart == "phipi" else ("y", "z")
    n = g.modes
    parts = []
    for exps, coef in g.sorted_terms():
        pieces = [format_scalar(coef)]
        for slot, k in enumerate(exps):
            if not k:
                continue
            name = first if slot < n else second
            sym = f"{name}[{slot % n + 1}]"
            pieces.append(sym if k == 1 else f"{sym}^{k}")
        parts.append("*".join(pieces))
    return " + ".join(parts)


def reduce_text(text: str, modes: int | None = None) -> str:
    """Parse an operator expression and print its canonical normal form."""
    return format_operator(rewrite_to_normal_form(parse_operator(text, modes)))


def normal_product_text(text: str, modes: int | None = None) -> str:
    """Parse an operator expression and print its normal product (no commutator terms)."""
    return format_operator(normal_product(parse_operator(text, modes)))


__all__ = [
    "ParseError",
    "format_operator",
    "format_phipi",
    "normal_product_text",
    "parse_operator",
    "parse_phipi",
    "reduce_text",
]
