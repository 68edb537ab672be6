import pytest

from fockbridge.parsing import (
    ParseError,
    format_operator,
    format_phipi,
    normal_product_text,
    parse_operator,
    parse_phipi,
    reduce_text,
)
from fockbridge.symbolic import PhiPiPolynomial


@pytest.mark.parametrize("text, expected", [
    ("a[1]*ad[1]", "(1+0i) + (1+0i)*ad[1]*a[1]"),
    ("a[1]*ad[1]^3 - ad[1]^3*a[1]", "(3+0i)*ad[1]*ad[1]"),
    ("Phi[1]", "(1/2+0i)*sqrt2*ad[1] + (1/2+0i)*sqrt2*a[1]"),
    ("a[2]*a[1]", "(1+0i)*a[1]*a[2]"),
    ("0*a[1]", "0"),
])
def test_reduce(text, expected):
    assert reduce_text(text) == expected


def test_normal_product_drops_commutator_terms():
    assert normal_product_text("a[1]*ad[1]") == "(1+0i)*ad[1]*a[1]"


def test_rational_and_imaginary_literals():
    p = parse_phipi("1/2*phi[1] + 3i*pi[1]^2")
    assert p.evaluate([2.0], [1.0]) == pytest.approx(1 + 3j)


def test_fraction_literal_binds_only_before_i():
    assert parse_phipi("3/4i").evaluate([0.0], [0.0]) == pytest.approx(0.75j)
    assert parse_phipi("pi[1]^2/2").evaluate([0.0], [3.0]) == pytest.approx(4.5)


def test_complex_fraction_coefficients_round_trip():
    p = parse_operator("(1/2+3/4i)*a[1] - 5/7i*ad[1]*Phi[1]")
    assert parse_operator(format_operator(p), 1) == p


def test_classical_round_trip():
    g = parse_phipi("phi[1]^2*pi[2] - 2/3*phi[2] + 1")
    assert parse_phipi(format_phipi(g), 2) == g


def test_operator_round_trip():
    p = parse_operator("ad[1]*a[2]*a[1] + 2*a[2]")
    assert parse_operator(format_operator(p), 2) == p


def test_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse_phipi("phi[1] + * pi[1]")
    assert info.value.position == 9
    assert "^" in str(info.value)


@pytest.mark.parametrize("bad", ["phi[0]", "phi[1", "a[1]*phi[1]", "foo[1]", "phi[1]^-1", "1/0", "1/0i"])
def test_rejects_malformed(bad):
    with pytest.raises(ParseError):
        parse_phipi(bad) if "a[" not in bad else parse_operator(bad)


def test_mode_count_is_max_index_or_given():
    assert parse_phipi("phi[3]").modes == 3
    assert parse_phipi("phi[1]", modes=4).modes == 4


def test_constant_parses_to_polynomial():
    assert parse_phipi("5") == PhiPiPolynomial.constant(1, 5)
