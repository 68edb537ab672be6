import csv
import io
import math

import numpy as np
import pytest

from fockbridge import fock
from fockbridge.dynamics import ClassicalState
from fockbridge.extended import (
    SURVEY_COLUMNS,
    DoubledBasis,
    block_amplitudes,
    commutator_survey,
    extended_coherent_vector,
    extended_field_ops,
    g0_operator,
    interaction_picture,
    survey_csv,
)


@pytest.fixture
def small():
    return DoubledBasis(1, 10)


def test_doubled_basis_modes():
    b = DoubledBasis(2, 3)
    assert b.dim == 4 ** 4
    assert (b.a_mode(2), b.b_mode(2)) == (2, 4)
    with pytest.raises(ValueError):
        b.b_mode(3)
    with pytest.raises(ValueError):
        DoubledBasis(0, 3)


def test_extended_vector_norm_is_reported_not_fixed(small):
    s = ClassicalState([0.4], [0.3])
    ext = extended_coherent_vector(s, DoubledBasis(1, 20))
    r2 = 0.4 ** 2 + 0.3 ** 2
    assert ext.exact_norm == pytest.approx(math.exp(0.5 * r2 * (1 - math.sqrt(2))))
    assert ext.norm == pytest.approx(ext.exact_norm, rel=1e-12)
    assert ext.norm * ext.scale_correction == pytest.approx(1.0, rel=1e-12)


def test_block_amplitudes_are_conjugate(small):
    s = ClassicalState([0.4], [0.3])
    amps = block_amplitudes(extended_coherent_vector(s, small), small)
    z = s.z()[0]
    assert amps == pytest.approx([z, np.conj(z)])


def test_extended_vector_cutoff_guard():
    from fockbridge.bridge import CutoffError
    with pytest.raises(CutoffError):
        extended_coherent_vector(ClassicalState([3.0], [0.0]), DoubledBasis(1, 4))


def test_block_fields_are_hermitian_and_commute(small):
    phi, pi = extended_field_ops(1, small, sparse=False)
    assert fock.is_hermitian(phi) and fock.is_hermitian(pi)
    inner = small.fock.interior(2)
    assert np.max(np.abs(fock.restrict(phi @ pi - pi @ phi, inner))) <= 1e-12


def test_g0_vacuum_and_readings(small):
    lit = fock.to_dense(g0_operator(small, "literal"))
    nor = fock.to_dense(g0_operator(small, "normal"))
    assert lit[0, 0] == 0 and nor[0, 0] == 0
    inner = small.fock.interior(1)
    assert np.max(np.abs(fock.restrict(lit - nor, inner))) <= 1e-13
    assert np.max(np.abs(lit - nor)) == pytest.approx(small.cutoff + 1)
    with pytest.raises(ValueError):
        g0_operator(small, "weyl")


def test_interaction_picture_group_property(small):
    phi, _ = extended_field_ops(1, small, sparse=False)
    a = interaction_picture(interaction_picture(phi, small, 0.3), small, 0.45)
    b = interaction_picture(phi, small, 0.75)
    assert np.max(np.abs(a - b)) <= 1e-12
    assert np.max(np.abs(interaction_picture(phi, small, 0.0) - phi)) == 0.0


def test_survey_rows_and_csv(small):
    rows = commutator_survey(small, times=[(0.0, 0.5)])
    assert len(rows) == 3
    assert {r["which"] for r in rows} == {"qq", "qp", "pp"}
    assert max(r["op_norm"] for r in rows) <= 1e-12
    parsed = list(csv.reader(io.StringIO(survey_csv(rows))))
    assert parsed[0] == SURVEY_COLUMNS and len(parsed) == 4


def test_survey_needs_interior():
    with pytest.raises(ValueError):
        commutator_survey(DoubledBasis(1, 1), margin=2)


def test_distinct_modes_commute_at_equal_time():
    b = DoubledBasis(2, 3)
    rows = commutator_survey(b, times=[(0.0, 0.0)], margin=1)
    cross = [r for r in rows if r["j"] != r["k"]]
    assert len(cross) == 6
    assert max(r["op_norm"] for r in cross) <= 1e-10
