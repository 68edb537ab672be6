import math

import numpy as np
import pytest

from fockbridge import fock
from fockbridge.bridge import (
    CutoffError,
    check_eq6,
    check_eq6_fd,
    classical_mean,
    coherent_vector,
    cutoff_estimate,
    density_from_ensemble,
    density_from_state,
    displacement_vector,
    eigen_residual,
    eq10_gap,
    expect_field,
    expect_normal,
    hamiltonian_matrix,
    heisenberg_operator,
    normal_truncation_estimate,
    poisson_tail,
    v_vector,
    zero_point_gap,
    zero_point_operator,
)
from fockbridge.dynamics import (
    ClassicalState,
    DistributionSpec,
    Ensemble,
    HamiltonianSpec,
    delta_ensemble,
    sample_ensemble,
)
from fockbridge.fock import FockBasis
from fockbridge.parsing import format_operator, parse_phipi
from fockbridge.symbolic import PhiPiPolynomial, random_phipi


def test_cutoff_estimate_policy():
    assert cutoff_estimate(1.5, 1e-12) == 19
    assert cutoff_estimate(1.5, 1e-10) == 17
    assert cutoff_estimate(0.0, 1e-12) == 1
    m = cutoff_estimate(2.0, 1e-9)
    assert poisson_tail(m, 4.0) <= 1e-9 < poisson_tail(m - 1, 4.0)
    with pytest.raises(ValueError):
        cutoff_estimate(1.0, 0.0)


def test_coherent_vector_mass_is_poisson_head():
    b = FockBasis(2, 10)
    s = ClassicalState([0.9, -0.4], [0.3, 1.0])
    w = coherent_vector(s, b)
    lam = np.abs(s.z()) ** 2
    head = np.prod(1.0 - poisson_tail(10, lam))
    assert fock.square_norm(w) == pytest.approx(head, rel=1e-13)


def test_cutoff_error_names_required_cutoff():
    s = ClassicalState([2.0], [0.0])
    with pytest.raises(CutoffError) as info:
        coherent_vector(s, FockBasis(1, 6))
    need = info.value.required_cutoff
    assert need > 6 and str(need) in str(info.value)
    coherent_vector(s, FockBasis(1, need))


def test_v_vector_norm():
    b = FockBasis(1, 30)
    y = 0.8 - 1.1j
    assert fock.square_norm(v_vector([y], b)) == pytest.approx(math.exp(abs(y) ** 2), rel=1e-12)


def test_displacement_matches_closed_form():
    b = FockBasis(1, 30)
    s = ClassicalState([1.0], [0.5])
    assert np.max(np.abs(displacement_vector(s, b) - coherent_vector(s, b))) <= 1e-12


def test_eigen_residual_full_and_interior():
    b = FockBasis(1, 19)
    s = ClassicalState([1.5 * math.sqrt(2)], [0.0])
    z = s.z()[0]
    w = coherent_vector(s, b)
    assert eigen_residual(w, 1, z, b) == pytest.approx(abs(z) * abs(w[-1]), rel=1e-9)
    assert eigen_residual(w, 1, z, b, interior=True) <= 1e-14


def test_density_is_a_state():
    e = sample_ensemble(DistributionSpec("gaussian", seed=5, mean=(0.5, 0.0, 0.2, -0.3), std=(0.2,) * 4), 40)
    rho = density_from_ensemble(e, FockBasis(2, 10))
    assert rho.hermiticity_error() <= 1e-15
    assert rho.min_eigenvalue() >= -1e-14
    assert abs(rho.trace - 1.0) <= rho.truncation_tail + 1e-14


def test_field_expectation_pure_state():
    s = ClassicalState([1.25], [-0.5])
    rho = density_from_state(s, FockBasis(1, 25))
    assert expect_field(rho, 1, "phi") == pytest.approx(1.25, abs=1e-12)
    assert expect_field(rho, 1, "pi") == pytest.approx(-0.5, abs=1e-12)
    with pytest.raises(ValueError):
        expect_field(rho, 1, "z")
    with pytest.raises(ValueError):
        expect_field(rho, 2)


def test_normal_expectation_with_exact_tail_estimate():
    b = FockBasis(1, 8)
    s = ClassicalState([1.0], [0.7])
    e = delta_ensemble(s)
    g = parse_phipi("phi[1]^3*pi[1] - 2*pi[1]^2 + 1", 1)
    rho = density_from_state(s, b, max_tail=1e-2)
    err = abs(expect_normal(rho, g) - classical_mean(e, g))
    est = normal_truncation_estimate(e, g, b)
    assert err <= est * (1 + 1e-9)
    assert err > 0.1 * est  # the estimate is tight, not just an upper bound


def test_normal_expectation_rejects_small_cutoff():
    rho = density_from_state(ClassicalState([0.0], [0.0]), FockBasis(1, 2))
    with pytest.raises(CutoffError):
        expect_normal(rho, parse_phipi("phi[1]^3"))


def test_heisenberg_expm_matches_ode(quartic):
    b = FockBasis(1, 8)
    g = parse_phipi("phi[1]^2")
    a = heisenberg_operator(g, quartic, b, 0.4)
    o = heisenberg_operator(g, quartic, b, 0.4, method="ode")
    assert np.max(np.abs(a - o)) <= 1e-9


def test_heisenberg_rejects_nonfinite_time(harmonic):
    with pytest.raises(ValueError):
        heisenberg_operator(parse_phipi("phi[1]"), harmonic, FockBasis(1, 4), float("inf"))


@pytest.mark.parametrize("which", ["phi", "pi", "z", "y"])
def test_commutator_rate_pure_quartic(quartic, which):
    r = check_eq6(delta_ensemble(ClassicalState([0.8], [-0.3])), quartic, 1, FockBasis(1, 24), which)
    assert r.passed and r.abs_gap <= 1e-10


def test_commutator_rate_agrees_with_finite_difference(harmonic):
    e = delta_ensemble(ClassicalState([0.8], [-0.3]))
    r = check_eq6_fd(e, harmonic, 1, FockBasis(1, 20), "pi")
    assert r.passed


def test_harmonic_flow_agrees(harmonic):
    e = delta_ensemble(ClassicalState([0.6], [0.2]))
    r = eq10_gap(e, harmonic, parse_phipi("phi[1]^2"), FockBasis(1, 16), 0.7, 1e-3)
    assert r.passed


def test_hamiltonian_matrix_is_hermitian(quartic):
    h = hamiltonian_matrix(quartic, FockBasis(1, 6))
    assert np.max(np.abs(h - h.conj().T)) == 0.0


def test_zero_point_constant():
    op = zero_point_operator(PhiPiPolynomial.harmonic(2))
    assert format_operator(op) == "(1+0i)"
    rho = density_from_state(ClassicalState([0.2, 0.1], [0.0, 0.3]), FockBasis(2, 8))
    assert zero_point_gap(rho) == pytest.approx(rho.trace.real, abs=1e-15)


def test_zero_point_quartic_is_not_constant():
    h = parse_phipi("(phi[1]^2 + pi[1]^2)/2 + 1/10*phi[1]^4")
    assert zero_point_operator(h).degree() == 2
    assert HamiltonianSpec(h).modes == 1


def test_heisenberg_harmonic_field_closed_form(harmonic):
    b = FockBasis(1, 14)
    t = 0.9
    g_t = heisenberg_operator(parse_phipi("phi[1]"), harmonic, b, t)
    expected = fock.to_dense(fock.field_phi(1, b)) * math.cos(t) + fock.to_dense(fock.field_pi(1, b)) * math.sin(t)
    inner = b.interior(1)
    assert np.max(np.abs(fock.restrict(g_t - expected, inner))) <= 1e-8


def test_heisenberg_conserves_hamiltonian_and_spectrum(quartic):
    b = FockBasis(1, 10)
    g_t = heisenberg_operator(quartic.h, quartic, b, 1.7)
    h = hamiltonian_matrix(quartic, b)
    assert np.max(np.abs(g_t - h)) <= 1e-10
    g = parse_phipi("phi[1]^2 + pi[1]")
    g0 = heisenberg_operator(g, quartic, b, 0.0)
    g1 = heisenberg_operator(g, quartic, b, 1.3)
    np.testing.assert_allclose(np.linalg.eigvalsh(g1), np.linalg.eigvalsh(g0), atol=1e-8)


def test_commutator_rate_harmonic_unit_momentum(harmonic):
    r = check_eq6(delta_ensemble(ClassicalState([0.0], [1.0])), harmonic, 1, FockBasis(1, 20), "phi")
    assert abs(r.lhs - 1) <= 1e-6 and abs(r.rhs - 1) <= 1e-6


def test_commutator_rate_quartic_ensemble(quartic):
    e = sample_ensemble(DistributionSpec("gaussian", seed=12, mean=(0.5, 0.3), std=(0.3, 0.3)), 200)
    b = FockBasis(1, cutoff_estimate(float(np.max(np.abs(e.z()))), 1e-12))
    for which in ("phi", "pi"):
        assert check_eq6(e, quartic, 1, b, which).passed


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_harmonic_flow_any_quartic_observable(harmonic, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    g = random_phipi(rng, 1, 4, 4)
    e = delta_ensemble(ClassicalState([0.8], [-0.5]))
    r = eq10_gap(e, harmonic, g, FockBasis(1, 24), 0.7, 1e-3)
    assert r.abs_gap <= 1e-6 + r.truncation_estimate + r.tol_numerical


def test_zero_point_independent_of_state():
    b = FockBasis(1, 30)
    a = zero_point_gap(density_from_state(ClassicalState([1.0], [0.0]), b))
    c = zero_point_gap(density_from_state(ClassicalState([0.0], [0.0]), b))
    assert abs(a - c) <= 1e-10 and a == pytest.approx(0.5, abs=1e-10)


def test_density_independent_of_sample_order():
    e = sample_ensemble(DistributionSpec("gaussian", seed=8, mean=(0.3, 0.1), std=(0.5, 0.5)), 300)
    perm = np.random.Generator(np.random.Philox(1)).permutation(e.size)
    shuffled = Ensemble(e.points[perm], e.weights[perm])
    b = FockBasis(1, cutoff_estimate(float(np.max(np.abs(e.z()))), 1e-12))
    a = density_from_ensemble(e, b).matrix
    c = density_from_ensemble(shuffled, b).matrix
    assert np.max(np.abs(a - c)) <= 1e-12


def test_displacement_vector_is_unit():
    v = displacement_vector(ClassicalState([0.9], [1.2]), FockBasis(1, 40))
    assert abs(fock.square_norm(v) - 1.0) <= 1e-10
