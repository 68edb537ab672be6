import json
import math

import numpy as np
import pytest

from fockbridge import kernels
from fockbridge.dynamics import (
    METHODS,
    ClassicalState,
    ConvergenceError,
    DistributionSpec,
    Ensemble,
    HamiltonianSpec,
    delta_ensemble,
    energies,
    energy,
    evolve_ensemble,
    integrate,
    lagrange_euler_rhs,
    sample_ensemble,
)
from fockbridge.parsing import parse_phipi


def _drift(H, s0, t, dt, method="implicit-midpoint"):
    tr = integrate(H, s0, t, dt, method)
    e = energies(H, tr.points)
    return float(np.max(np.abs(e - e[0])))


def test_rhs_quartic(quartic):
    dphi, dpi = lagrange_euler_rhs(quartic, ClassicalState([1.0], [0.0]))
    assert dphi == pytest.approx([0.0])
    assert dpi == pytest.approx([-1.4])


@pytest.mark.parametrize("method", METHODS)
def test_harmonic_returns_after_one_period(harmonic, method):
    s0 = ClassicalState([1.0], [0.0])
    end = integrate(harmonic, s0, 2 * math.pi, 1e-3, method).final
    assert np.max(np.abs(end.point() - s0.point())) <= 1e-6


def test_harmonic_matches_rotation(harmonic):
    s0 = ClassicalState([0.3], [-0.7])
    tr = integrate(harmonic, s0, 1.3, 1e-3)
    z = s0.z()[0] * np.exp(-1j * tr.times[-1])
    assert abs(tr.final.z()[0] - z) <= 1e-6


def test_quartic_energy_drift_small_amplitude(quartic):
    assert _drift(quartic, ClassicalState([0.5], [0.5]), 10.0, 1e-3) <= 1e-8


def test_quartic_energy_drift_is_second_order(quartic):
    s0 = ClassicalState([1.0], [0.0])
    coarse = _drift(quartic, s0, 10.0, 2e-3)
    fine = _drift(quartic, s0, 10.0, 1e-3)
    assert coarse / fine == pytest.approx(4.0, rel=0.05)


def test_midpoint_conserves_quadratic_energy_to_roundoff(harmonic):
    assert _drift(harmonic, ClassicalState([1.2], [0.4]), 5.0, 0.05) <= 1e-12


def test_dt_shrinks_to_land_on_final_time(harmonic):
    tr = integrate(harmonic, ClassicalState([1.0], [0.0]), 1.0, 0.3)
    assert tr.times[-1] == pytest.approx(1.0)
    assert len(tr.times) == 5


def test_zero_time_returns_initial(harmonic):
    tr = integrate(harmonic, ClassicalState([1.0], [2.0]), 0.0, 0.1)
    np.testing.assert_array_equal(tr.final.point(), [1.0, 2.0])


@pytest.mark.parametrize("x0, dt, overflow", [(2.0, 1.0, False), (10.0, 1.0, True)])
def test_midpoint_failure_raises(quartic, x0, dt, overflow):
    with pytest.raises(ConvergenceError) as info:
        integrate(quartic, ClassicalState([x0], [0.0]), 5.0, dt)
    assert math.isinf(info.value.residual) == overflow
    assert "reduce dt" in str(info.value)


def test_rk4_overflow_raises(quartic):
    with pytest.raises(ConvergenceError):
        integrate(quartic, ClassicalState([10.0], [0.0]), 20.0, 1.0, "rk4")


def test_invalid_inputs(harmonic):
    with pytest.raises(ValueError):
        ClassicalState([1.0, 2.0], [0.0])
    with pytest.raises(ValueError):
        ClassicalState([float("nan")], [0.0])
    with pytest.raises(ValueError):
        integrate(harmonic, ClassicalState([1.0], [0.0]), -1.0, 0.1)
    with pytest.raises(ValueError):
        integrate(harmonic, ClassicalState([1.0], [0.0]), 1.0, 0.1, "euler")
    with pytest.raises(ValueError):
        integrate(harmonic, ClassicalState([1.0, 0.0], [0.0, 0.0]), 1.0, 0.1)
    with pytest.raises(ValueError):
        HamiltonianSpec(parse_phipi("i*phi[1]^2"))
    with pytest.raises(ValueError):
        HamiltonianSpec(parse_phipi("phi[1]^10"))
    with pytest.raises(ValueError):
        DistributionSpec("gaussian", mean=(0.0, 0.0), std=(1.0, -1.0))
    with pytest.raises(ValueError):
        DistributionSpec("uniform", low=(1.0, 0.0), high=(0.0, 1.0))
    with pytest.raises(ValueError):
        DistributionSpec("cauchy")
    with pytest.raises(ValueError):
        Ensemble(np.zeros((2, 2)), np.array([0.5, 0.6]))


def test_sampling_is_deterministic_per_seed():
    d = DistributionSpec("gaussian", seed=7, mean=(1.0, 0.0), std=(0.1, 0.2))
    a, b = sample_ensemble(d, 50), sample_ensemble(d, 50)
    np.testing.assert_array_equal(a.points, b.points)
    c = sample_ensemble(DistributionSpec("gaussian", seed=8, mean=(1.0, 0.0), std=(0.1, 0.2)), 50)
    assert not np.array_equal(a.points, c.points)
    assert a.weights.sum() == pytest.approx(1.0)


def test_uniform_samples_stay_in_box():
    e = sample_ensemble(DistributionSpec("uniform", seed=3, low=(-1.0, 0.0), high=(1.0, 0.5)), 200)
    assert np.all(e.points[:, 0] >= -1.0) and np.all(e.points[:, 0] <= 1.0)
    assert np.all(e.points[:, 1] >= 0.0) and np.all(e.points[:, 1] <= 0.5)


def test_ensemble_evolution_matches_single_runs(quartic):
    e = sample_ensemble(DistributionSpec("gaussian", seed=1, mean=(0.5, 0.0), std=(0.2, 0.2)), 5)
    out = evolve_ensemble(quartic, e, 0.8, 0.01)
    for k, s in enumerate(e.samples):
        np.testing.assert_allclose(out.points[k], integrate(quartic, s, 0.8, 0.01).final.point(), atol=1e-14)
    np.testing.assert_array_equal(out.weights, e.weights)


def test_backends_agree(quartic):
    x0 = np.array([[0.7, -0.2], [1.1, 0.4]])
    args = (x0, 0.01, 200, *quartic._packed, 1e-13, 50, True)
    for name in ("midpoint", "rk4"):
        a, sa = kernels.BACKENDS["numpy"][name](*args)
        b, sb = kernels.BACKENDS["numba"][name](*args)
        np.testing.assert_allclose(a, b, atol=1e-13)
        assert sa[0] == sb[0] == -1


def test_trajectory_and_ensemble_serialize(harmonic):
    tr = integrate(harmonic, ClassicalState([1.0], [0.0]), 0.1, 0.05)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,phi_1,pi_1" and len(lines) == 4
    assert json.loads(tr.to_json())["points"][0] == [1.0, 0.0]
    e = delta_ensemble(ClassicalState([1.0], [2.0]))
    assert e.size == 1 and "phi_1" in e.to_csv()
    assert json.loads(e.to_json())


def test_energy_of_state(quartic):
    assert energy(quartic, ClassicalState([1.0], [1.0])) == pytest.approx(1.1)


def test_harmonic_energy_drift(harmonic):
    assert _drift(harmonic, ClassicalState([1.0], [0.0]), 10.0, 1e-3) <= 1e-8


def test_time_reversal(quartic):
    s0 = ClassicalState([0.9], [-0.3])
    fwd = integrate(quartic, s0, 3.0, 1e-3).final
    back = integrate(quartic, ClassicalState(fwd.phi, -fwd.pi), 3.0, 1e-3).final
    # momentum flip reverses the flow because H is even in pi
    np.testing.assert_allclose(back.phi, s0.phi, atol=1e-6)
    np.testing.assert_allclose(-back.pi, s0.pi, atol=1e-6)


def test_rk4_and_midpoint_agree(quartic):
    s0 = ClassicalState([1.0], [0.0])
    a = integrate(quartic, s0, 1.0, 1e-4).final.point()
    b = integrate(quartic, s0, 1.0, 1e-4, "rk4").final.point()
    assert np.max(np.abs(a - b)) <= 1e-6


def test_rhs_matches_energy_gradient():
    H = HamiltonianSpec(parse_phipi("(phi[1]^2 + pi[1]^2 + phi[2]^2 + pi[2]^2)/2 + 1/10*phi[1]^4 - 1/3*phi[1]*pi[2]^3"))
    s = ClassicalState([0.4, -0.7], [1.1, 0.2])
    dphi, dpi = lagrange_euler_rhs(H, s)
    h = 1e-5
    for j in range(2):
        for block, rate, sign in (("pi", dphi, 1.0), ("phi", dpi, -1.0)):
            up, dn = s.point().copy(), s.point().copy()
            k = j + (2 if block == "pi" else 0)
            up[k] += h
            dn[k] -= h
            fd = (energy(H, ClassicalState.from_point(up)) - energy(H, ClassicalState.from_point(dn))) / (2 * h)
            assert abs(rate[j] - sign * fd) <= 1e-6


def test_zero_coupling_quartic_is_harmonic(harmonic):
    q0 = HamiltonianSpec(parse_phipi("(phi[1]^2 + pi[1]^2)/2 + 0*phi[1]^4"))
    s0 = ClassicalState([0.7], [0.2])
    a = integrate(q0, s0, 2.0, 1e-3).points
    b = integrate(harmonic, s0, 2.0, 1e-3).points
    assert np.max(np.abs(a - b)) <= 1e-10


def test_delta_sampling_and_law_of_large_numbers():
    e = sample_ensemble(DistributionSpec("delta", state=(1.0, 0.0)), 5)
    np.testing.assert_array_equal(e.points, np.tile([1.0, 0.0], (5, 1)))
    np.testing.assert_array_equal(e.weights, np.full(5, 0.2))
    g = sample_ensemble(DistributionSpec("gaussian", seed=11, mean=(2.0, 0.0), std=(0.1, 0.1)), 10_000)
    assert abs(g.mean(g.points[:, 0]) - 2.0) <= 0.01


def test_ensemble_period_and_zero_time(harmonic):
    e = sample_ensemble(DistributionSpec("uniform", seed=2, low=(-1.0, -1.0), high=(1.0, 1.0)), 20)
    np.testing.assert_array_equal(evolve_ensemble(harmonic, e, 0.0, 1e-3).points, e.points)
    back = evolve_ensemble(harmonic, e, 2 * math.pi, 1e-3)
    assert np.max(np.abs(back.points - e.points)) <= 1e-6
