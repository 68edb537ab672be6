"""numba and numpy kernel backends must agree."""

import numpy as np
import pytest

from fockbridge import kernels
from fockbridge.dynamics import HamiltonianSpec
from fockbridge.parsing import parse_phipi
from fockbridge.symbolic import random_phipi, to_yz

NP, NB = kernels.BACKENDS["numpy"], kernels.BACKENDS["numba"]


def test_backend_selected():
    assert kernels.BACKEND in ("numpy", "numba")


def test_poly_eval(rng):
    g = random_phipi(rng, 2, 4, 6, complex_coefs=True)
    e, c = g.to_arrays()
    pts = rng.standard_normal((7, 4)).astype(np.complex128)
    assert np.allclose(NP["poly_eval"](e, c, pts), NB["poly_eval"](e, c, pts), rtol=1e-13)
    assert NP["poly_eval"](e, c, pts)[0] == pytest.approx(g.evaluate(pts[0, :2].real, pts[0, 2:].real))


def test_field_eval_and_integrators(quartic):
    packed = quartic._packed
    x = np.array([[1.0, 0.0], [0.3, -0.8]])
    assert np.allclose(NP["field_eval"](*packed, x), NB["field_eval"](*packed, x), rtol=1e-14)
    for name in ("midpoint", "rk4"):
        a, sa = NP[name](x, 0.01, 50, *packed, 1e-13, 50, True)
        b, sb = NB[name](x, 0.01, 50, *packed, 1e-13, 50, True)
        assert sa[0] < 0 and sb[0] < 0
        assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_density(rng):
    v = rng.standard_normal((30, 9)) + 1j * rng.standard_normal((30, 9))
    w = rng.random(30)
    w /= w.sum()
    ref = np.einsum("k,ki,kj->ij", w, v, v.conj())
    assert np.allclose(NP["density"](v, w), ref, atol=1e-13)
    assert np.allclose(NB["density"](v, w), ref, atol=1e-13)


def test_density_order_independent(rng):
    v = rng.standard_normal((200, 6)) + 1j * rng.standard_normal((200, 6))
    w = np.full(200, 1 / 200)
    perm = rng.permutation(200)
    assert np.max(np.abs(NB["density"](v, w) - NB["density"](v[perm], w[perm]))) < 1e-12


def test_mode_product(rng):
    amps = rng.standard_normal((3, 2, 4)) + 0j
    out = NP["mode_product"](amps)
    assert np.allclose(out[1], np.kron(amps[1, 0], amps[1, 1]))
    assert np.allclose(out, NB["mode_product"](amps))


def test_normal_tail(rng):
    f = to_yz(parse_phipi("phi[1]^2*pi[2] + phi[2]^3", 2))
    e, c = f.to_arrays()
    absz = rng.random((4, 2)) * 2
    tails = rng.random((4, 2, 7)) * 1e-3
    assert np.allclose(NP["normal_tail"](e, np.abs(c), absz, tails, 6),
                       NB["normal_tail"](e, np.abs(c), absz, tails, 6), rtol=1e-13)


def test_quartic_packing():
    H = HamiltonianSpec(parse_phipi("pi[1]^2/2 + phi[1]^4"))
    v = NP["field_eval"](*H._packed, np.array([[2.0, 3.0]]))
    assert np.allclose(v, [[3.0, -32.0]])
