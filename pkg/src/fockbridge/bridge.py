"""Classical ensembles as density matrices on the truncated Fock space, and the
checks that tie operator expectations to classical averages.

Coherent vectors are built from the closed form and are *not* renormalized
after truncation: the missing mass is exactly the Poisson tail, which is what
makes the truncation error of normal-ordered expectations computable in closed
form (see :func:`normal_truncation_estimate`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.special import pdtrc

from . import fock, kernels
from .dynamics import ClassicalState, Ensemble, HamiltonianSpec, evolve_ensemble
from .fock import FockBasis
from .reports import EquivalenceReport
from .symbolic import (
    OperatorPolynomial,
    PhiPiPolynomial,
    evaluate_matrix,
    field_phi_symbolic,
    field_pi_symbolic,
    operator_to_yz,
    rewrite_to_normal_form,
    substitute_normal,
    substitute_symmetric,
    symbolic_commutator,
    to_yz,
)

log = logging.getLogger(__name__)

DEFAULT_TAIL_BOUND = 1e-8
FLOAT_EPS = 1e-12
IMAG_RESIDUE = 1e-10
FIELDS = ("phi", "pi", "z", "y")


class CutoffError(ValueError):
    """The basis cutoff is too small for the requested state or observable."""

    def __init__(self, message: str, required_cutoff: int | None = None):
        super().__init__(message)
        self.required_cutoff = required_cutoff


# ---------------------------------------------------------------------------
# cutoff policy


def poisson_tail(cutoff: int, lam) -> np.ndarray:
    """``Pr[n > cutoff]`` for ``n ~ Poisson(lam)``."""
    return pdtrc(cutoff, np.asarray(lam, dtype=np.float64))


def cutoff_estimate(max_amplitude: float, tolerance: float) -> int:
    """Smallest cutoff ``M >= 1`` whose Poisson(``max_amplitude**2``) tail is within ``tolerance``."""
    if not 0.0 < tolerance < 1.0:
        raise ValueError("tolerance must lie in (0, 1)")
    if max_amplitude < 0 or not math.isfinite(max_amplitude):
        raise ValueError("max_amplitude must be finite and nonnegative")
    lam = float(max_amplitude) ** 2
    m = 1
    while poisson_tail(m, lam) > tolerance:
        m += 1
    return m


def state_tail(z: np.ndarray, cutoff: int) -> np.ndarray:
    """Mass lost by truncating coherent states with amplitudes ``z`` ``(..., N)``."""
    t = poisson_tail(cutoff, np.abs(z) ** 2)
    return 1.0 - np.prod(1.0 - t, axis=-1)


def _check_tail(z: np.ndarray, basis: FockBasis, bound: float | None) -> np.ndarray:
    bound = DEFAULT_TAIL_BOUND if bound is None else bound
    tails = state_tail(np.atleast_2d(z), basis.cutoff)
    worst = int(np.argmax(tails))
    if tails[worst] > bound:
        amp = float(np.max(np.abs(z)))
        need = cutoff_estimate(amp, min(bound, 0.5))
        raise CutoffError(
            f"truncation tail {tails[worst]:.3e} exceeds bound {bound:.1e} "
            f"(|z| up to {amp:.4g}); need cutoff >= {need}, have {basis.cutoff}",
            required_cutoff=need,
        )
    return tails


# ---------------------------------------------------------------------------
# vectors


def _check_len(x: np.ndarray, basis: FockBasis) -> None:
    if x.shape[-1] != basis.modes:
        raise ValueError(f"got {x.shape[-1]} amplitudes for {basis.modes} modes")


def _amplitudes(z: np.ndarray, cutoff: int, normalized: bool) -> np.ndarray:
    """Per-mode coefficients ``z^n / sqrt(n!)`` (times ``exp(-|z|^2/2)``), shape ``(K, N, M+1)``."""
    z = np.atleast_2d(np.asarray(z, dtype=np.complex128))
    out = np.empty(z.shape + (cutoff + 1,), dtype=np.complex128)
    out[..., 0] = np.exp(-0.5 * np.abs(z) ** 2) if normalized else 1.0
    for n in range(1, cutoff + 1):
        out[..., n] = out[..., n - 1] * z / math.sqrt(n)
    return out


def v_vector(phi, basis: FockBasis) -> np.ndarray:
    """Unnormalized moment vector with coefficients ``prod_j phi_j^{n_j} / sqrt(n_j!)``.

    Complex arguments are allowed; the squared norm tends to ``exp(|phi|^2)``.
    """
    x = np.asarray(phi, dtype=np.complex128).reshape(-1)
    _check_len(x, basis)
    return kernels.mode_product(_amplitudes(x, basis.cutoff, False))[0]


def coherent_vector(s: ClassicalState, basis: FockBasis, max_tail: float | None = None) -> np.ndarray:
    z = s.z()
    _check_len(z, basis)
    _check_tail(z, basis, max_tail)
    return kernels.mode_product(_amplitudes(z, basis.cutoff, True))[0]


def coherent_batch(e: Ensemble, basis: FockBasis, max_tail: float | None = None):
    """``(K, D)`` coherent vectors for every sample, plus the per-sample tails."""
    z = e.z()
    _check_len(z, basis)
    tails = _check_tail(z, basis, max_tail)
    return kernels.mode_product(_amplitudes(z, basis.cutoff, True)), tails


def displacement_vector(s: ClassicalState, basis: FockBasis, max_tail: float | None = None,
                        unitarity_tol: float = 1e-10) -> np.ndarray:
    """``exp(sum_j z_j a_j^+ - conj(z_j) a_j) |0>`` by matrix exponential.

    The exponent is a sum of commuting single-mode terms, so the exponential
    factorizes exactly into per-mode exponentials of ``(M+1)``-square matrices.
    """
    z = s.z()
    _check_len(z, basis)
    _check_tail(z, basis, max_tail)
    lower = np.diag(np.sqrt(np.arange(1, basis.cutoff + 1, dtype=np.float64)), -1)
    amps = np.empty((1, basis.modes, basis.cutoff + 1), dtype=np.complex128)
    for j, zj in enumerate(z):
        col = sla.expm(zj * lower - np.conj(zj) * lower.T)[:, 0]
        if not np.all(np.isfinite(col)):
            raise FloatingPointError(f"matrix exponential diverged for mode {j + 1}")
        amps[0, j] = col
    v = kernels.mode_product(amps)[0]
    drift = abs(fock.square_norm(v) - 1.0)
    if drift > unitarity_tol:
        raise FloatingPointError(f"truncated exponential is off unitary by {drift:.3e}")
    return v


def eigen_residual(w: np.ndarray, j: int, z: complex, basis: FockBasis, interior: bool = False) -> float:
    """``|a_j w - z w|``; with ``interior`` only rows where mode ``j`` is below the cutoff count.

    On the full truncated space the residual of a truncated coherent vector is
    exactly ``|z| |c_M|``: the top occupation has no partner above it.
    """
    r = fock.annihilation_matrix(j, basis) @ w - z * w
    if interior:
        r = r[basis.occupations[:, j - 1] < basis.cutoff]
    return float(np.linalg.norm(r))


# ---------------------------------------------------------------------------
# density matrix


@dataclass(frozen=True)
class DensityMatrix:
    basis: FockBasis
    matrix: np.ndarray
    truncation_tail: float
    sample_tails: np.ndarray = field(default=None, repr=False)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def expect(self, op) -> complex:
        return fock.trace_product(self.matrix, op)


def density_from_ensemble(e: Ensemble, basis: FockBasis, max_tail: float | None = None) -> DensityMatrix:
    vecs, tails = coherent_batch(e, basis, max_tail)
    rho = kernels.density(vecs, e.weights)
    return DensityMatrix(basis, rho, float(np.max(tails)), tails)


def density_from_state(s: ClassicalState, basis: FockBasis, max_tail: float | None = None) -> DensityMatrix:
    w = coherent_vector(s, basis, max_tail)
    tail = float(state_tail(s.z()[None, :], basis.cutoff)[0])
    return DensityMatrix(basis, np.outer(w, w.conj()), tail, np.array([tail]))


# ---------------------------------------------------------------------------
# expectations


def _field_matrix(which: str, j: int, basis: FockBasis):
    if which == "phi":
        return fock.field_phi(j, basis)
    if which == "pi":
        return fock.field_pi(j, basis)
    if which == "z":
        return fock.annihilation_matrix(j, basis)
    if which == "y":
        return fock.creation_matrix(j, basis)
    raise ValueError(f"unknown field {which!r}; choose from {FIELDS}")


def _field_symbolic(which: str, j: int, modes: int) -> OperatorPolynomial:
    if which == "phi":
        return field_phi_symbolic(j, modes)
    if which == "pi":
        return field_pi_symbolic(j, modes)
    kind = 1 if which == "z" else 0
    return OperatorPolynomial.generator(modes, kind, j)


def expect_field(rho: DensityMatrix, j: int, which: str = "phi") -> float:
    """``Tr(rho Phi_j)`` (or ``Pi_j``); a complex residue above 1e-10 is logged."""
    if which not in ("phi", "pi"):
        raise ValueError("which must be 'phi' or 'pi'")
    rho.basis._check_mode(j)
    val = rho.expect(_field_matrix(which, j, rho.basis))
    if abs(val.imag) > IMAG_RESIDUE:
        log.warning("Tr(rho %s_%d) has imaginary residue %.3e", which, j, val.imag)
    return float(val.real)


def expect_normal(rho: DensityMatrix, g: PhiPiPolynomial) -> complex:
    """``Tr(rho g_n)`` with ``g_n`` the normal-product operator of ``g``."""
    if g.modes != rho.basis.modes:
        raise ValueError(f"polynomial has {g.modes} modes, basis has {rho.basis.modes}")
    if g.degree() > rho.basis.cutoff:
        raise CutoffError(f"cutoff {rho.basis.cutoff} below degree {g.degree()} of the observable",
                          required_cutoff=g.degree())
    return rho.expect(evaluate_matrix(substitute_normal(g), rho.basis))


def classical_mean(e: Ensemble, g: PhiPiPolynomial) -> complex:
    exps, coefs = g.to_arrays()
    vals = kernels.poly_eval(exps, coefs, e.points.astype(np.complex128))
    return complex(e.mean(vals))


def normal_truncation_estimate(e: Ensemble, g: PhiPiPolynomial | OperatorPolynomial, basis: FockBasis) -> float:
    """Bound on ``|Tr(rho g_n) - <g>|`` caused by the cutoff alone.

    Per sample and per normal monomial the loss is exact; the bound is the
    triangle inequality over monomials, averaged with the ensemble weights.
    """
    f = operator_to_yz(g) if isinstance(g, OperatorPolynomial) else to_yz(g)
    exps, coefs = f.to_arrays()
    if len(coefs) == 0:
        return 0.0
    if int(exps.max(initial=0)) > basis.cutoff:
        raise CutoffError("cutoff below the observable's per-mode degree", required_cutoff=int(exps.max()))
    absz = np.abs(e.z())
    m = np.arange(basis.cutoff + 1)
    tails = poisson_tail(m[None, None, :], (absz ** 2)[:, :, None])
    per = kernels.normal_tail(np.ascontiguousarray(exps), np.abs(coefs), absz,
                              np.ascontiguousarray(tails), basis.cutoff)
    return float(e.mean(per))


# ---------------------------------------------------------------------------
# Heisenberg evolution


def hamiltonian_matrix(H: HamiltonianSpec, basis: FockBasis) -> np.ndarray:
    return fock.to_dense(evaluate_matrix(substitute_normal(H.h), basis))


def heisenberg_operator(g: PhiPiPolynomial, H: HamiltonianSpec, basis: FockBasis, t: float,
                        method: str = "expm", hn: np.ndarray | None = None) -> np.ndarray:
    """``G(t) = U^H G(0) U`` with ``U = exp(-i H_n t)``, solving ``dG/dt = -i[G, H_n]``.

    ``method="ode"`` integrates the commutator equation directly instead
    (slow; for cross-validation only).  ``hn`` may pass a precomputed ``H_n``.
    """
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    g0 = fock.to_dense(evaluate_matrix(substitute_normal(g), basis))
    if hn is None:
        hn = hamiltonian_matrix(H, basis)
    if t == 0:
        return g0
    if method == "expm":
        u = fock.unitary_propagator(hn, t)
        return u.conj().T @ g0 @ u
    if method == "ode":
        d = g0.shape[0]

        def rhs(_, y):
            m = y.reshape(d, d)
            return (-1j * (m @ hn - hn @ m)).ravel()

        sol = solve_ivp(rhs, (0.0, t), g0.ravel(), method="DOP853", rtol=1e-11, atol=1e-13)
        if not sol.success:
            raise FloatingPointError(f"Heisenberg ODE failed: {sol.message}")
        return sol.y[:, -1].reshape(d, d)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# checks


def _classical_rate(e: Ensemble, H: HamiltonianSpec, which: str, j: int) -> complex:
    n = H.modes
    v = kernels.field_eval(*H._packed, e.points)
    dphi, dpi = v[:, j - 1], v[:, n + j - 1]
    rate = {"phi": dphi, "pi": dpi,
            "z": (dphi + 1j * dpi) / math.sqrt(2.0),
            "y": (dphi - 1j * dpi) / math.sqrt(2.0)}[which]
    return complex(e.mean(rate))


def _boundary_estimate(rho: DensityMatrix, diff: np.ndarray, scale: float) -> float:
    """``2 |D|_2 sqrt(Tr(rho P_S))`` with ``S`` the rows/columns touched by ``D``.

    Entries below ``FLOAT_EPS * scale`` are rounding noise, not truncation.
    """
    mask = np.abs(diff) > FLOAT_EPS * scale
    support = np.flatnonzero(mask.any(axis=0) | mask.any(axis=1))
    if support.size == 0:
        return 0.0
    weight = float(np.real(np.trace(rho.matrix[np.ix_(support, support)])))
    return 2.0 * float(np.linalg.norm(diff, 2)) * math.sqrt(max(weight, 0.0))


def check_eq6(e: Ensemble, H: HamiltonianSpec, j: int, basis: FockBasis, which: str = "phi",
              tolerance: float = 1e-6, rho: DensityMatrix | None = None,
              hn: np.ndarray | None = None) -> EquivalenceReport:
    """``-i Tr(rho [X_j, H_n])`` against the ensemble mean of the classical rate of ``x_j``.

    ``which`` picks ``X``: ``phi``, ``pi``, ``z`` (``a_j``) or ``y`` (``a_j^+``).
    """
    basis._check_mode(j)
    if which not in FIELDS:
        raise ValueError(f"unknown field {which!r}; choose from {FIELDS}")
    rho = density_from_ensemble(e, basis) if rho is None else rho
    hn = hamiltonian_matrix(H, basis) if hn is None else hn
    x = fock.to_dense(_field_matrix(which, j, basis))
    c_trunc = x @ hn - hn @ x
    lhs = -1j * rho.expect(c_trunc)
    rhs = _classical_rate(e, H, which, j)

    c_sym = symbolic_commutator(_field_symbolic(which, j, H.modes), substitute_normal(H.h))
    rate_op = c_sym * (-1j)
    c_sym_m = fock.to_dense(evaluate_matrix(c_sym, basis))
    scale = max(1.0, float(np.max(np.abs(c_trunc), initial=0.0)))
    trunc = _boundary_estimate(rho, c_trunc - c_sym_m, scale) + normal_truncation_estimate(e, rate_op, basis)
    return EquivalenceReport(
        f"commutator-rate-{which}{j}", lhs, rhs, tol_numerical=tolerance, tol_truncation=trunc,
        metadata={"basis": basis.descriptor(), "field": which, "mode": j, "samples": e.size,
                  "seed": e.seed},
    )


def check_eq6_fd(e: Ensemble, H: HamiltonianSpec, j: int, basis: FockBasis, which: str = "phi",
                 fd_step: float = 1e-4, tolerance: float = 1e-6,
                 rho: DensityMatrix | None = None, hn: np.ndarray | None = None) -> EquivalenceReport:
    """Commutator rate against a central difference of ``Tr(rho X_j(t))`` at ``t = +-fd_step``."""
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    if which not in ("phi", "pi"):
        raise ValueError("finite-difference check covers phi and pi")
    rho = density_from_ensemble(e, basis) if rho is None else rho
    hn = hamiltonian_matrix(H, basis) if hn is None else hn
    x = fock.to_dense(_field_matrix(which, j, basis))
    lhs = -1j * rho.expect(x @ hn - hn @ x)
    g = PhiPiPolynomial.variable(H.modes, which, j)
    plus = rho.expect(heisenberg_operator(g, H, basis, fd_step, hn=hn))
    minus = rho.expect(heisenberg_operator(g, H, basis, -fd_step, hn=hn))
    fd = (plus - minus) / (2.0 * fd_step)
    return EquivalenceReport(
        f"finite-difference-{which}{j}", lhs, fd, tol_numerical=tolerance,
        metadata={"basis": basis.descriptor(), "fd_step": fd_step, "field": which, "mode": j},
    )


def _integrator_order(method: str) -> int:
    return 4 if method == "rk4" else 2


def eq10_gap(e: Ensemble, H: HamiltonianSpec, g: PhiPiPolynomial, basis: FockBasis, t: float,
             dt: float, method: str = "implicit-midpoint", expectation: str = "equal",
             tolerance: float = 1e-6, refine: int | None = None) -> EquivalenceReport:
    """``Tr(rho G(t))`` against ``<g(phi(t), pi(t))>`` from the classical flow.

    The numerical error is layered as (float) + (cutoff refinement difference
    plus the initial normal-order tail) + (Richardson estimate of the
    integrator error from a half-step rerun).  With ``expectation="differ"`` the
    report passes only when the gap exceeds ten times that total.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    refine = max(4, basis.cutoff // 4) if refine is None else refine

    def operator_side(b: FockBasis) -> complex:
        rho = density_from_ensemble(e, b)
        return rho.expect(heisenberg_operator(g, H, b, t))

    lhs = operator_side(basis)
    lhs_fine = operator_side(FockBasis(basis.modes, basis.cutoff + refine))
    trunc = abs(lhs - lhs_fine) + normal_truncation_estimate(e, g, basis)

    def classical_side(step: float) -> complex:
        return classical_mean(evolve_ensemble(H, e, t, step, method), g)

    rhs = classical_side(dt)
    if t > 0 and dt > 0:
        p = _integrator_order(method)
        integ = abs(rhs - classical_side(dt / 2)) * 2 ** p / (2 ** p - 1)
    else:
        integ = 0.0
    floor = FLOAT_EPS * max(1.0, abs(lhs), abs(rhs)) * basis.dim
    numerical = integ + floor + (tolerance if expectation == "equal" else 0.0)
    return EquivalenceReport(
        "heisenberg-vs-flow", lhs, rhs, tol_numerical=numerical, tol_truncation=trunc,
        expectation=expectation,
        metadata={"basis": basis.descriptor(), "t": t, "dt": dt, "method": method,
                  "integrator_estimate": integ, "float_estimate": floor,
                  "refined_cutoff": basis.cutoff + refine, "samples": e.size, "seed": e.seed},
    )


def zero_point_gap(rho: DensityMatrix, H: HamiltonianSpec | None = None) -> float:
    """``Tr(rho (H_sym - H_n))``; harmonic ``H`` by default, giving ``N/2``."""
    modes = rho.basis.modes
    h = PhiPiPolynomial.harmonic(modes) if H is None else H.h
    if h.modes != modes:
        raise ValueError("Hamiltonian and basis disagree on the number of modes")
    diff = rewrite_to_normal_form(substitute_symmetric(h) - substitute_normal(h))
    return float(rho.expect(evaluate_matrix(diff, rho.basis)).real)


def zero_point_operator(h: PhiPiPolynomial) -> OperatorPolynomial:
    """Normal form of ``H_sym - H_n``; a pure constant for quadratic ``h``."""
    return rewrite_to_normal_form(substitute_symmetric(h) - substitute_normal(h))


__all__ = [
    "CutoffError", "DensityMatrix", "DEFAULT_TAIL_BOUND", "FIELDS",
    "poisson_tail", "cutoff_estimate", "state_tail",
    "v_vector", "coherent_vector", "coherent_batch", "displacement_vector", "eigen_residual",
    "density_from_ensemble", "density_from_state",
    "expect_field", "expect_normal", "classical_mean", "normal_truncation_estimate",
    "hamiltonian_matrix", "heisenberg_operator",
    "check_eq6", "check_eq6_fd", "eq10_gap", "zero_point_gap", "zero_point_operator",
]
