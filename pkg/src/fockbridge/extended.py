"""Doubled Fock space: an ``a`` block (modes ``1..N``) and a ``b`` block
(modes ``N+1..2N``, ``b_j = a_{j+N}``), extended coherent vectors, the
two-block field operators, the free generator ``G0`` and interaction-picture
operators.

Prefactors are taken literally.  Where they do not reproduce the familiar
normalization or commutators, the numbers are reported together with the best
scalar correction rather than adjusted silently.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fock, kernels
from .bridge import CutoffError, _amplitudes, cutoff_estimate, state_tail
from .dynamics import ClassicalState
from .fock import FockBasis

DEFAULT_TIMES = (0.0, 0.25, 0.5, 1.0)
SURVEY_MARGIN = 2
SURVEY_COLUMNS = ["j", "k", "t", "t_prime", "which", "op_norm", "fit_re", "fit_im", "fit_residual"]


@dataclass(frozen=True)
class DoubledBasis:
    modes: int  # N, per block
    cutoff: int

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("need at least one mode per block")

    @property
    def fock(self) -> FockBasis:
        return FockBasis(2 * self.modes, self.cutoff)

    @property
    def dim(self) -> int:
        return self.fock.dim

    def a_mode(self, j: int) -> int:
        self._check(j)
        return j

    def b_mode(self, j: int) -> int:
        self._check(j)
        return j + self.modes

    def _check(self, j: int) -> None:
        if not 1 <= j <= self.modes:
            raise ValueError(f"mode {j} out of range 1..{self.modes}")

    def descriptor(self) -> dict:
        return {"modes_per_block": self.modes, "cutoff": self.cutoff, "dim": self.dim}


@dataclass(frozen=True)
class ExtendedVector:
    vector: np.ndarray
    norm: float  # norm of the truncated vector, as built
    exact_norm: float  # closed form exp(|x|^2 (1 - sqrt2) / 2)
    truncation_tail: float
    scale_correction: float  # factor that would normalize the untruncated vector


def extended_coherent_vector(s: ClassicalState, basis: DoubledBasis,
                             max_tail: float = 1e-8) -> ExtendedVector:
    """``exp((1/sqrt2) sum_j (x_j a_j^+ + conj(x_j) b_j^+ - |x_j|^2)) |0>`` with ``x = phi + i pi``.

    The exponent is creation-only plus a scalar, so each mode is an
    unnormalized coherent factor.  The scalar term is kept as written; the
    resulting norm is returned, not corrected.
    """
    z = s.z()
    if z.shape[0] != basis.modes:
        raise ValueError(f"state has {z.shape[0]} modes, basis has {basis.modes} per block")
    amps2 = np.concatenate([z, np.conj(z)])
    tail = float(state_tail(amps2[None, :], basis.cutoff)[0])
    if tail > max_tail:
        need = cutoff_estimate(float(np.max(np.abs(z))), min(max_tail, 0.5))
        raise CutoffError(f"extended vector tail {tail:.3e} exceeds {max_tail:.1e}; need cutoff >= {need}",
                          required_cutoff=need)
    r2 = float(np.sum(s.phi ** 2 + s.pi ** 2))
    v = kernels.mode_product(_amplitudes(amps2, basis.cutoff, False))[0]
    v = v * math.exp(-r2 / math.sqrt(2.0))
    exact = math.exp(0.5 * r2 * (1.0 - math.sqrt(2.0)))
    return ExtendedVector(v, float(np.linalg.norm(v)), exact, tail, 1.0 / exact)


def block_amplitudes(ext: ExtendedVector, basis: DoubledBasis) -> np.ndarray:
    """Ratio ``<1_m|v> / <0|v>`` for every mode ``m`` of the doubled space (length ``2N``)."""
    fb = basis.fock
    vac = ext.vector[0]
    out = np.empty(2 * basis.modes, dtype=np.complex128)
    for m in range(1, 2 * basis.modes + 1):
        occ = [0] * (2 * basis.modes)
        occ[m - 1] = 1
        out[m - 1] = ext.vector[fb.index(occ)] / vac
    return out


def extended_field_ops(j: int, basis: DoubledBasis, sparse: bool | None = None):
    """``(Phi_j, Pi_j)`` built from both blocks; each is Hermitian."""
    fb = basis.fock
    a = fock.annihilation_matrix(basis.a_mode(j), fb, sparse=True)
    b = fock.annihilation_matrix(basis.b_mode(j), fb, sparse=True)
    ad, bd = a.conj().T, b.conj().T
    c = 2.0 * math.sqrt(2.0)
    phi = (a + ad + b + bd) / c
    pi = (a - ad - b + bd) / (1j * c)
    return fock._finish(phi, fb, sparse), fock._finish(pi, fb, sparse)


def g0_operator(basis: DoubledBasis, reading: str = "literal", sparse: bool | None = None):
    """``sum_j a_j a_j^+ - b_j b_j^+``.

    ``reading="literal"`` multiplies the truncated matrices in the written
    order; ``reading="normal"`` uses ``a_j^+ a_j - b_j^+ b_j``.  Away from the
    cutoff the two agree since the constants cancel between blocks.
    """
    fb = basis.fock
    total = sp.csr_matrix((fb.dim, fb.dim), dtype=np.complex128)
    for j in range(1, basis.modes + 1):
        a = fock.annihilation_matrix(basis.a_mode(j), fb, sparse=True)
        b = fock.annihilation_matrix(basis.b_mode(j), fb, sparse=True)
        if reading == "literal":
            total = total + a @ a.conj().T - b @ b.conj().T
        elif reading == "normal":
            total = total + a.conj().T @ a - b.conj().T @ b
        else:
            raise ValueError("reading must be 'literal' or 'normal'")
    return fock._finish(total, fb, sparse)


def _g0_diagonal(basis: DoubledBasis, reading: str) -> np.ndarray:
    g = g0_operator(basis, reading, sparse=True)
    return np.real(g.diagonal())


def interaction_picture(A, basis: DoubledBasis, t: float, reading: str = "literal") -> np.ndarray:
    """``exp(-i G0 t) A exp(i G0 t)``; ``G0`` is diagonal, so the phases are exact."""
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    ph = np.exp(-1j * t * _g0_diagonal(basis, reading))
    return ph[:, None] * fock.to_dense(A) * ph.conj()[None, :]


def _scalar_fit(c: np.ndarray) -> tuple[complex, float]:
    """Least-squares ``c ~ s I``: ``s = Tr(c)/d``; residual in operator norm."""
    d = c.shape[0]
    s = complex(np.trace(c)) / d
    return s, float(np.linalg.norm(c - s * np.eye(d), 2))


def commutator_survey(basis: DoubledBasis, times=None, margin: int = SURVEY_MARGIN,
                      reading: str = "literal") -> list[dict]:
    """Commutators of interaction-picture fields on the interior subspace.

    ``times`` is a list of ``(t, t')`` pairs; by default every pair from
    :data:`DEFAULT_TIMES`.  One row per ``(j, k, t, t', which)``.
    """
    if times is None:
        times = list(itertools.product(DEFAULT_TIMES, repeat=2))
    fb = basis.fock
    inner = fb.interior(margin)
    if inner.size == 0:
        raise ValueError(f"cutoff {basis.cutoff} leaves no interior at margin {margin}")
    fields = {j: extended_field_ops(j, basis, sparse=False) for j in range(1, basis.modes + 1)}
    cache: dict = {}

    def pic(j, kind, t):
        key = (j, kind, t)
        if key not in cache:
            cache[key] = interaction_picture(fields[j][kind], basis, t, reading)
        return cache[key]

    rows = []
    pairs = {"qq": (0, 0), "qp": (0, 1), "pp": (1, 1)}
    for j, k in itertools.product(range(1, basis.modes + 1), repeat=2):
        for t, tp in times:
            for which, (x, y) in pairs.items():
                A, B = pic(j, x, float(t)), pic(k, y, float(tp))
                c = fock.restrict(A @ B - B @ A, inner)
                s, res = _scalar_fit(c)
                rows.append({"j": j, "k": k, "t": float(t), "t_prime": float(tp), "which": which,
                             "op_norm": float(np.linalg.norm(c, 2)),
                             "fit_re": s.real, "fit_im": s.imag, "fit_residual": res})
    return rows


def survey_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SURVEY_COLUMNS)
    for r in rows:
        w.writerow([r["j"], r["k"], repr(r["t"]), repr(r["t_prime"]), r["which"],
                    repr(r["op_norm"]), repr(r["fit_re"]), repr(r["fit_im"]), repr(r["fit_residual"])])
    return buf.getvalue()
