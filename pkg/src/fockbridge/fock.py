"""Truncated Fock-space linear algebra.

Each of ``N`` modes is truncated at occupation ``M``.  Kets are enumerated
lexicographically in ``(n_1, ..., n_N)`` with mode 1 varying slowest, which
matches ``np.kron`` ordering.  The creation operator is defined as the exact
adjoint of the truncated annihilation operator, so ``a^+ |M> = 0`` and the
only defect of the canonical commutator sits on the top rung:
``[a, a^+] = I - (M+1)|M><M|``.

Operators are plain numpy arrays, or ``scipy.sparse`` CSR matrices when the
dimension exceeds :data:`SPARSE_THRESHOLD` (or when asked explicitly).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp

SPARSE_THRESHOLD = 1024
_INDEX_MAX = np.iinfo(np.int64).max


def basis_dim(modes: int, cutoff: int) -> int:
    """``(cutoff + 1) ** modes``, refusing sizes that overflow a 64-bit index."""
    if modes < 1 or cutoff < 1:
        raise ValueError(f"need modes >= 1 and cutoff >= 1, got ({modes}, {cutoff})")
    dim = (cutoff + 1) ** modes
    if dim > _INDEX_MAX:
        raise OverflowError(f"basis dimension (cutoff+1)^modes = {dim} overflows int64")
    return dim


@dataclass(frozen=True)
class FockBasis:
    modes: int
    cutoff: int

    def __post_init__(self):
        basis_dim(self.modes, self.cutoff)

    @property
    def dim(self) -> int:
        return basis_dim(self.modes, self.cutoff)

    @cached_property
    def occupations(self) -> np.ndarray:
        """``(dim, modes)`` integer table; row ``k`` is the occupation tuple of ket ``k``."""
        grids = np.indices((self.cutoff + 1,) * self.modes).reshape(self.modes, -1)
        return np.ascontiguousarray(grids.T)

    def index(self, occupation) -> int:
        occ = tuple(int(n) for n in occupation)
        if len(occ) != self.modes or any(not 0 <= n <= self.cutoff for n in occ):
            raise ValueError(f"occupation {occ} not in basis {self}")
        idx = 0
        for n in occ:
            idx = idx * (self.cutoff + 1) + n
        return idx

    def occupation(self, index: int) -> tuple:
        if not 0 <= index < self.dim:
            raise IndexError(index)
        return tuple(int(n) for n in self.occupations[index])

    def ket(self, occupation) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.complex128)
        v[self.index(occupation)] = 1.0
        return v

    def vacuum(self) -> np.ndarray:
        return self.ket((0,) * self.modes)

    def interior(self, margin: int) -> np.ndarray:
        """Indices of kets whose every occupation is ``<= cutoff - margin``."""
        return np.flatnonzero((self.occupations <= self.cutoff - margin).all(axis=1))

    def descriptor(self) -> dict:
        return {"modes": self.modes, "cutoff": self.cutoff, "dim": self.dim}

    def _check_mode(self, j: int) -> None:
        if not 1 <= j <= self.modes:
            raise ValueError(f"mode index {j} outside 1..{self.modes}")


def square_norm(v: np.ndarray) -> float:
    """Sum of squared coefficient magnitudes."""
    return float(np.vdot(v, v).real)


def _use_sparse(basis: FockBasis, sparse: bool | None) -> bool:
    return basis.dim > SPARSE_THRESHOLD if sparse is None else sparse


def _finish(m: sp.spmatrix, basis: FockBasis, sparse: bool | None):
    m = sp.csr_matrix(m, dtype=np.complex128, copy=True)
    return m if _use_sparse(basis, sparse) else m.toarray()


@lru_cache(maxsize=64)
def _ladder_1mode(cutoff: int) -> sp.csr_matrix:
    n = np.arange(1, cutoff + 1)
    return sp.diags(np.sqrt(n).astype(np.complex128), 1, format="csr")


@lru_cache(maxsize=256)
def _embedded(basis: FockBasis, j: int, creation: bool) -> sp.csr_matrix:
    basis._check_mode(j)
    single = _ladder_1mode(basis.cutoff)
    if creation:
        single = single.T.conj().tocsr()
    left = sp.identity((basis.cutoff + 1) ** (j - 1), dtype=np.complex128, format="csr")
    right = sp.identity((basis.cutoff + 1) ** (basis.modes - j), dtype=np.complex128, format="csr")
    return sp.kron(sp.kron(left, single), right, format="csr")


def annihilation_matrix(j: int, basis: FockBasis, sparse: bool | None = None):
    """``a_j``: ``|..n_j..> -> sqrt(n_j) |..n_j - 1..>``, vacuum rung maps to zero."""
    return _finish(_embedded(basis, j, False), basis, sparse)


def creation_matrix(j: int, basis: FockBasis, sparse: bool | None = None):
    """``a_j^+``, the adjoint of :func:`annihilation_matrix` (top rung maps to zero)."""
    return _finish(_embedded(basis, j, True), basis, sparse)


def number_matrix(j: int, basis: FockBasis, sparse: bool | None = None):
    basis._check_mode(j)
    diag = basis.occupations[:, j - 1].astype(np.complex128)
    return _finish(sp.diags(diag, format="csr"), basis, sparse)


def identity_matrix(basis: FockBasis, sparse: bool | None = None):
    return _finish(sp.identity(basis.dim, dtype=np.complex128, format="csr"), basis, sparse)


def field_phi(j: int, basis: FockBasis, sparse: bool | None = None):
    """``Phi_j = (a_j + a_j^+)/sqrt2``."""
    a = _embedded(basis, j, False)
    return _finish((a + a.T.conj()) / np.sqrt(2.0), basis, sparse)


def field_pi(j: int, basis: FockBasis, sparse: bool | None = None):
    """``Pi_j = (a_j - a_j^+)/(i sqrt2)``."""
    a = _embedded(basis, j, False)
    return _finish((a - a.T.conj()) / (1j * np.sqrt(2.0)), basis, sparse)


def _shape_check(a, b) -> None:
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError(f"basis mismatch: operator shapes {a.shape} and {b.shape}")


def commutator(a, b):
    """``AB - BA`` for dense or sparse operators on the same basis."""
    _shape_check(a, b)
    return a @ b - b @ a


def adjoint(a):
    return a.conj().T


def trace_product(a, b) -> complex:
    """``Tr(AB)`` as an entrywise sum, without forming the product."""
    _shape_check(a, b)
    if sp.issparse(a) or sp.issparse(b):
        a_s = sp.csr_matrix(a)
        b_t = sp.csr_matrix(b).T.tocsr()
        return complex(a_s.multiply(b_t).sum())
    return complex(np.einsum("ij,ji->", a, b))


def to_dense(a) -> np.ndarray:
    return a.toarray() if sp.issparse(a) else np.asarray(a)


def restrict(a, indices: np.ndarray) -> np.ndarray:
    """Dense block of ``a`` on the given ket indices (rows and columns)."""
    a = to_dense(a)
    return a[np.ix_(indices, indices)]


def is_hermitian(a, atol: float = 1e-12) -> bool:
    d = to_dense(a)
    return bool(np.allclose(d, d.conj().T, atol=atol, rtol=0))


def unitary_propagator(h, t: float) -> np.ndarray:
    """``exp(-i h t)`` for a Hermitian generator ``h`` (scaling-and-squaring Pade).

    Diagonal generators are exponentiated entrywise.
    """
    hd = to_dense(h)
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    off = hd - np.diag(np.diag(hd))
    if not off.any():
        return np.diag(np.exp(-1j * t * np.diag(hd)))
    u = scipy.linalg.expm(-1j * t * hd)
    if not np.all(np.isfinite(u)):
        raise FloatingPointError("matrix exponential did not converge")
    return u


def operator_to_json(a, basis: FockBasis, tol: float = 0.0) -> str:
    """Basis descriptor plus coordinate-list entries ``[row, col, re, im]``."""
    coo = sp.coo_matrix(to_dense(a))
    entries = []
    for r, c, v in sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())):
        if abs(v) > tol:
            entries.append([r, c, float(v.real), float(v.imag)])
    return json.dumps({"basis": basis.descriptor(), "entries": entries}, sort_keys=True)


def operator_from_json(text: str) -> tuple[np.ndarray, FockBasis]:
    data = json.loads(text)
    b = data["basis"]
    basis = FockBasis(b["modes"], b["cutoff"])
    out = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    for r, c, re, im in data["entries"]:
        out[r, c] = complex(re, im)
    return out, basis
