"""Classical Hamiltonian flow ``phi' = dH/dpi``, ``pi' = -dH/dphi`` and sample ensembles.

Phase-space points are stored as flat rows ``(phi_1..phi_N, pi_1..pi_N)``,
the same variable order as :class:`PhiPiPolynomial`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .symbolic import PhiPiPolynomial, partial_derivative

DEFAULT_DEGREE_CAP = 8
MIDPOINT_TOL = 1e-13
MIDPOINT_MAXITER = 50
METHODS = ("implicit-midpoint", "rk4")


class ConvergenceError(RuntimeError):
    """An integrator step failed: the implicit-midpoint solve stalled or the state overflowed."""

    def __init__(self, step: int, sample: int, residual: float, dt: float, maxiter: int,
                 method: str = "implicit-midpoint"):
        self.step = step
        self.sample = sample
        self.residual = residual
        self.method = method
        if math.isinf(residual):
            what = "state overflowed"
        else:
            what = f"residual {residual:.3e} after {maxiter} iterations"
        super().__init__(f"{method} failed at step {step} (sample {sample}): {what} with dt={dt:g}; reduce dt")


@dataclass(frozen=True)
class ClassicalState:
    phi: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.phi, dtype=np.float64))
        pi = np.atleast_1d(np.asarray(self.pi, dtype=np.float64))
        if phi.shape != pi.shape or phi.ndim != 1:
            raise ValueError(f"phi and pi must be equal-length vectors, got {phi.shape} and {pi.shape}")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(pi))):
            raise ValueError("classical state has non-finite entries")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "pi", pi)

    @property
    def modes(self) -> int:
        return self.phi.size

    def point(self) -> np.ndarray:
        return np.concatenate([self.phi, self.pi])

    @classmethod
    def from_point(cls, x) -> "ClassicalState":
        x = np.asarray(x, dtype=np.float64)
        n = x.size // 2
        return cls(x[:n], x[n:])

    def z(self) -> np.ndarray:
        """Complex amplitudes ``(phi + i pi)/sqrt2``."""
        return (self.phi + 1j * self.pi) / math.sqrt(2.0)


@dataclass(frozen=True)
class HamiltonianSpec:
    h: PhiPiPolynomial
    degree_cap: int = DEFAULT_DEGREE_CAP

    def __post_init__(self):
        if self.h.chart != "phipi":
            raise ValueError("Hamiltonian must be written in phi/pi variables")
        if not self.h.is_real():
            raise ValueError("Hamiltonian coefficients must be real")
        if self.h.degree() > self.degree_cap:
            raise ValueError(f"Hamiltonian degree {self.h.degree()} exceeds cap {self.degree_cap}")

    @property
    def modes(self) -> int:
        return self.h.modes

    def velocity_polynomials(self) -> list[PhiPiPolynomial]:
        """``[dH/dpi_1..dH/dpi_N, -dH/dphi_1..-dH/dphi_N]``."""
        n = self.modes
        comps = [partial_derivative(self.h, "pi", j) for j in range(1, n + 1)]
        comps += [-partial_derivative(self.h, "phi", j) for j in range(1, n + 1)]
        return comps

    @cached_property
    def _packed(self):
        exps, coefs, offsets = [], [], [0]
        for p in self.velocity_polynomials():
            e, c = p.to_arrays()
            exps.append(e)
            coefs.append(c)
            offsets.append(offsets[-1] + len(c))
        return (np.ascontiguousarray(np.vstack(exps)), np.concatenate(coefs),
                np.array(offsets, dtype=np.int64))

    @cached_property
    def _energy_arrays(self):
        return self.h.to_arrays()


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points: np.ndarray  # (T, 2N)

    @property
    def states(self) -> list[ClassicalState]:
        return [ClassicalState.from_point(x) for x in self.points]

    @property
    def final(self) -> ClassicalState:
        return ClassicalState.from_point(self.points[-1])

    def to_csv(self) -> str:
        n = self.points.shape[1] // 2
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"phi_{j}" for j in range(1, n + 1)] + [f"pi_{j}" for j in range(1, n + 1)])
        for t, x in zip(self.times, self.points):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"times": self.times.tolist(), "points": self.points.tolist()})


@dataclass(frozen=True)
class DistributionSpec:
    """``kind`` is ``"delta"``, ``"gaussian"`` or ``"uniform"``.

    delta: ``state``; gaussian: ``mean``, ``std`` (each a ``(2N,)`` vector in
    point order); uniform: ``low``, ``high``.
    """

    kind: str
    seed: int = 0
    state: tuple = ()
    mean: tuple = ()
    std: tuple = ()
    low: tuple = ()
    high: tuple = ()

    def __post_init__(self):
        if self.kind == "delta":
            if not self.state:
                raise ValueError("delta distribution needs a state")
        elif self.kind == "gaussian":
            if len(self.mean) != len(self.std) or not self.mean:
                raise ValueError("gaussian needs mean and std of equal length")
            if any(s < 0 for s in self.std):
                raise ValueError("gaussian std must be nonnegative")
        elif self.kind == "uniform":
            if len(self.low) != len(self.high) or not self.low:
                raise ValueError("uniform needs low and high bounds of equal length")
            if any(lo > hi for lo, hi in zip(self.low, self.high)):
                raise ValueError("uniform bounds must satisfy low <= high")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def dimension(self) -> int:
        return len(self.state or self.mean or self.low)

    def descriptor(self) -> dict:
        out = {"kind": self.kind, "seed": int(self.seed)}
        for name in ("state", "mean", "std", "low", "high"):
            v = getattr(self, name)
            if v:
                out[name] = [float(x) for x in v]
        return out


@dataclass(frozen=True)
class Ensemble:
    points: np.ndarray  # (K, 2N)
    weights: np.ndarray  # (K,)
    seed: int | None = None
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        w = np.asarray(self.weights, dtype=np.float64)
        if pts.shape[0] != w.shape[0]:
            raise ValueError("one weight per sample required")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_states(cls, states, weights=None, **kw) -> "Ensemble":
        pts = np.array([s.point() for s in states])
        if weights is None:
            weights = np.full(len(pts), 1.0 / len(pts))
        return cls(pts, np.asarray(weights, dtype=np.float64), **kw)

    @property
    def modes(self) -> int:
        return self.points.shape[1] // 2

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def samples(self) -> list[ClassicalState]:
        return [ClassicalState.from_point(x) for x in self.points]

    def z(self) -> np.ndarray:
        """``(K, N)`` complex amplitudes ``(phi + i pi)/sqrt2``."""
        n = self.modes
        return (self.points[:, :n] + 1j * self.points[:, n:]) / math.sqrt(2.0)

    def mean(self, values: np.ndarray):
        """Weighted average of per-sample values (leading axis = samples)."""
        return np.tensordot(self.weights, values, axes=(0, 0))

    def to_csv(self) -> str:
        n = self.modes
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["weight"] + [f"phi_{j}" for j in range(1, n + 1)] + [f"pi_{j}" for j in range(1, n + 1)])
        for wt, x in zip(self.weights, self.points):
            w.writerow([repr(float(wt))] + [repr(float(v)) for v in x])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "distribution": self.descriptor,
                           "weights": self.weights.tolist(), "points": self.points.tolist()})


def _check_dims(H: HamiltonianSpec, x: np.ndarray) -> None:
    if x.shape[-1] != 2 * H.modes:
        raise ValueError(f"state has {x.shape[-1] // 2} modes, Hamiltonian has {H.modes}")


def lagrange_euler_rhs(H: HamiltonianSpec, s: ClassicalState) -> tuple[np.ndarray, np.ndarray]:
    """``(dH/dpi, -dH/dphi)`` at ``s``."""
    x = s.point()[None, :]
    _check_dims(H, x)
    v = kernels.field_eval(*H._packed, x)[0]
    n = H.modes
    return v[:n], v[n:]


def energy(H: HamiltonianSpec, s: ClassicalState) -> float:
    x = s.point()[None, :]
    _check_dims(H, x)
    return float(kernels.poly_eval(*H._energy_arrays, x.astype(np.complex128))[0].real)


def energies(H: HamiltonianSpec, points: np.ndarray) -> np.ndarray:
    """Energy of each row of ``points``."""
    _check_dims(H, points)
    return kernels.poly_eval(*H._energy_arrays, np.asarray(points, dtype=np.complex128)).real


def _run(H: HamiltonianSpec, x0: np.ndarray, t_final: float, dt: float, method: str, keep: bool):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if t_final < 0 or dt < 0:
        raise ValueError("need t_final >= 0 and dt >= 0")
    _check_dims(H, x0)
    if t_final == 0 or dt == 0:
        return np.zeros(1), x0[None, :, :].copy(), 0.0
    nsteps = max(1, int(math.ceil(t_final / dt - 1e-9)))
    h = t_final / nsteps
    step = kernels.midpoint if method == "implicit-midpoint" else kernels.rk4
    with np.errstate(over="ignore", invalid="ignore"):  # overflow is reported via status
        traj, status = step(np.ascontiguousarray(x0), h, nsteps, *H._packed,
                            MIDPOINT_TOL, MIDPOINT_MAXITER, keep)
    if status[0] >= 0:
        raise ConvergenceError(int(status[0]), int(status[1]), float(status[2]), h, MIDPOINT_MAXITER, method)
    times = np.linspace(0.0, t_final, nsteps + 1) if keep else np.array([t_final])
    return times, traj, h


def integrate(H: HamiltonianSpec, s0: ClassicalState, t_final: float, dt: float,
              method: str = "implicit-midpoint") -> Trajectory:
    """Integrate one state; ``dt`` is shrunk so that a whole number of equal steps lands on ``t_final``."""
    times, traj, _ = _run(H, s0.point()[None, :], t_final, dt, method, keep=True)
    return Trajectory(times, traj[:, 0, :])


def evolve_ensemble(H: HamiltonianSpec, e: Ensemble, t: float, dt: float,
                    method: str = "implicit-midpoint") -> Ensemble:
    """Push every sample through the flow for time ``t``; weights and order kept."""
    _, traj, _ = _run(H, e.points, t, dt, method, keep=False)
    desc = dict(e.descriptor, evolved_to=float(t))
    return Ensemble(traj[-1], e.weights.copy(), e.seed, desc)


def sample_ensemble(d: DistributionSpec, count: int) -> Ensemble:
    """Draw ``count`` equally weighted samples with a Philox counter-based generator."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.Generator(np.random.Philox(int(d.seed)))
    dim = d.dimension
    if dim % 2:
        raise ValueError("distribution dimension must be 2N (phi block then pi block)")
    if d.kind == "delta":
        pts = np.tile(np.asarray(d.state, dtype=np.float64), (count, 1))
    elif d.kind == "gaussian":
        pts = np.asarray(d.mean) + np.asarray(d.std) * rng.standard_normal((count, dim))
    else:
        pts = rng.uniform(np.asarray(d.low), np.asarray(d.high), size=(count, dim))
    return Ensemble(pts, np.full(count, 1.0 / count), int(d.seed), d.descriptor())


def delta_ensemble(state: ClassicalState) -> Ensemble:
    return Ensemble(state.point()[None, :], np.ones(1), None,
                    {"kind": "delta", "state": state.point().tolist()})
