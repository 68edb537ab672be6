"""Hot loops: polynomial evaluation over sample batches, ensemble integrators,
compensated density-matrix accumulation, coherent-state products and
truncation-tail weights.

Every kernel has a numba version and a vectorized numpy version with the same
signature.  The module-level names point at the numba versions unless numba
is missing or ``FOCKBRIDGE_DISABLE_NUMBA`` is set; both sets stay reachable
through :data:`BACKENDS` for cross-checks and benchmarks.

Polynomials enter as ``(exps, coefs)`` arrays from
:meth:`PhiPiPolynomial.to_arrays`.  A vector field of ``V`` component
polynomials is packed as ``(exps, coefs, offsets)`` where component ``c`` owns
rows ``offsets[c]:offsets[c+1]``.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# polynomial evaluation


def poly_eval_numpy(exps, coefs, points):
    """Complex values of one polynomial at each row of ``points`` ``(K, V)``."""
    pts = np.asarray(points, dtype=np.complex128)
    if exps.shape[0] == 0:
        return np.zeros(pts.shape[0], dtype=np.complex128)
    mono = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)
    return mono @ coefs


@njit
def poly_eval_numba(exps, coefs, points):
    K, V = points.shape
    T = exps.shape[0]
    out = np.zeros(K, dtype=np.complex128)
    for k in range(K):
        acc = 0j
        for t in range(T):
            m = coefs[t]
            for v in range(V):
                e = exps[t, v]
                x = points[k, v]
                for _ in range(e):
                    m *= x
            acc += m
        out[k] = acc
    return out


def field_eval_numpy(exps, coefs, offsets, points):
    """Real vector field ``(K, V)``; component ``c`` uses rows ``offsets[c]:offsets[c+1]``."""
    pts = np.asarray(points, dtype=np.float64)
    K = pts.shape[0]
    n_comp = offsets.shape[0] - 1
    out = np.zeros((K, n_comp))
    if exps.shape[0] == 0:
        return out
    mono = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2) * coefs.real[None, :]
    for c in range(n_comp):
        out[:, c] = mono[:, offsets[c]:offsets[c + 1]].sum(axis=1)
    return out


@njit
def field_eval_numba(exps, coefs, offsets, points):
    K, V = points.shape
    n_comp = offsets.shape[0] - 1
    out = np.zeros((K, n_comp))
    for k in range(K):
        for c in range(n_comp):
            acc = 0.0
            for t in range(offsets[c], offsets[c + 1]):
                m = coefs[t].real
                for v in range(V):
                    x = points[k, v]
                    for _ in range(exps[t, v]):
                        m *= x
                acc += m
            out[k, c] = acc
    return out


# ---------------------------------------------------------------------------
# integrators over sample batches
#
# Both return (trajectory, status).  trajectory has shape (nsteps + 1, K, V)
# when keep is true, else (1, K, V) holding the final states.  status is
# [failed_step, failed_sample, residual_at_failure, max_iterations_used];
# failed_step = -1 means every fixed-point solve converged.  A state that
# overflows counts as a failure with residual inf.


@njit
def _field_one(exps, coefs, offsets, x, out):
    V = x.shape[0]
    for c in range(offsets.shape[0] - 1):
        acc = 0.0
        for t in range(offsets[c], offsets[c + 1]):
            m = coefs[t].real
            for v in range(V):
                xv = x[v]
                for _ in range(exps[t, v]):
                    m *= xv
            acc += m
        out[c] = acc


@njit
def midpoint_numba(x0, dt, nsteps, exps, coefs, offsets, tol, maxiter, keep):
    K, V = x0.shape
    nrec = nsteps + 1 if keep else 1
    traj = np.empty((nrec, K, V))
    status = np.array([-1.0, -1.0, 0.0, 0.0])
    f = np.empty(V)
    mid = np.empty(V)
    new = np.empty(V)
    for k in range(K):
        x = x0[k].copy()
        if keep:
            traj[0, k] = x
        for s in range(nsteps):
            _field_one(exps, coefs, offsets, x, f)
            for v in range(V):
                new[v] = x[v] + dt * f[v]
            converged = False
            resid = 0.0
            it = 0
            while it < maxiter:
                it += 1
                for v in range(V):
                    mid[v] = 0.5 * (x[v] + new[v])
                _field_one(exps, coefs, offsets, mid, f)
                resid = 0.0
                scale = 1.0
                for v in range(V):
                    cand = x[v] + dt * f[v]
                    d = abs(cand - new[v])
                    if d > resid:
                        resid = d
                    if abs(cand) > scale:
                        scale = abs(cand)
                    new[v] = cand
                if not math.isfinite(scale):
                    resid = math.inf
                    break
                if resid <= tol * scale:
                    converged = True
                    break
            if it > status[3]:
                status[3] = it
            if not converged:
                status[0] = s
                status[1] = k
                status[2] = resid
                return traj, status
            for v in range(V):
                x[v] = new[v]
            if keep:
                traj[s + 1, k] = x
        if not keep:
            traj[0, k] = x
    return traj, status


def midpoint_numpy(x0, dt, nsteps, exps, coefs, offsets, tol, maxiter, keep):
    x = np.array(x0, dtype=np.float64)
    K, V = x.shape
    traj = np.empty((nsteps + 1 if keep else 1, K, V))
    status = np.array([-1.0, -1.0, 0.0, 0.0])
    if keep:
        traj[0] = x
    for s in range(nsteps):
        new = x + dt * field_eval_numpy(exps, coefs, offsets, x)
        done = np.zeros(K, dtype=bool)
        resid = np.zeros(K)
        for it in range(1, maxiter + 1):
            cand = x + dt * field_eval_numpy(exps, coefs, offsets, 0.5 * (x + new))
            resid = np.abs(cand - new).max(axis=1)
            scale = np.maximum(1.0, np.abs(cand).max(axis=1))
            # converged samples keep their accepted value
            new = np.where(done[:, None], new, cand)
            blown = ~np.isfinite(cand).all(axis=1) & ~done
            if blown.any():
                resid = np.where(blown, np.inf, resid)
                break
            done |= resid <= tol * scale
            if done.all():
                break
        status[3] = max(status[3], it)
        if not done.all():
            bad = int(np.flatnonzero(~done)[0])
            status[:3] = (s, bad, resid[bad])
            return traj, status
        x = new
        if keep:
            traj[s + 1] = x
    if not keep:
        traj[0] = x
    return traj, status


@njit
def rk4_numba(x0, dt, nsteps, exps, coefs, offsets, tol, maxiter, keep):
    K, V = x0.shape
    nrec = nsteps + 1 if keep else 1
    traj = np.empty((nrec, K, V))
    status = np.array([-1.0, -1.0, 0.0, 0.0])
    k1 = np.empty(V)
    k2 = np.empty(V)
    k3 = np.empty(V)
    k4 = np.empty(V)
    tmp = np.empty(V)
    for k in range(K):
        x = x0[k].copy()
        if keep:
            traj[0, k] = x
        for s in range(nsteps):
            _field_one(exps, coefs, offsets, x, k1)
            for v in range(V):
                tmp[v] = x[v] + 0.5 * dt * k1[v]
            _field_one(exps, coefs, offsets, tmp, k2)
            for v in range(V):
                tmp[v] = x[v] + 0.5 * dt * k2[v]
            _field_one(exps, coefs, offsets, tmp, k3)
            for v in range(V):
                tmp[v] = x[v] + dt * k3[v]
            _field_one(exps, coefs, offsets, tmp, k4)
            finite = True
            for v in range(V):
                x[v] += dt / 6.0 * (k1[v] + 2.0 * k2[v] + 2.0 * k3[v] + k4[v])
                if not math.isfinite(x[v]):
                    finite = False
            if not finite:
                status[0] = s
                status[1] = k
                status[2] = math.inf
                return traj, status
            if keep:
                traj[s + 1, k] = x
        if not keep:
            traj[0, k] = x
    return traj, status


def rk4_numpy(x0, dt, nsteps, exps, coefs, offsets, tol, maxiter, keep):
    x = np.array(x0, dtype=np.float64)
    K, V = x.shape
    traj = np.empty((nsteps + 1 if keep else 1, K, V))
    if keep:
        traj[0] = x

    def f(y):
        return field_eval_numpy(exps, coefs, offsets, y)

    for s in range(nsteps):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        bad = np.flatnonzero(~np.isfinite(x).all(axis=1))
        if bad.size:
            return traj, np.array([float(s), float(bad[0]), np.inf, 0.0])
        if keep:
            traj[s + 1] = x
    if not keep:
        traj[0] = x
    return traj, np.array([-1.0, -1.0, 0.0, 0.0])


# ---------------------------------------------------------------------------
# density accumulation: rho = sum_k w_k v_k v_k^H with Neumaier summation


def _neumaier_add(s, c, x):
    t = s + x
    c += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
    s[...] = t


def density_numpy(vectors, weights):
    D = vectors.shape[1]
    sr, si, cr, ci = (np.zeros((D, D)) for _ in range(4))
    for k in range(vectors.shape[0]):
        v = vectors[k]
        term = np.outer(v * weights[k], v.conj())
        _neumaier_add(sr, cr, term.real)
        _neumaier_add(si, ci, term.imag)
    return (sr + cr) + 1j * (si + ci)


@njit
def density_numba(vectors, weights):
    K, D = vectors.shape
    sr = np.zeros((D, D))
    si = np.zeros((D, D))
    cr = np.zeros((D, D))
    ci = np.zeros((D, D))
    for k in range(K):
        w = weights[k]
        for i in range(D):
            vi = vectors[k, i] * w
            if vi == 0:
                continue
            for j in range(D):
                p = vi * np.conj(vectors[k, j])
                x = p.real
                t = sr[i, j] + x
                if abs(sr[i, j]) >= abs(x):
                    cr[i, j] += (sr[i, j] - t) + x
                else:
                    cr[i, j] += (x - t) + sr[i, j]
                sr[i, j] = t
                x = p.imag
                t = si[i, j] + x
                if abs(si[i, j]) >= abs(x):
                    ci[i, j] += (si[i, j] - t) + x
                else:
                    ci[i, j] += (x - t) + si[i, j]
                si[i, j] = t
    out = np.empty((D, D), dtype=np.complex128)
    for i in range(D):
        for j in range(D):
            out[i, j] = complex(sr[i, j] + cr[i, j], si[i, j] + ci[i, j])
    return out


# ---------------------------------------------------------------------------
# tensor products of per-mode amplitudes, mode 1 slowest


def mode_product_numpy(amps):
    """``amps`` ``(K, N, L)`` -> ``(K, L**N)`` with mode 1 the slowest index."""
    K, N, L = amps.shape
    out = amps[:, 0, :]
    for j in range(1, N):
        out = (out[:, :, None] * amps[:, j, None, :]).reshape(K, -1)
    return np.ascontiguousarray(out)


@njit
def mode_product_numba(amps):
    K, N, L = amps.shape
    D = L ** N
    out = np.empty((K, D), dtype=np.complex128)
    for k in range(K):
        size = L
        for i in range(L):
            out[k, i] = amps[k, 0, i]
        for j in range(1, N):
            # expand in place from the back so unread entries are not overwritten
            for p in range(size - 1, -1, -1):
                v = out[k, p]
                base = p * L
                for i in range(L):
                    out[k, base + i] = v * amps[k, j, i]
            size *= L
    return out


# ---------------------------------------------------------------------------
# truncation error of normal-ordered expectations on coherent states
#
# For one mode, <P w| (a^+)^i a^j |P w> = conj(z)^i z^j (1 - tail(M - max(i, j)))
# where P projects onto occupations <= M and tail(m) = Pr[n > m].  Modes
# factorize, so the per-term error is |c| prod|z|^(i+j) * (1 - prod(1 - tail)).


def normal_tail_numpy(exps_yz, abscoef, absz, tails, cutoff):
    K, N = absz.shape
    T = exps_yz.shape[0]
    out = np.zeros(K)
    if T == 0:
        return out
    ey = exps_yz[:, :N]
    ez = exps_yz[:, N:]
    mag = np.prod(absz[:, None, :] ** (ey + ez)[None, :, :], axis=2)
    idx = cutoff - np.maximum(ey, ez)  # (T, N)
    kk = np.arange(K)[:, None, None]
    jj = np.arange(N)[None, None, :]
    tl = tails[kk, jj, idx[None, :, :]]  # (K, T, N)
    lost = 1.0 - np.prod(1.0 - tl, axis=2)
    return (mag * lost) @ abscoef


@njit
def normal_tail_numba(exps_yz, abscoef, absz, tails, cutoff):
    K, N = absz.shape
    T = exps_yz.shape[0]
    out = np.zeros(K)
    for k in range(K):
        acc = 0.0
        for t in range(T):
            mag = abscoef[t]
            keep = 1.0
            for j in range(N):
                e = exps_yz[t, j] + exps_yz[t, N + j]
                for _ in range(e):
                    mag *= absz[k, j]
                hi = max(exps_yz[t, j], exps_yz[t, N + j])
                keep *= 1.0 - tails[k, j, cutoff - hi]
            acc += mag * (1.0 - keep)
        out[k] = acc
    return out


BACKENDS = {
    "numpy": {
        "poly_eval": poly_eval_numpy,
        "field_eval": field_eval_numpy,
        "midpoint": midpoint_numpy,
        "rk4": rk4_numpy,
        "density": density_numpy,
        "mode_product": mode_product_numpy,
        "normal_tail": normal_tail_numpy,
    },
    "numba": {
        "poly_eval": poly_eval_numba,
        "field_eval": field_eval_numba,
        "midpoint": midpoint_numba,
        "rk4": rk4_numba,
        "density": density_numba,
        "mode_product": mode_product_numba,
        "normal_tail": normal_tail_numba,
    },
}

BACKEND = "numba" if USE_NUMBA else "numpy"
_active = BACKENDS[BACKEND]

poly_eval = _active["poly_eval"]
field_eval = _active["field_eval"]
midpoint = _active["midpoint"]
rk4 = _active["rk4"]
density = _active["density"]
mode_product = _active["mode_product"]
normal_tail = _active["normal_tail"]
