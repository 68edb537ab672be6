"""Time the numba kernels against their numpy twins on representative sizes.

Run: python3 benchmarks/bench_kernels.py --repeats 5
"""
import argparse
import math
import time

import numpy as np

from fockbridge import kernels
from fockbridge.bridge import _amplitudes, poisson_tail
from fockbridge.dynamics import HamiltonianSpec
from fockbridge.parsing import parse_phipi
from fockbridge.symbolic import to_yz


def best_of(fn, args, repeats):
    fn(*args)  # warm up, includes JIT compile for numba
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times) * 1000.0


def cases(samples, steps, cutoff):
    rng = np.random.Generator(np.random.Philox(0))
    H = HamiltonianSpec(parse_phipi("(phi[1]^2 + pi[1]^2 + phi[2]^2 + pi[2]^2)/2 + 1/10*phi[1]^4 + 1/20*phi[1]^2*phi[2]^2"))
    x0 = 0.5 * rng.standard_normal((samples, 4))
    z = (x0[:, :2] + 1j * x0[:, 2:]) / math.sqrt(2.0)
    amps = _amplitudes(z, cutoff, True)
    vecs = kernels.BACKENDS["numpy"]["mode_product"](amps)
    w = np.full(samples, 1.0 / samples)
    g = to_yz(parse_phipi("phi[1]^2*pi[2]^2 + phi[2]^3 - pi[1]"))
    exps, coefs = g.to_arrays()
    absz = np.abs(z)
    tails = poisson_tail(np.arange(cutoff + 1)[None, None, :], (absz ** 2)[:, :, None])
    pts = x0.astype(np.complex128)
    return {
        "poly_eval": (*H._energy_arrays, pts),
        "field_eval": (*H._packed, x0),
        "midpoint": (x0, 1e-3, steps, *H._packed, 1e-13, 50, False),
        "rk4": (x0, 1e-3, steps, *H._packed, 1e-13, 50, False),
        "density": (vecs, w),
        "mode_product": (amps,),
        "normal_tail": (np.ascontiguousarray(exps), np.abs(coefs), absz, np.ascontiguousarray(tails), cutoff),
    }


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--cutoff", type=int, default=14)
    p.add_argument("--repeats", type=int, default=5)
    args = p.parse_args()

    print(f"samples={args.samples} steps={args.steps} cutoff={args.cutoff} (two modes, dim {(args.cutoff + 1) ** 2})")
    print(f"{'kernel':<14}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, a in cases(args.samples, args.steps, args.cutoff).items():
        t_np = best_of(kernels.BACKENDS["numpy"][name], a, args.repeats)
        t_nb = best_of(kernels.BACKENDS["numba"][name], a, args.repeats)
        print(f"{name:<14}{t_np:>12.3f}{t_nb:>12.3f}{t_np / max(t_nb, 1e-9):>9.1f}x")


if __name__ == "__main__":
    main()
