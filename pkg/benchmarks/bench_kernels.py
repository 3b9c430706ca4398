"""Time the compiled cocycle kernels against the pure-NumPy fallback.

Run from a checkout where the package is installed:

    python benchmarks/bench_kernels.py [--repeats 5]

Prints one table row per kernel with the best-of-N wall time for each
backend and the speedup.  If the compiled extension is unavailable the
script says so and times the fallback alone.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from oseledets_lab import systems
from oseledets_lab._kernels import _pykernels

try:
    from oseledets_lab._kernels import _cykernels
except ImportError:
    _cykernels = None


def _best_of(repeats, fn, *args):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases():
    cat = systems.cat2()
    pert = systems.perturbed_toral([[2, 1], [1, 1]], 0.05)
    hen = systems.henon()
    a3 = systems.a3()
    x2 = np.array([0.3614, 0.7203])
    x3 = np.array([0.3614, 0.7203, 0.1931])
    n = 20000
    for name, sys_ in (("cat2", cat), ("perturbed", pert), ("a3", a3)):
        code, mat, matinv, delta, ha, hb = systems.kernel_args(sys_)
        x0 = x2 if sys_.ambient_dim == 2 else x3
        d = sys_.ambient_dim
        frame = np.linalg.qr(np.random.default_rng(0).normal(size=(d, d)))[0]
        base = _pykernels.orbit_forward(code, mat, delta, ha, hb, x0, 400)[0][:-1]
        yield (
            f"qr_log_history/{name}",
            lambda k, c=code, m=mat: k.qr_log_history(c, m, delta, ha, hb, x0, n, 1, 100),
        )
        yield (
            f"push_frame/{name}",
            lambda k, c=code, m=mat, b=base, f=frame: k.push_frame(
                c, m, delta, ha, hb, b, f, False
            ),
        )
    code, mat, matinv, delta, ha, hb = systems.kernel_args(hen)
    x0 = _pykernels.orbit_forward(code, mat, delta, ha, hb, np.zeros(2), 200)[0][-1]
    yield (
        "orbit_forward/henon",
        lambda k: k.orbit_forward(code, mat, delta, ha, hb, x0, n),
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _cykernels is None:
        print("compiled extension not built; timing the pure-NumPy backend only")
    header = f"{'kernel':32s} {'py (ms)':>10s} {'cy (ms)':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, runner in _cases():
        t_py, out_py = _best_of(args.repeats, runner, _pykernels)
        if _cykernels is None:
            print(f"{name:32s} {1e3 * t_py:10.2f} {'-':>10s} {'-':>8s}")
            continue
        t_cy, out_cy = _best_of(args.repeats, runner, _cykernels)
        a, b = np.asarray(out_py[0], dtype=float), np.asarray(out_cy[0], dtype=float)
        if a.shape != b.shape or not np.allclose(a, b, atol=1e-9):
            raise AssertionError(f"backends disagree on {name}")
        print(f"{name:32s} {1e3 * t_py:10.2f} {1e3 * t_cy:10.2f} {t_py / t_cy:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
