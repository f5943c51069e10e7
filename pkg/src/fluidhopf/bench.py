"""Benchmark the compiled kernels against the pure-Python fallback.

Run with ``python -m fluidhopf.bench``.  Times the two hot loops (the
semi-Lagrangian march and the Monte Carlo passage sampler) under each
available backend and checks that they agree.
"""

from __future__ import annotations

import time

import numpy as np

from . import _backend, mc
from ._family import pack_family
from .verify import sinusoidal_model


def _time(fn, repeat: int = 3) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_march(impl, n_a: int = 20_000, steps: int = 200) -> float:
    model = sinusoidal_model()
    m = model.m
    rng = np.random.default_rng(1)
    F_next = rng.random((m, n_a))
    F_out = np.empty_like(F_next)
    lam = model.lam(0.3)
    shift = model.space.v * 1e-3 / 1e-3
    base = np.floor(shift).astype(np.int64)
    frac = shift - base

    def run():
        a, b = F_next, F_out
        for _ in range(steps):
            impl.march_step(a, b, lam, base, frac, 1e-3)
            a, b = b, a

    return _time(run)


def bench_mc(impl, n: int = 2_000) -> tuple[float, float]:
    model = sinusoidal_model()
    pack = _backend.prepare_pack(pack_family(model.generator), impl)
    v = np.ascontiguousarray(model.space.v)

    def run():
        acc = 0.0
        for r in range(n):
            gen = mc.replica_rng(7, r)
            tau, hit, cens = impl.run_passage_path(
                gen, pack, v, 0.0, 0, 40.0, 1.0, True
            )
            if not cens:
                acc += tau
        return acc

    t = _time(run)
    return t, run()


def main() -> None:
    backends = {}
    backends["python"] = _backend.get_backend("python")
    try:
        backends["cython"] = _backend.get_backend("cython")
    except (ImportError, ValueError):
        pass
    print(f"active backend: {_backend.BACKEND}")
    checks = {}
    for name, impl in backends.items():
        tm = bench_march(impl)
        tc, acc = bench_mc(impl)
        checks[name] = acc
        print(f"{name:>7}: march {tm * 1e3:8.1f} ms   mc {tc * 1e3:8.1f} ms")
    if len(checks) == 2 and checks["python"] != checks["cython"]:
        diff = abs(checks["python"] - checks["cython"])
        print(f"WARNING: backend results differ by {diff:.3e}")
    elif len(checks) == 2:
        print("backend agreement: exact")


if __name__ == "__main__":
    main()
