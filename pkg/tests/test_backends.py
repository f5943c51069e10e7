"""The compiled kernels and the pure-Python fallback must agree bitwise."""

import numpy as np
import pytest

from fluidhopf import _backend, mc
from fluidhopf._family import pack_family

cython_impl = None
try:
    cython_impl = _backend.get_backend("cython")
except ImportError:
    pass

needs_cython = pytest.mark.skipif(cython_impl is None,
                                  reason="compiled backend not built")


@pytest.fixture(scope="module")
def packs(sinusoidal_model):
    pack = pack_family(sinusoidal_model.generator)
    py = _backend.get_backend("python")
    out = {"python": (py, _backend.prepare_pack(pack, py))}
    if cython_impl is not None:
        out["cython"] = (cython_impl, _backend.prepare_pack(pack, cython_impl))
    return out


@needs_cython
class TestBitwiseEquivalence:
    def test_passage_paths(self, sinusoidal_model, packs):
        v = np.ascontiguousarray(sinusoidal_model.space.v)
        py, pp = packs["python"]
        cy, pc = packs["cython"]
        for r in range(500):
            a = py.run_passage_path(mc.replica_rng(9, r), pp, v, 0.0, r % 2,
                                    40.0, 1.0, True)
            b = cy.run_passage_path(mc.replica_rng(9, r), pc, v, 0.0, r % 2,
                                    40.0, 1.0, True)
            assert a == b

    def test_holding_times(self, packs):
        py, pp = packs["python"]
        cy, pc = packs["cython"]
        for r in range(200):
            ha = py.next_holding(mc.replica_rng(10, r), pp, 0, 0.3, 50.0)
            hb = cy.next_holding(mc.replica_rng(10, r), pc, 0, 0.3, 50.0)
            assert ha == hb

    def test_jump_times(self, packs):
        py, pp = packs["python"]
        cy, pc = packs["cython"]
        for r in range(200):
            a = py.run_jump_times(mc.replica_rng(11, r), pp, 0.0, 0, 60.0, 3)
            b = cy.run_jump_times(mc.replica_rng(11, r), pc, 0.0, 0, 60.0, 3)
            np.testing.assert_array_equal(a, b)

    def test_march_step(self, sinusoidal_model, packs):
        rng = np.random.default_rng(42)
        for _ in range(5):
            n_a = int(rng.integers(50, 400))
            F_next = rng.random((2, n_a))
            lam = sinusoidal_model.lam(float(rng.uniform(0, 5)))
            shift = sinusoidal_model.space.v * 1e-3 / 1.5e-3
            base = np.floor(shift).astype(np.int64)
            frac = shift - base
            o1 = np.empty_like(F_next)
            o2 = np.empty_like(F_next)
            packs["python"][0].march_step(F_next, o1, lam, base, frac, 1e-3)
            packs["cython"][0].march_step(F_next, o2, lam, base, frac, 1e-3)
            np.testing.assert_array_equal(o1, o2)

    def test_piecewise_family(self):
        from fluidhopf import FluidModel, GeneratorFamily, StateSpace

        fam = GeneratorFamily.piecewise_constant(
            [0.8, 2.0],
            [[[-1.0, 1.0], [1.0, -1.0]],
             [[-2.5, 2.5], [0.5, -0.5]],
             [[-0.7, 0.7], [1.2, -1.2]]],
        )
        model = FluidModel(StateSpace(["p", "m"], [1.0, -1.0]), fam)
        pack = pack_family(fam)
        py = _backend.get_backend("python")
        pp = _backend.prepare_pack(pack, py)
        pc = _backend.prepare_pack(pack, cython_impl)
        v = np.ascontiguousarray(model.space.v)
        for r in range(300):
            a = py.run_passage_path(mc.replica_rng(13, r), pp, v, 0.0, 0,
                                    30.0, 0.7, True)
            b = cython_impl.run_passage_path(mc.replica_rng(13, r), pc, v, 0.0,
                                             0, 30.0, 0.7, True)
            assert a == b


def test_active_backend_name():
    assert _backend.BACKEND in ("python", "cython")


def test_bench_smoke(sinusoidal_model):
    from fluidhopf import bench

    py = _backend.get_backend("python")
    assert bench.bench_march(py, n_a=200, steps=3) > 0.0
    t, acc = bench.bench_mc(py, n=20)
    assert t > 0.0 and np.isfinite(acc)


def test_forced_python_backend(sinusoidal_model):
    """The fallback alone produces the documented estimator results."""
    py = _backend.get_backend("python")
    pack = _backend.prepare_pack(pack_family(sinusoidal_model.generator), py)
    v = np.ascontiguousarray(sinusoidal_model.space.v)
    tau, hit, cens = py.run_passage_path(mc.replica_rng(1, 0), pack, v,
                                         0.0, 0, 40.0, 0.5, True)
    assert (cens and tau == np.inf) or (not cens and 0.0 <= tau <= 40.0)
