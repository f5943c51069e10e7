"""Model construction, generator evaluation, and structural validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluidhopf import (
    GeneratorFamily,
    InvalidGenerator,
    InvalidRates,
    StateSpace,
    block_decompose,
    eval_generator,
    validate_model,
)


class TestStateSpace:
    def test_partition(self):
        sp = StateSpace(["a", "b", "c"], [1.0, -2.0, 0.5])
        assert list(sp.plus_indices) == [0, 2]
        assert list(sp.minus_indices) == [1]
        assert sp.m_plus == 2 and sp.m_minus == 1
        assert sp.v_max == 2.0 and sp.v_min == 0.5

    def test_zero_rate_rejected(self):
        with pytest.raises(InvalidRates):
            StateSpace(["a", "b"], [1.0, 0.0])

    def test_single_sign_rejected(self):
        with pytest.raises(InvalidRates):
            StateSpace(["a", "b"], [1.0, 2.0])

    def test_needs_two_states(self):
        with pytest.raises(InvalidRates):
            StateSpace(["a"], [1.0])


class TestEvalGenerator:
    def test_constant_returns_matrix(self):
        fam = GeneratorFamily.constant([[-1.0, 1.0], [0.0, 0.0]])
        for s in (0.0, 0.7, 100.0):
            np.testing.assert_array_equal(
                eval_generator(fam, s), [[-1.0, 1.0], [0.0, 0.0]]
            )

    def test_fourier_at_zero_phase(self):
        base = np.array([[-1.0, 1.0], [1.0, -1.0]])
        fam = GeneratorFamily.fourier_polynomial(
            base, fourier_terms=[(0.5 * base, 1.0, 0.0)], bound_K=1.5
        )
        np.testing.assert_allclose(eval_generator(fam, 0.0), base, atol=1e-15)

    def test_piecewise_right_continuous(self):
        la = [[-1.0, 1.0], [1.0, -1.0]]
        lb = [[-2.0, 2.0], [2.0, -2.0]]
        fam = GeneratorFamily.piecewise_constant([1.0], [la, lb])
        np.testing.assert_array_equal(eval_generator(fam, 0.999), la)
        np.testing.assert_array_equal(eval_generator(fam, 1.0), lb)

    def test_pure(self):
        base = np.array([[-1.0, 1.0], [1.0, -1.0]])
        fam = GeneratorFamily.fourier_polynomial(
            base, fourier_terms=[(0.5 * base, 1.3, 0.2)], bound_K=1.5
        )
        a = eval_generator(fam, 0.37)
        b = eval_generator(fam, 0.37)
        np.testing.assert_array_equal(a, b)

    def test_bad_row_sum_raises(self):
        fam = GeneratorFamily.constant([[-1.0, 0.5], [0.0, 0.0]])
        with pytest.raises(InvalidGenerator):
            eval_generator(fam, 0.0)


class TestValidateModel:
    def test_remark_chain_valid(self):
        sp = StateSpace(["p", "m"], [1.0, -1.0])
        fam = GeneratorFamily.constant([[-1.0, 1.0], [0.0, 0.0]])
        assert validate_model(sp, fam).ok

    def test_row_sum_violation_reported(self):
        sp = StateSpace(["p", "m"], [1.0, -1.0])
        fam = GeneratorFamily(kind="constant", m=2, bound_K=1.0,
                              matrix=np.array([[-1.0, 0.5], [0.0, 0.0]]))
        rep = validate_model(sp, fam)
        assert not rep.ok
        assert any(v.kind == "row_sum" for v in rep.violations)

    def test_scaled_sinusoid_valid(self):
        sp = StateSpace(["p", "m"], [1.0, -1.0])
        base = np.array([[-1.0, 1.0], [1.0, -1.0]])
        fam = GeneratorFamily.fourier_polynomial(
            base, fourier_terms=[(0.5 * base, 1.0, 0.0)], bound_K=1.5
        )
        assert validate_model(sp, fam, check_resolution=1e-2).ok

    def test_negative_offdiag_flagged(self):
        sp = StateSpace(["p", "m"], [1.0, -1.0])
        base = np.array([[-1.0, 1.0], [1.0, -1.0]])
        # amplitude 2 drives the off-diagonal negative for some s
        fam = GeneratorFamily.fourier_polynomial(
            base, fourier_terms=[(2.0 * base, 1.0, 0.0)], bound_K=3.0
        )
        rep = validate_model(sp, fam, check_resolution=1e-2)
        assert any(v.kind == "negative_offdiag" for v in rep.violations)

    def test_bound_violation_flagged(self):
        sp = StateSpace(["p", "m"], [1.0, -1.0])
        fam = GeneratorFamily(
            kind="constant", m=2, bound_K=0.5,
            matrix=np.array([[-1.0, 1.0], [1.0, -1.0]]),
        )
        rep = validate_model(sp, fam)
        assert any(v.kind == "bound_exceeded" for v in rep.violations)

    def test_piecewise_flagged_as_relaxed(self):
        sp = StateSpace(["p", "m"], [1.0, -1.0])
        fam = GeneratorFamily.piecewise_constant(
            [1.0], [[[-1.0, 1.0], [1.0, -1.0]], [[-2.0, 2.0], [2.0, -2.0]]]
        )
        rep = validate_model(sp, fam)
        assert rep.ok
        assert any("assumption-relaxed" in n for n in rep.notes)


class TestBlockDecompose:
    def test_two_state(self):
        sp = StateSpace(["p", "m"], [1.0, -1.0])
        b = block_decompose([[-1.0, 1.0], [0.0, 0.0]], sp)
        assert b.A == np.array([[-1.0]]) and b.B == np.array([[1.0]])
        assert b.C == np.array([[0.0]]) and b.D == np.array([[0.0]])

    def test_interleaved_roundtrip(self):
        sp = StateSpace(["a", "b", "c"], [1.0, -1.0, 2.0])
        mat = np.arange(9.0).reshape(3, 3)
        blocks = block_decompose(mat, sp)
        np.testing.assert_array_equal(blocks.reassemble(sp), mat)

    def test_symmetric_three_state(self):
        sp = StateSpace(["a", "b", "c"], [1.0, -1.0, -2.0])
        mat = np.array([[-2.0, 1.0, 1.0], [1.0, -2.0, 1.0], [1.0, 1.0, -2.0]])
        b = block_decompose(mat, sp)
        np.testing.assert_array_equal(b.A, [[-2.0]])
        np.testing.assert_array_equal(b.B, [[1.0, 1.0]])
        np.testing.assert_array_equal(b.C, [[1.0], [1.0]])
        np.testing.assert_array_equal(b.D, [[-2.0, 1.0], [1.0, -2.0]])

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(2, 6),
        st.integers(0, 2**32 - 1),
    )
    def test_roundtrip_random(self, m, seed):
        rng = np.random.default_rng(seed)
        v = rng.uniform(0.5, 2.0, m)
        signs = np.where(rng.random(m) < 0.5, 1.0, -1.0)
        signs[0], signs[1] = 1.0, -1.0
        sp = StateSpace([f"s{k}" for k in range(m)], v * signs)
        mat = rng.normal(size=(m, m))
        np.testing.assert_array_equal(block_decompose(mat, sp).reassemble(sp), mat)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(0.1, 2.0), st.floats(0.0, 6.0))
def test_family_invariants_on_random_samples(s, amp_scale, phase):
    """Off-diagonals stay nonnegative, rows sum to zero, bound respected."""
    base = np.array([[-1.0, 1.0], [1.0, -1.0]])
    fam = GeneratorFamily.fourier_polynomial(
        base, fourier_terms=[(0.5 * amp_scale / 2.0 * base, 1.0, phase)],
        bound_K=1.0 + 0.25 * amp_scale,
    )
    lam = eval_generator(fam, s)
    off = lam - np.diag(np.diag(lam))
    assert np.all(off >= 0.0)
    assert np.max(np.abs(lam.sum(axis=1))) <= 1e-12
    assert np.max(np.abs(lam)) <= fam.bound_K + 1e-12
