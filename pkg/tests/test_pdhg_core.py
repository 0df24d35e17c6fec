import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import canonical_norm_dense, dense_pdhg, enumerate_vertices

from conftest import as_lp, oracle_corpus
from rhpdhg.lp_model import StandardFormLP
from rhpdhg.pdhg_core import (CanonicalNorm, Iterate, NormError, StepSize, StepSizeError, apply_operator,
                              canonical_norm, fixed_point_residual, kkt_error, pdhg_step)


class TestPdhgStep:
    def test_e1_from_origin(self, e1):
        z = pdhg_step(Iterate([0.0], [0.0]), e1, 0.5)
        assert z.x.tolist() == [0.0] and z.y.tolist() == [-0.5]

    def test_e1_fixed_point(self, e1):
        z = pdhg_step(Iterate([1.0], [0.0]), e1, 0.5)
        assert z.x.tolist() == [1.0] and z.y.tolist() == [0.0]

    def test_e1_projection_active(self, e1):
        z = pdhg_step(Iterate([-5.0], [0.0]), e1, 0.5)
        assert z.x.tolist() == [0.0] and z.y.tolist() == [2.0]

    def test_unconstrained_skips_projection(self, e1):
        z = pdhg_step(Iterate([-5.0], [0.0]), e1, 0.5, unconstrained=True)
        assert z.x.tolist() == [-5.0]

    def test_dimension_mismatch(self, e1):
        with pytest.raises(ValueError):
            pdhg_step(Iterate([0.0, 1.0], [0.0]), e1, 0.5)

    def test_cached_product_matches(self):
        rng = np.random.default_rng(0)
        lp = as_lp(oracle_corpus(1)[0])
        eta = lp.default_step_size()
        x, y = rng.random(lp.n), rng.standard_normal(lp.m)
        plain = apply_operator(x, y, lp, eta)
        cached = apply_operator(x, y, lp, eta, lp.A.to_dense() @ x)
        for a, b in zip(plain, cached):
            np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(1)
        for o in oracle_corpus(5):
            lp = as_lp(o)
            eta = lp.default_step_size()
            x, y = rng.standard_normal(lp.n), rng.standard_normal(lp.m)
            z = pdhg_step(Iterate(x, y), lp, eta)
            xd, yd = dense_pdhg(x, y, o.A, o.b, o.c, eta)
            np.testing.assert_allclose(z.x, xd, atol=1e-13)
            np.testing.assert_allclose(z.y, yd, atol=1e-13)
            assert np.all(z.x >= 0)


class TestStepSize:
    def test_rejects_large(self, primal_infeasible):
        with pytest.raises(StepSizeError):
            StepSize.for_lp(primal_infeasible, 0.5)

    def test_accepts_exact_bound(self, primal_infeasible):
        assert StepSize.for_lp(primal_infeasible, 1 / (2 * math.sqrt(2))).eta > 0

    def test_rejects_nonpositive(self):
        with pytest.raises(StepSizeError):
            StepSize(0.0)


class TestCanonicalNorm:
    def test_e1_values(self, e1):
        assert canonical_norm(Iterate([1.0], [0.0]), e1, 0.5) == pytest.approx(math.sqrt(2), rel=1e-15)
        assert canonical_norm(Iterate([1.0], [1.0]), e1, 0.5) == pytest.approx(math.sqrt(2), rel=1e-15)
        assert canonical_norm(Iterate([0.0], [0.0]), e1, 0.5) == 0.0

    def test_negative_form_is_error(self, e1):
        # eta = 2 makes the form indefinite: 0.5 - 2 + 0.5 < 0
        with pytest.raises(NormError):
            canonical_norm(Iterate([1.0], [1.0]), e1, 2.0)

    def test_class_rejects_large_eta(self, e1):
        with pytest.raises(StepSizeError):
            CanonicalNorm(e1, 1.0)

    def test_matches_dense(self):
        rng = np.random.default_rng(2)
        for o in oracle_corpus(5):
            lp = as_lp(o)
            eta = lp.default_step_size()
            x, y = rng.standard_normal(lp.n), rng.standard_normal(lp.m)
            assert canonical_norm(Iterate(x, y), lp, eta) == pytest.approx(
                canonical_norm_dense(x, y, o.A, eta), rel=1e-13)
            assert CanonicalNorm(lp, eta)(Iterate(x, y)) == canonical_norm(Iterate(x, y), lp, eta)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_norm_equivalence(self, seed):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        A = rng.standard_normal((m, n))
        lp = StandardFormLP.from_dense(A, np.zeros(m), np.zeros(n))
        eta = 1.0 / (2.0 * np.linalg.norm(A, 2))
        z = Iterate(rng.standard_normal(n), rng.standard_normal(m))
        two = z.norm2()
        val = canonical_norm(z, lp, eta)
        assert math.sqrt(1 / (2 * eta)) * two <= val + 1e-10
        assert val <= math.sqrt(2 / eta) * two + 1e-10


class TestResidual:
    def test_e1(self, e1):
        assert fixed_point_residual(Iterate([1.0], [0.0]), e1, 0.5) == 0.0
        assert fixed_point_residual(Iterate([0.0], [0.0]), e1, 0.5) == pytest.approx(math.sqrt(0.5), rel=1e-15)

    def test_definitional(self):
        rng = np.random.default_rng(3)
        lp = as_lp(oracle_corpus(1)[0])
        eta = lp.default_step_size()
        z = Iterate(rng.standard_normal(lp.n), rng.standard_normal(lp.m))
        assert fixed_point_residual(z, lp, eta) == canonical_norm(z - pdhg_step(z, lp, eta), lp, eta)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_nonexpansive(self, seed):
        rng = np.random.default_rng(seed)
        o = oracle_corpus(1, seed=seed % 1000)[0]
        lp = as_lp(o)
        eta = 1.0 / (2.0 * np.linalg.norm(o.A, 2))
        z = Iterate(rng.standard_normal(lp.n) * 3, rng.standard_normal(lp.m) * 3)
        w = Iterate(rng.standard_normal(lp.n) * 3, rng.standard_normal(lp.m) * 3)
        lhs = canonical_norm(pdhg_step(z, lp, eta) - pdhg_step(w, lp, eta), lp, eta)
        assert lhs <= canonical_norm(z - w, lp, eta) + 1e-10


class TestKkt:
    def test_e1_optimum(self, e1):
        k = kkt_error(Iterate([1.0], [0.0]), e1)
        assert (k.primal_residual, k.dual_residual, k.gap_residual, k.max_relative) == (0, 0, 0, 0)

    def test_e1_origin(self, e1):
        k = kkt_error(Iterate([0.0], [0.0]), e1)
        assert k.primal_residual == 0.5 and k.dual_residual == 0.0 and k.gap_residual == 0.0
        assert k.max_relative == 0.5

    def test_zero_data_scaling(self):
        lp = StandardFormLP.from_dense([[1.0, -2.0]], [0.0], [0.0, 0.0])
        for t in (0.0, 1.0, 7.5):
            assert kkt_error(Iterate([t, t], [-t]), lp).dual_residual >= 0.0
            assert kkt_error(Iterate([t, t], [0.0]), lp).dual_residual == 0.0

    def test_fixed_points_are_kkt_points(self):
        for o in oracle_corpus(5):
            lp = as_lp(o)
            vs = enumerate_vertices(o.A, o.b, o.c)
            z = Iterate(vs.optimal_vertices[0], vs.dual)
            eta = lp.default_step_size()
            assert kkt_error(z, lp).max_relative <= 1e-9
            assert fixed_point_residual(z, lp, eta) <= 1e-9 * 100
            # and a perturbed point is neither
            bumped = Iterate(z.x + 0.1, z.y)
            assert kkt_error(bumped, lp).max_relative > 1e-3
            assert fixed_point_residual(bumped, lp, eta) > 1e-3
