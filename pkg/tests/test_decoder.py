"""Decoder: gradient oracle, safe step bound, fixed points, determinism."""

import math

import numpy as np
import pytest

from sketchprec import sketch
from sketchprec.decoder import (
    DecoderConfig,
    decode,
    gradient,
    raw_units_to_operator,
    safe_step,
    stable_step,
)
from sketchprec.glasso import GlassoParams, glasso
from sketchprec.symmat import symmetrize


def random_spd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return symmetrize(a @ a.T / d + scale * np.eye(d))


class TestGradient:
    def test_zero_at_exact_fit(self):
        rng = np.random.default_rng(0)
        op = sketch.build_operator("structured", d=8, m=16, seed=1)
        sigma = random_spd(rng, 8)
        s = sketch.sketch_of_matrix(op, sigma)
        g = gradient(op, sigma, s)
        assert np.abs(g).max() <= 1e-15

    def test_zero_sketch(self):
        rng = np.random.default_rng(1)
        op = sketch.build_operator("dense", d=6, m=10, seed=2)
        sigma = random_spd(rng, 6)
        s = sketch.Sketch(
            values=np.zeros(10), m=10, d_orig=6, d_pad=op.d_pad, n=0,
            fingerprint=op.fingerprint,
        )
        g = gradient(op, sigma, s)
        expected = sketch.apply_adjoint(op, sketch.apply_A(op, sigma))
        np.testing.assert_array_equal(g, expected)

    def test_finite_differences(self):
        rng = np.random.default_rng(2)
        h = 1e-6
        for trial in range(20):
            kind = ("structured", "dense")[trial % 2]
            d = int(rng.integers(4, 10))
            op = sketch.build_operator(kind, d=d, m=2 * d, seed=trial)
            sigma = random_spd(rng, d)
            s = sketch.sketch_of_matrix(op, random_spd(rng, d))

            def f(mat):
                r = sketch.apply_A(op, mat) - s.values
                return 0.5 * float(r @ r)

            g = gradient(op, sigma, s)
            for _ in range(5):
                direction = symmetrize(rng.standard_normal((d, d)))
                fd = (f(symmetrize(sigma + h * direction)) - f(symmetrize(sigma - h * direction))) / (2 * h)
                an = float(np.sum(g * direction))
                assert abs(fd - an) <= 1e-5 * max(1.0, abs(an))


class TestSafeStep:
    def test_unbounded_branch(self):
        op = sketch.build_operator("dense", d=6, m=10, seed=3)
        assert math.isinf(safe_step(op, np.eye(6), lam_min_hat=2.0))

    def test_bounded_exactly_when_lam_max_reaches_bound(self):
        op = sketch.build_operator("dense", d=6, m=10, seed=3)
        assert math.isinf(safe_step(op, 0.5 * np.eye(6), lam_min_hat=0.51))
        assert math.isfinite(safe_step(op, 0.5 * np.eye(6), lam_min_hat=0.49))

    def test_structured_specialization(self):
        # Unit columns: bound = m^2 / sigma_max^2 * lam_min / lam_max.
        op = sketch.build_operator("structured", d=16, m=64, seed=4)
        sigma_t = np.diag(np.linspace(1.0, 4.0, 16))
        got = safe_step(op, sigma_t, lam_min_hat=0.0)
        a = sketch.materialize(op)
        smax_sq = np.linalg.eigvalsh(a @ a.T)[-1]
        expected = op.m**2 / smax_sq * (1.0 / 4.0)
        assert got == pytest.approx(expected, rel=1e-6)

    def test_tiny_dense_hand_oracle(self):
        vectors = np.array([[1.0, 0.5], [0.0, 0.5]])  # d=2, m=2, hand-built
        op = sketch.dense_operator_from_vectors(vectors)
        sigma_t = np.diag([2.0, 1.0])
        got = safe_step(op, sigma_t, lam_min_hat=0.0)
        smax_sq = np.linalg.svd(vectors, compute_uv=False)[0] ** 2
        max_col_sq = max(np.sum(vectors**2, axis=0))
        expected = op.m**2 / (max_col_sq * smax_sq) * (1.0 / 2.0)
        assert got == pytest.approx(expected, rel=1e-8)

    def test_requires_spd(self):
        op = sketch.build_operator("dense", d=4, m=6, seed=5)
        with pytest.raises(ValueError):
            safe_step(op, np.diag([1.0, -1.0, 1.0, 1.0]))

    def test_stable_step_is_ratio_free(self):
        op = sketch.build_operator("structured", d=16, m=64, seed=4)
        lam_ratio = safe_step(op, np.diag(np.linspace(1.0, 4.0, 16)))
        assert stable_step(op) == pytest.approx(lam_ratio * 4.0, rel=1e-6)


class TestUnits:
    def test_raw_round_trip(self):
        lam, gamma = raw_units_to_operator(0.008, 0.005, m=1536)
        assert lam == pytest.approx(0.008 / 1536**2)
        assert gamma == pytest.approx(0.005 * 1536**2)
        # the glasso penalty lam * gamma is unit-invariant
        assert lam * gamma == pytest.approx(0.008 * 0.005)

    def test_config_from_raw(self):
        cfg = DecoderConfig.from_raw_units(0.01, 0.1, m=100, t_max=5)
        assert cfg.lam == pytest.approx(1e-6)
        assert cfg.gamma == pytest.approx(1e3)
        cfg2 = DecoderConfig.from_raw_units(0.01, "safe_auto", m=100, t_max=5)
        assert cfg2.gamma == "safe_auto"
        assert cfg2.lam == pytest.approx(1e-6)


class TestDecode:
    def test_fingerprint_mismatch(self):
        op1 = sketch.build_operator("structured", d=8, m=16, seed=1)
        op2 = sketch.build_operator("structured", d=8, m=16, seed=2)
        s = sketch.sketch_of_matrix(op1, np.eye(8))
        with pytest.raises(ValueError, match="fingerprint"):
            decode(op2, s, DecoderConfig(lam=0.0, gamma=1.0, t_max=1))

    def test_single_step_tiny_gamma_is_pure_denoise(self):
        rng = np.random.default_rng(6)
        op = sketch.build_operator("structured", d=8, m=16, seed=7)
        target = random_spd(rng, 8)
        s = sketch.sketch_of_matrix(op, target)
        sigma0 = random_spd(rng, 8)
        lam_op = 4.0  # with gamma = 1e-18, penalty = 4e-18: essentially lam -> 0
        res = decode(op, s, DecoderConfig(lam=lam_op, gamma=1e-18, t_max=1, init=sigma0))
        direct = glasso(sigma0, GlassoParams(lam=lam_op * 1e-18, tol=1e-6))
        # both solves stop on a 1e-6 duality gap, so agreement is at that level
        np.testing.assert_allclose(res.estimate.covariance, direct.covariance, atol=3e-7)

    def test_fixed_point_stays_put(self):
        rng = np.random.default_rng(7)
        # inverse-sparse target: diagonal sigma, exact sketch, lam -> 0
        sigma_star = np.diag(rng.uniform(1.0, 3.0, size=8))
        op = sketch.build_operator("structured", d=8, m=32, seed=8)
        s = sketch.sketch_of_matrix(op, sigma_star)
        res = decode(
            op, s,
            DecoderConfig(lam=1e-16, gamma="safe_auto", t_max=5, init=sigma_star),
        )
        assert np.linalg.norm(res.estimate.covariance - sigma_star) <= 1e-8

    def test_identity_recovery(self):
        d = 16
        op = sketch.build_operator("structured", d=d, m=d * d // 2, seed=9)
        s = sketch.sketch_of_matrix(op, np.eye(d))
        res = decode(op, s, DecoderConfig(lam=1e-4 / op.m**2, gamma="stable", t_max=60))
        re_w = np.linalg.norm(res.estimate.covariance - np.eye(d)) / np.sqrt(d)
        re_t = np.linalg.norm(res.estimate.precision - np.eye(d)) / np.sqrt(d)
        assert re_w <= 0.05 and re_t <= 0.05

    def test_deterministic(self):
        rng = np.random.default_rng(10)
        op = sketch.build_operator("structured", d=8, m=24, seed=11)
        s = sketch.sketch_of_matrix(op, random_spd(rng, 8))
        cfg = DecoderConfig(lam=1e-3 / op.m**2, gamma="stable", t_max=20, record_trace=True)
        r1 = decode(op, s, cfg)
        r2 = decode(op, s, cfg)
        assert np.array_equal(r1.estimate.covariance, r2.estimate.covariance)
        assert np.array_equal(r1.estimate.precision, r2.estimate.precision)
        assert np.array_equal(r1.objective_trace, r2.objective_trace)
        assert r1.gamma_used == r2.gamma_used

    def test_safe_auto_no_violations(self):
        # Safe steps must never hand the denoiser an indefinite iterate.
        rng = np.random.default_rng(12)
        for trial in range(3):
            d = 16
            op = sketch.build_operator("structured", d=d, m=4 * d, seed=trial)
            s = sketch.sketch_of_matrix(op, random_spd(rng, d))
            res = decode(op, s, DecoderConfig(lam=1e-6, gamma="safe_auto", t_max=40))
            assert res.spd_violations == 0
            assert np.linalg.eigvalsh(res.estimate.covariance)[0] > 0

    def test_trace_recorded_and_finite(self):
        rng = np.random.default_rng(13)
        op = sketch.build_operator("dense", d=6, m=12, seed=14)
        s = sketch.sketch_of_matrix(op, random_spd(rng, 6))
        res = decode(op, s, DecoderConfig(lam=1e-8, gamma="stable", t_max=15, record_trace=True))
        assert res.objective_trace.shape == (15,)
        assert np.isfinite(res.objective_trace).all()

    def test_early_stop_breaks_at_plateau(self):
        op = sketch.build_operator("structured", d=8, m=32, seed=15)
        sigma_star = np.diag(np.linspace(1.0, 2.0, 8))
        s = sketch.sketch_of_matrix(op, sigma_star)
        res = decode(
            op, s,
            DecoderConfig(lam=1e-16, gamma="stable", t_max=500, init=sigma_star, early_stop=True),
        )
        assert res.iterations < 500

    def test_nonfinite_iterate_aborts(self):
        rng = np.random.default_rng(16)
        op = sketch.build_operator("dense", d=6, m=12, seed=17)
        s = sketch.sketch_of_matrix(op, random_spd(rng, 6))
        with pytest.raises(FloatingPointError):
            decode(op, s, DecoderConfig(lam=0.0, gamma=1e200, t_max=3, init=2 * np.eye(6)))

    def test_validation(self):
        with pytest.raises(ValueError):
            DecoderConfig(lam=-1.0, gamma=1.0, t_max=1)
        with pytest.raises(ValueError):
            DecoderConfig(lam=0.0, gamma=0.0, t_max=1)
        with pytest.raises(ValueError):
            DecoderConfig(lam=0.0, gamma="bogus", t_max=1)
        with pytest.raises(ValueError):
            DecoderConfig(lam=0.0, gamma=1.0, t_max=0)
