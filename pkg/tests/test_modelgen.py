"""Ground-truth generator and sampling tests."""

import numpy as np
import pytest

from sketchprec import modelgen
from sketchprec.symmat import symmetrize


class TestGenerate:
    def test_erdos_d64_nnz_range(self):
        gt = modelgen.generate(modelgen.GeneratorSpec("erdos", d=64, num_blocks=8, p=0.2, seed=1))
        # 8 blocks of 8 at p=0.2: about 45 edges expected, nnz = 64 + 2 * edges
        assert 100 <= gt.nnz <= 900
        assert gt.nnz == 64 + 2 * len(gt.support)

    def test_tiny_p_is_diagonal(self):
        gt = modelgen.generate(modelgen.GeneratorSpec("erdos", d=16, num_blocks=4, p=1e-9, seed=2))
        assert len(gt.support) == 0
        assert np.all(np.diag(gt.theta) >= 0.1 - 1e-9)
        off = gt.theta.copy()
        np.fill_diagonal(off, 0.0)
        assert np.all(off == 0.0)

    def test_inverse_consistency(self):
        for seed in range(5):
            gt = modelgen.generate(modelgen.GeneratorSpec("erdos", d=32, num_blocks=4, p=0.2, seed=seed))
            d = 32
            assert np.linalg.norm(gt.theta @ gt.sigma - np.eye(d)) <= 1e-8 * np.sqrt(d)

    def test_min_eig_floor_both_kinds(self):
        for kind in ("erdos", "powerlaw"):
            for seed in range(50):
                gt = modelgen.generate(
                    modelgen.GeneratorSpec(kind, d=24, num_blocks=4, p=0.2, seed=seed)
                )
                assert np.linalg.eigvalsh(gt.theta)[0] >= 0.1 - 1e-9

    def test_support_symmetric_pairs(self):
        gt = modelgen.generate(modelgen.GeneratorSpec("erdos", d=32, num_blocks=4, p=0.3, seed=3))
        for i, j in gt.support:
            assert i < j
            assert gt.theta[i, j] == gt.theta[j, i]
            assert abs(gt.theta[i, j]) > 1e-8

    def test_coefficient_magnitudes(self):
        gt = modelgen.generate(modelgen.GeneratorSpec("erdos", d=32, num_blocks=4, p=0.3, seed=4))
        for i, j in gt.support:
            assert 1.0 <= abs(gt.theta[i, j]) <= 4.0

    def test_powerlaw_tree_edge_count(self):
        # A tree on M nodes has M-1 edges; L blocks give L*(M-1) edges.
        gt = modelgen.generate(modelgen.GeneratorSpec("powerlaw", d=64, num_blocks=8, p=0.2, seed=5))
        assert len(gt.support) == 8 * 7

    def test_deterministic(self):
        spec = modelgen.GeneratorSpec("powerlaw", d=32, num_blocks=4, p=0.2, seed=9)
        a = modelgen.generate(spec)
        b = modelgen.generate(spec)
        assert np.array_equal(a.theta, b.theta)

    def test_permutation_preserves_spectrum(self):
        # Regenerate the pre-permutation matrix by undoing the permutation:
        # spectra must match exactly up to sort order.
        spec = modelgen.GeneratorSpec("erdos", d=24, num_blocks=4, p=0.2, seed=11)
        gt = modelgen.generate(spec)
        rng = np.random.Generator(np.random.Philox(spec.seed))
        size = spec.d // spec.num_blocks
        theta_raw = np.zeros((spec.d, spec.d))
        for b in range(spec.num_blocks):
            off = b * size
            edges = modelgen._erdos_block_edges(rng, size, spec.p)
            for i, j in edges:
                u = rng.uniform(1.0, 4.0)
                eps = 1.0 if rng.random() < 0.5 else -1.0
                theta_raw[off + i, off + j] = theta_raw[off + j, off + i] = eps * u
        lam_min = np.linalg.eigvalsh(symmetrize(theta_raw))[0]
        theta_raw = symmetrize(theta_raw) + (0.1 + max(0.0, -lam_min)) * np.eye(spec.d)
        ev_before = np.linalg.eigvalsh(theta_raw)
        ev_after = np.linalg.eigvalsh(gt.theta)
        np.testing.assert_allclose(ev_before, ev_after, atol=1e-10)

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            modelgen.GeneratorSpec("erdos", d=10, num_blocks=3, p=0.2, seed=0)
        with pytest.raises(ValueError):
            modelgen.GeneratorSpec("erdos", d=8, num_blocks=2, p=1.5, seed=0)
        with pytest.raises(ValueError):
            modelgen.GeneratorSpec("banana", d=8, num_blocks=2, p=0.2, seed=0)


class TestSampling:
    def test_large_n_covariance(self):
        gt = modelgen.generate(modelgen.GeneratorSpec("erdos", d=4, num_blocks=1, p=0.3, seed=6))
        n = 100_000
        data = modelgen.sample_gaussian(gt, n, seed=7)
        emp = modelgen.empirical_covariance(data)
        scale = np.abs(gt.sigma).max()
        assert np.abs(emp - gt.sigma).max() <= 5.0 / np.sqrt(n) * 3 * max(1.0, scale)

    def test_identity_mean(self):
        gt = modelgen.GroundTruth(
            theta=np.eye(4), sigma=np.eye(4), support=frozenset(), nnz=4, spec=None
        )
        n = 50_000
        data = modelgen.sample_gaussian(gt, n, seed=8)
        assert np.abs(data.mean(axis=0)).max() <= 4.0 / np.sqrt(n) * 3

    def test_deterministic(self):
        gt = modelgen.generate(modelgen.GeneratorSpec("erdos", d=8, num_blocks=2, p=0.2, seed=1))
        a = modelgen.sample_gaussian(gt, 10, seed=5)
        b = modelgen.sample_gaussian(gt, 10, seed=5)
        assert np.array_equal(a, b)

    def test_n_validation(self):
        gt = modelgen.generate(modelgen.GeneratorSpec("erdos", d=8, num_blocks=2, p=0.2, seed=1))
        with pytest.raises(ValueError):
            modelgen.sample_gaussian(gt, 0, seed=1)


class TestEmpiricalCovariance:
    def test_single_sample(self):
        x = np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_allclose(modelgen.empirical_covariance(x), np.outer(x[0], x[0]))

    def test_sign_flip_pair(self):
        e1 = np.zeros(4)
        e1[0] = 1.0
        data = np.stack([e1, -e1])
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(modelgen.empirical_covariance(data), expected)

    def test_triple_loop_oracle(self):
        rng = np.random.default_rng(10)
        data = rng.standard_normal((7, 5))
        expected = np.zeros((5, 5))
        for row in data:
            for p in range(5):
                for q in range(5):
                    expected[p, q] += row[p] * row[q]
        expected /= 7
        got = modelgen.empirical_covariance(data)
        assert np.abs(got - expected).max() <= 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            modelgen.empirical_covariance(np.zeros((0, 3)))


class TestMembership:
    def test_identity_in_wide_set(self):
        assert modelgen.model_membership(np.eye(5), k=0, a=0.5, b=2.0)

    def test_spectrum_outside(self):
        assert not modelgen.model_membership(np.eye(5), k=0, a=2.0, b=3.0)

    def test_generated_self_consistency(self):
        gt = modelgen.generate(modelgen.GeneratorSpec("erdos", d=24, num_blocks=4, p=0.2, seed=12))
        eigs = np.linalg.eigvalsh(gt.theta)
        assert modelgen.model_membership(gt.theta, k=len(gt.support), a=eigs[0], b=eigs[-1])
        assert not modelgen.model_membership(gt.theta, k=max(0, len(gt.support) - 1), a=eigs[0], b=eigs[-1])

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            modelgen.model_membership(np.eye(3), k=0, a=-1.0, b=1.0)


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        gt = modelgen.generate(modelgen.GeneratorSpec("erdos", d=16, num_blocks=4, p=0.2, seed=13))
        modelgen.save_ground_truth(tmp_path / "gt", gt)
        loaded = modelgen.load_ground_truth(tmp_path / "gt")
        assert np.array_equal(loaded.theta, gt.theta)
        assert np.array_equal(loaded.sigma, gt.sigma)
        assert loaded.support == gt.support
        assert loaded.nnz == gt.nnz
        assert loaded.spec == gt.spec
