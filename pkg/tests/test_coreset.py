import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lewis_coreset.coreset import Coreset, coreset_error, derive_seed, draw_coreset, full_coreset
from lewis_coreset.data import gen_synthetic
from lewis_coreset.errors import DimMismatch, ParseError, ZeroMass
from lewis_coreset.losses import HINGE, LOGISTIC, total_loss, weighted_loss
from lewis_coreset.weights import (
    WeightVector,
    lewis_weights,
    sampling_probabilities,
    uniform_distribution,
)


def _unit_betas(k, d, seed):
    B = np.random.default_rng(seed).standard_normal((k, d))
    return B / np.linalg.norm(B, axis=1, keepdims=True)


class TestDraw:
    def test_uniform_weights(self):
        p = sampling_probabilities(uniform_distribution(40), 10)
        core = draw_coreset(p, 10, seed=3)
        assert core.m == 10
        np.testing.assert_allclose(core.weights, 4.0)
        assert core.indices.min() >= 0 and core.indices.max() < 40

    def test_degenerate_distribution(self):
        m = 7
        p = WeightVector(np.array([m, 0, 0, 0], dtype=float), "sampling_prob", m)
        core = draw_coreset(p, m, seed=0)
        np.testing.assert_array_equal(core.indices, 0)
        assert core.weights.sum() == pytest.approx(1.0, abs=1e-15)

    def test_determinism(self):
        p = sampling_probabilities(uniform_distribution(1000), 100)
        a = draw_coreset(p, 100, derive_seed(5, "lewis", 100, 0))
        b = draw_coreset(p, 100, derive_seed(5, "lewis", 100, 0))
        c = draw_coreset(p, 100, derive_seed(5, "lewis", 100, 1))
        assert a.to_csv() == b.to_csv()
        assert not np.array_equal(a.indices, c.indices)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            draw_coreset(np.ones(5), 3)
        with pytest.raises(ZeroMass):
            draw_coreset(np.zeros(5), 3)

    def test_frequencies_match_rates(self):
        p = WeightVector(np.array([1.0, 2.0, 7.0]), "sampling_prob", 10.0)
        core = draw_coreset(p, 10, seed=0)
        counts = np.zeros(3)
        for t in range(2000):
            core = draw_coreset(p, 10, seed=t)
            counts += np.bincount(core.indices, minlength=3)
        freq = counts / counts.sum()
        np.testing.assert_allclose(freq, [0.1, 0.2, 0.7], atol=0.01)

    def test_unbiased(self):
        Z = gen_synthetic(300, 4, skew=1, seed=2).Z
        beta = np.array([0.5, -0.2, 0.1, 0.3])
        p = sampling_probabilities(lewis_weights(Z).weights, 50)
        est = np.array([weighted_loss(draw_coreset(p, 50, seed=s), Z, beta, LOGISTIC) for s in range(400)])
        se = est.std(ddof=1) / math.sqrt(est.size)
        assert abs(est.mean() - total_loss(Z, beta, LOGISTIC)) < 4 * se

    def test_merged(self):
        core = Coreset([3, 1, 3], [1.0, 2.0, 0.5]).merged()
        np.testing.assert_array_equal(core.indices, [1, 3])
        np.testing.assert_allclose(core.weights, [2.0, 1.5])


class TestSerialization:
    def test_csv_round_trip(self, tmp_path):
        p = sampling_probabilities(lewis_weights(gen_synthetic(200, 3, seed=1).Z).weights, 30)
        core = draw_coreset(p, 30, derive_seed(0, "x"), d=3)
        path = tmp_path / "c.csv"
        core.save(path)
        back = Coreset.load(path)
        np.testing.assert_array_equal(back.indices, core.indices)
        np.testing.assert_array_equal(back.weights, core.weights)
        assert (back.n, back.d, back.source_kind) == (200, 3, "lewis")

    def test_bad_csv(self):
        with pytest.raises(ParseError):
            Coreset.from_csv("index,weight\n1,2\n")
        with pytest.raises(ParseError):
            Coreset.from_csv('# {}\nindex,weight\n1,abc\n')

    def test_validation(self):
        with pytest.raises(ValueError):
            Coreset([0, 1], [1.0])
        with pytest.raises(ValueError):
            Coreset([0], [0.0])


class TestCoresetError:
    def test_identity(self):
        Z = gen_synthetic(50, 3, seed=0).Z
        err = coreset_error(full_coreset(50), Z, HINGE, _unit_betas(5, 3, 0))
        assert err.max_additive == pytest.approx(0.0, abs=1e-10)
        assert err.max_relative == pytest.approx(0.0, abs=1e-12)

    def test_zero_beta_logistic(self):
        Z = gen_synthetic(50, 3, seed=0).Z
        core = Coreset([0, 4, 4], [10.0, 3.0, 20.0])
        err = coreset_error(core, Z, LOGISTIC, np.zeros((1, 3)))
        assert err.max_additive == pytest.approx(abs(33 - 50) * math.log(2), rel=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            coreset_error(full_coreset(3), np.eye(3), HINGE, np.zeros((1, 2)))

    @pytest.mark.slow
    def test_lewis_beats_uniform_paired(self):
        Z = gen_synthetic(10_000, 10, skew=3, seed=0).Z
        betas = _unit_betas(100, 10, 1)
        p_l = sampling_probabilities(lewis_weights(Z).weights, 2000)
        p_u = sampling_probabilities(uniform_distribution(Z.shape[0]), 2000)
        wins = 0
        for s in range(100):
            el = coreset_error(draw_coreset(p_l, 2000, derive_seed(s, "lewis")), Z, HINGE, betas).max_relative
            eu = coreset_error(draw_coreset(p_u, 2000, derive_seed(s, "uniform")), Z, HINGE, betas).max_relative
            wins += el < eu
        assert wins >= 80

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_nonnegative_and_normalized_bound(self, seed):
        rng = np.random.default_rng(seed)
        Z = rng.standard_normal((30, 2))
        core = Coreset(rng.integers(0, 30, 5), rng.uniform(0.5, 10, 5))
        err = coreset_error(core, Z, HINGE, _unit_betas(4, 2, seed))
        assert np.all(err.additive >= 0)
        assert np.all(err.normalized <= err.additive / 30 + 1e-15)
