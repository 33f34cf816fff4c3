import math

import numpy as np
import pytest

from bcpnn.errors import DataError
from bcpnn.network import LayerSpec, Projection, infer
from bcpnn.oracle import ToyDataset, enumerate_posterior, exact_statistics


class TestExactStatistics:
    def test_frequencies(self):
        toy = ToyDataset(LayerSpec(1, 2), 2, (((0,), 0, 3), ((1,), 1, 1)))
        traces = exact_statistics(toy)
        np.testing.assert_array_equal(traces.p_src, [0.75, 0.25])
        np.testing.assert_array_equal(traces.p_tgt, [0.75, 0.25])
        np.testing.assert_array_equal(traces.p_joint, [[0.75, 0.0], [0.0, 0.25]])
        assert traces.k_p == 0.0

    def test_single_repeated_sample(self):
        toy = ToyDataset(LayerSpec(2, 3), 2, (((1, 2), 1, 5),))
        joint = exact_statistics(toy).p_joint
        assert joint[1, 1] == joint[5, 1] == 1.0
        assert joint.sum() == 2.0

    def test_uniform_cells_give_zero_weights(self):
        cells = tuple(((a,), y, 1) for a in range(3) for y in range(2))
        toy = ToyDataset(LayerSpec(1, 3), 2, cells)
        proj = Projection(toy.src, toy.tgt, exact_statistics(toy))
        np.testing.assert_allclose(proj.weights, 0.0, atol=1e-15)

    def test_marginals_consistent(self):
        toy = ToyDataset.random(np.random.default_rng(9), max_hc=3, max_mc=4)
        traces = exact_statistics(toy)
        mc = toy.src.mc_per_hc
        blocks = traces.p_joint.reshape(toy.src.n_hc, mc, toy.n_target)
        np.testing.assert_allclose(blocks.sum(axis=1), np.tile(traces.p_tgt, (toy.src.n_hc, 1)), atol=1e-15)
        np.testing.assert_allclose(blocks.sum(axis=2).ravel(), traces.p_src, atol=1e-15)


class TestEnumeratePosterior:
    def test_independent_feature_gives_prior(self):
        toy = ToyDataset(LayerSpec(1, 2), 2, (
            ((0,), 0, 1), ((1,), 0, 1), ((0,), 1, 3), ((1,), 1, 3)))
        np.testing.assert_allclose(enumerate_posterior(toy, (0,)), [0.25, 0.75], atol=1e-15)

    def test_deterministic_feature(self):
        toy = ToyDataset(LayerSpec(1, 2), 2, (((0,), 0, 1), ((1,), 1, 1)))
        post = enumerate_posterior(toy, (0,))
        # the unseen pairing is floored to eps relative to 0.5
        assert post[1] == pytest.approx(1e-8 / 0.5, rel=1e-6)

    def test_two_features_by_hand(self):
        samples = (((0, 0), 0, 2), ((0, 1), 0, 1), ((1, 1), 1, 2), ((0, 1), 1, 1))
        toy = ToyDataset(LayerSpec(2, 2), 2, samples)
        # y=0: p=1/2, p(x0=0,y)=1/2, p(x1=1,y)=1/6; p(x0=0)=2/3, p(x1=1)=2/3
        # y=1: p=1/2, p(x0=0,y)=1/6, p(x1=1,y)=1/2
        s0 = math.log(0.5) + math.log(0.5 / (2 / 3 * 0.5)) + math.log((1 / 6) / (2 / 3 * 0.5))
        s1 = math.log(0.5) + math.log((1 / 6) / (2 / 3 * 0.5)) + math.log(0.5 / (2 / 3 * 0.5))
        expected = np.exp([s0, s1]) / np.exp([s0, s1]).sum()
        np.testing.assert_allclose(enumerate_posterior(toy, (0, 1)), expected, atol=1e-15)

    def test_feature_order_irrelevant(self):
        toy = ToyDataset.random(np.random.default_rng(4), max_hc=3)
        flipped = ToyDataset(toy.src, toy.n_target,
                             tuple((a[::-1], y, c) for a, y, c in toy.samples))
        obs = toy.samples[0][0]
        np.testing.assert_allclose(enumerate_posterior(toy, obs),
                                   enumerate_posterior(flipped, obs[::-1]), atol=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(DataError):
            ToyDataset(LayerSpec(1, 2), 2, ())
        with pytest.raises(DataError):
            ToyDataset(LayerSpec(1, 2), 2, (((2,), 0, 1),))
        toy = ToyDataset(LayerSpec(1, 2), 2, (((0,), 0, 1),))
        with pytest.raises(DataError):
            enumerate_posterior(toy, (0, 1))


def test_vectorized_inference_agrees_on_random_toys():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(100):
        toy = ToyDataset.random(rng)
        proj = Projection(toy.src, toy.tgt, exact_statistics(toy))
        for assignment, _, _ in toy.samples:
            fast = infer(toy.one_hot(assignment), proj)
            worst = max(worst, float(np.abs(fast - enumerate_posterior(toy, assignment)).max()))
    assert worst <= 1e-9
