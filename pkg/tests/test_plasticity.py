import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bcpnn.network import LayerSpec, ProbabilityTraces, Projection
from bcpnn.plasticity import (
    BiasRegulator,
    FlipRecord,
    StructuralState,
    bias_gain_target,
    flip_connections,
    gain_floor,
    init_mask,
    mutual_information,
    normalized_mi,
    update_bias_gain,
)

k_halves = st.floats(-1000, 0.999, allow_nan=False)
p_maxents = st.sampled_from([1 / n for n in (2, 3, 5, 10, 20, 100, 1000)])


class TestBiasGainTarget:
    def test_half_maxent_is_k_half(self):
        assert bias_gain_target(0.005, -100.0, 0.01) == -100.0

    def test_saturated_unit_near_one(self):
        g = bias_gain_target(1.0, -100.0, 0.01)
        # 1 - 101 * 0.0025**2 / 0.9975**2
        assert g == pytest.approx(1 - 101 * 0.0025**2 / 0.9975**2, rel=1e-14)
        assert abs(g - 1.0) < 1e-2

    def test_at_maxent(self):
        assert bias_gain_target(0.01, -5.0, 0.01) == pytest.approx(1 / 3, abs=1e-15)

    def test_pole_is_clamped(self):
        g = bias_gain_target(0.0025, -100.0, 0.01)
        assert g == gain_floor(-100.0) == -400.0

    @settings(max_examples=300, deadline=None)
    @given(k_halves, p_maxents)
    def test_exact_at_half_maxent(self, k_half, pm):
        assert bias_gain_target(pm / 2, k_half, pm) == k_half

    @settings(max_examples=200, deadline=None)
    @given(k_halves, p_maxents, st.lists(st.floats(0, 1), min_size=2, max_size=30))
    def test_monotone_upper_branch(self, k_half, pm, ps):
        p = np.sort(pm / 2 + (1 - pm / 2) * np.asarray(ps))
        g = bias_gain_target(p, k_half, pm)
        assert np.all(np.diff(g) >= -1e-12)

    @settings(max_examples=200, deadline=None)
    @given(k_halves, p_maxents, arrays(np.float64, 16, elements=st.floats(0, 1)))
    def test_bounded(self, k_half, pm, p):
        g = bias_gain_target(p, k_half, pm)
        assert np.isfinite(g).all()
        assert np.all((g >= gain_floor(k_half)) & (g <= 1.0))


class TestUpdateBiasGain:
    def reg(self, k_beta, k_half=-100.0, tau_k=0.1, mc=100):
        return BiasRegulator.for_layer(LayerSpec(1, mc), k_half, tau_k,
                                       np.full(mc, k_beta, dtype=float))

    def test_fixed_point_unchanged(self):
        p = np.linspace(0.0, 1.0, 100)
        reg = self.reg(0.0)
        reg.k_beta[:] = reg.target(p)
        before = reg.k_beta.copy()
        update_bias_gain(reg, p, 0.01)
        np.testing.assert_array_equal(reg.k_beta, before)

    def test_one_step_by_hand(self):
        reg = self.reg(1.0, tau_k=0.1)
        update_bias_gain(reg, np.full(100, 0.005), 0.01)
        np.testing.assert_allclose(reg.k_beta, -9.1, rtol=1e-14)

    def test_geometric_rate(self):
        reg = self.reg(1.0, k_half=-5.0, tau_k=1.0)
        p = np.full(100, 0.01)
        errors = []
        for _ in range(100):
            update_bias_gain(reg, p, 0.05)
            errors.append(reg.k_beta[0] - 1 / 3)
        ratios = np.array(errors[1:]) / np.array(errors[:-1])
        np.testing.assert_allclose(ratios, 0.95, rtol=1e-8)

    @settings(max_examples=200, deadline=None)
    @given(k_halves, arrays(np.float64, 10, elements=st.floats(0, 1)),
           st.floats(-400, 1), st.floats(1e-3, 1))
    def test_never_nonfinite(self, k_half, p, k0, rate):
        reg = BiasRegulator.for_layer(LayerSpec(1, 10), k_half, 1.0, np.full(10, k0))
        update_bias_gain(reg, p, rate)
        assert np.isfinite(reg.k_beta).all()
        assert np.all(reg.k_beta <= 1.0) and np.all(reg.k_beta >= reg.g_floor)


def projection_from(joint_blocks, src, tgt):
    """Projection whose traces are the given joint with matching marginals."""
    joint = np.asarray(joint_blocks, float)
    p_src = joint.reshape(src.n_units, tgt.n_hc, tgt.mc_per_hc).sum(-1)[:, 0]
    p_tgt = joint.reshape(src.n_hc, src.mc_per_hc, tgt.n_units).sum(1)[0]
    return Projection(src, tgt, ProbabilityTraces(p_src, p_tgt, joint, 1.0))


class TestMutualInformation:
    def test_perfect_correlation(self):
        proj = projection_from([[0.5, 0.0], [0.0, 0.5]], LayerSpec(1, 2), LayerSpec(1, 2))
        mi = mutual_information(proj)
        assert mi.shape == (1, 1)
        assert mi[0, 0] == pytest.approx(math.log(2.0), abs=1e-7)

    def test_independence(self):
        proj = projection_from(np.outer([0.3, 0.7], [0.2, 0.8]), LayerSpec(1, 2), LayerSpec(1, 2))
        assert mutual_information(proj)[0, 0] == pytest.approx(0.0, abs=1e-15)

    def test_silent_pairs_still_scored(self):
        src, tgt = LayerSpec(2, 2), LayerSpec(1, 2)
        joint = np.array([[0.5, 0.0], [0.0, 0.5], [0.25, 0.25], [0.25, 0.25]])
        proj = projection_from(joint, src, tgt)
        proj.mask = np.zeros((2, 1), dtype=bool)
        np.testing.assert_allclose(mutual_information(proj)[:, 0], [math.log(2), 0.0], atol=1e-7)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        src, tgt = LayerSpec(1, 3), LayerSpec(1, 4)
        joint = rng.random((3, 4))
        joint /= joint.sum()
        mi = mutual_information(projection_from(joint, src, tgt))[0, 0]
        permuted = joint[rng.permutation(3)][:, rng.permutation(4)]
        mi_perm = mutual_information(projection_from(permuted, src, tgt))[0, 0]
        assert mi == pytest.approx(mi_perm, rel=1e-12, abs=1e-15)
        assert mi >= -1e-9


class TestNormalizedMI:
    def test_no_outgoing(self):
        mi = np.array([[0.7, 0.2]])
        np.testing.assert_array_equal(normalized_mi(mi, np.zeros((1, 2), bool)), mi)

    def test_two_outgoing(self):
        mi = np.array([[0.9, 0.4, 0.1]])
        ihat = normalized_mi(mi, np.array([[True, False, True]]))
        assert ihat[0, 0] == pytest.approx(0.3, abs=1e-15)


def state_with(mask, n_flips=16):
    mask = np.array(mask, dtype=bool)
    return StructuralState.from_mask(mask, n_flips=n_flips)


class TestFlipConnections:
    # three sources feeding one hidden HC; sources 0 and 1 are each connected
    # once (denominator 2), source 2 is silent everywhere (denominator 1)
    MASK = [[True], [True], [False]]

    def test_swaps_worst_for_best(self):
        state = state_with(self.MASK, n_flips=1)
        flips = flip_connections(state, np.array([[0.2], [1.0], [0.3]]))
        np.testing.assert_array_equal(state.mask[:, 0], [False, True, True])
        assert flips == [FlipRecord(0, 0, 0, 2, 0.1, 0.3)]

    def test_no_improving_candidate(self):
        state = state_with(self.MASK)
        flips = flip_connections(state, np.array([[0.2], [1.0], [0.05]]))
        np.testing.assert_array_equal(state.mask[:, 0], [True, True, False])
        assert flips == []
        assert state.events == 1

    def test_zero_flips(self):
        state = state_with(self.MASK, n_flips=0)
        flip_connections(state, np.array([[0.0], [0.0], [5.0]]))
        np.testing.assert_array_equal(state.mask[:, 0], [True, True, False])

    def test_scale_invariant_choices(self):
        rng = np.random.default_rng(5)
        mask = rng.random((12, 4)) < 0.4
        mi = rng.random((12, 4))
        a, b = state_with(mask), state_with(mask)
        fa, fb = flip_connections(a, mi), flip_connections(b, 3.7 * mi)
        np.testing.assert_array_equal(a.mask, b.mask)
        assert [(f.hidden_hc, f.removed, f.added) for f in fa] == \
               [(f.hidden_hc, f.removed, f.added) for f in fb]

    def test_ties_pick_lowest_index(self):
        state = state_with([[True], [True], [False], [False]], n_flips=1)
        flip_connections(state, np.array([[0.0], [0.0], [1.0], [1.0]]))
        np.testing.assert_array_equal(state.mask[:, 0], [False, True, True, False])

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 7))
    def test_matches_exhaustive_single_flip(self, seed, n_src):
        rng = np.random.default_rng(seed)
        mask = rng.random((n_src, 2)) < 0.5
        mask[0, 0], mask[1, 0] = True, False
        mi = rng.random((n_src, 2))
        ihat = normalized_mi(mi, mask)[:, 0]
        gains = [ihat[b] - ihat[a] for a, b in itertools.product(range(n_src), repeat=2)
                 if mask[a, 0] and not mask[b, 0]]
        flips = [f for f in flip_connections(state_with(mask, n_flips=1), mi)
                 if f.hidden_hc == 0]
        if max(gains) > 0:
            assert len(flips) == 1
            assert flips[0].ihat_added - flips[0].ihat_removed == max(gains)
        else:
            assert flips == []

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 20))
    def test_in_degree_and_strict_gain(self, seed, n_flips):
        rng = np.random.default_rng(seed)
        mask = init_mask(15, 4, 0.3, rng)
        state = state_with(mask, n_flips=n_flips)
        degree = mask.sum(axis=0)
        for _ in range(5):
            before = state.mask.copy()
            flips = flip_connections(state, rng.random((15, 4)))
            np.testing.assert_array_equal(state.mask.sum(axis=0), degree)
            np.testing.assert_array_equal(state.in_degree, degree)
            for f in flips:
                assert f.ihat_added > f.ihat_removed
                assert f.removed != f.added
            assert int((before != state.mask).sum()) <= 2 * len(flips)


class TestInitMask:
    def test_deterministic_and_nonempty(self):
        a = init_mask(784, 30, 0.1, np.random.default_rng([3, 1]))
        b = init_mask(784, 30, 0.1, np.random.default_rng([3, 1]))
        np.testing.assert_array_equal(a, b)
        assert a.sum(axis=0).min() >= 1
        assert abs(a.mean() - 0.1) < 0.02

    def test_empty_columns_repaired(self):
        mask = init_mask(5, 50, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(mask.sum(axis=0), 1)
