import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from e2m.gradcheck import check_space_gradient, random_points
from e2m.spaces import SpaceError, Wasserstein1D
from e2m.spaces.wasserstein import (
    gaussian_quantiles,
    prob_grid,
    quantile_from_samples,
    quantiles_from_histogram,
)


@pytest.fixture
def space():
    return Wasserstein1D(100)


def test_grid():
    g = prob_grid(4)
    np.testing.assert_allclose(g, [0.125, 0.375, 0.625, 0.875])
    with pytest.raises(SpaceError):
        prob_grid(1)


class TestDistance:
    def test_zero(self, space):
        q = space.gaussian(0, 1)
        assert space.w2_distance(q, q) == 0.0

    def test_shift(self, space):
        assert space.w2_distance(space.gaussian(0, 1), space.gaussian(1, 1)) == pytest.approx(1.0, abs=1e-14)

    def test_scale_change(self, space):
        # closed form |sd1 - sd2| = 1; the midpoint grid truncates the tails
        d = space.w2_distance(space.gaussian(0, 1), space.gaussian(0, 2))
        assert abs(d - 1.0) < 0.1

    def test_grid_mismatch(self, space):
        with pytest.raises(SpaceError):
            space.w2_distance(np.zeros(100), np.zeros(50))


class TestFrechetMean:
    def test_one_hot(self, space):
        anchors = random_points(space, 3, np.random.default_rng(0))
        np.testing.assert_array_equal(space.frechet_mean([0, 1, 0], anchors), anchors[1])

    def test_equal_weights_gaussians(self, space):
        mean = space.frechet_mean([0.5, 0.5], [space.gaussian(0, 1), space.gaussian(2, 1)])
        np.testing.assert_allclose(mean, space.gaussian(1, 1), atol=1e-14)

    def test_matches_brute_force(self, rng):
        sp = Wasserstein1D(20)
        for _ in range(5):
            anchors = random_points(sp, 3, rng)
            w = rng.dirichlet(np.ones(3))
            assert sp.distance(sp.frechet_mean(w, anchors), oracles.wasserstein_mean(w, anchors)) < 1e-6

    def test_translation_equivariance(self, space, rng):
        anchors = random_points(space, 4, rng)
        w = rng.dirichlet(np.ones(4))
        np.testing.assert_allclose(space.frechet_mean(w, anchors + 3.0), space.frechet_mean(w, anchors) + 3.0, atol=1e-13)

    def test_linear_in_weights(self, space, rng):
        anchors = random_points(space, 4, rng)
        w1, w2 = rng.dirichlet(np.ones(4), size=2)
        a = 0.3
        lhs = space.frechet_mean(a * w1 + (1 - a) * w2, anchors)
        rhs = a * space.frechet_mean(w1, anchors) + (1 - a) * space.frechet_mean(w2, anchors)
        np.testing.assert_allclose(lhs, rhs, atol=1e-13)

    def test_simplex_violation(self, space):
        with pytest.raises(SpaceError):
            space.frechet_mean([0.7, 0.7], random_points(space, 2, np.random.default_rng(0)))


class TestGradient:
    def test_identical_anchors(self, space):
        q = space.gaussian(1, 2)
        g = space.loss_grad_w([0.2, 0.3, 0.5], [q, q, q], space.gaussian(0, 1))
        np.testing.assert_allclose(g, g[0], rtol=1e-14)

    def test_target_at_mean(self, space, rng):
        anchors = random_points(space, 3, rng)
        w = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(space.loss_grad_w(w, anchors, space.frechet_mean(w, anchors)), 0.0, atol=1e-12)

    def test_closed_form(self, space, rng):
        anchors = random_points(space, 3, rng)
        target = random_points(space, 1, rng)[0]
        w = np.array([0.2, 0.3, 0.5])
        resid = w @ anchors - target
        expected = 2 / space.M * anchors @ resid
        np.testing.assert_allclose(space.loss_grad_w(w, anchors, target), expected, rtol=1e-12)

    def test_finite_differences(self, space):
        assert check_space_gradient(space, instances=100, seed=2).max_rel_error < 1e-6


class TestSamples:
    def test_four_samples(self):
        np.testing.assert_array_equal(quantile_from_samples([4, 2, 3, 1], prob_grid(4)), [1, 2, 3, 4])

    def test_constant(self):
        np.testing.assert_array_equal(quantile_from_samples([2.5] * 7, prob_grid(10)), 2.5)

    def test_single(self):
        np.testing.assert_array_equal(quantile_from_samples([-1.0], prob_grid(10)), -1.0)

    def test_empty(self):
        with pytest.raises(SpaceError):
            quantile_from_samples([], prob_grid(10))

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50), st.randoms())
    def test_permutation_invariant_and_monotone(self, xs, rnd):
        grid = prob_grid(13)
        shuffled = list(xs)
        rnd.shuffle(shuffled)
        q = quantile_from_samples(xs, grid)
        np.testing.assert_array_equal(q, quantile_from_samples(shuffled, grid))
        assert np.all(np.diff(q) >= 0)


class TestGaussian:
    def test_degenerate(self):
        np.testing.assert_array_equal(gaussian_quantiles(0, 0, prob_grid(10)), 0.0)

    def test_median_node(self):
        q = gaussian_quantiles(2, 1, prob_grid(101))
        assert q[50] == pytest.approx(2.0, abs=1e-15)

    def test_upper_tail_node(self):
        # p = 0.975 is the node k = 98 of the 100-point midpoint grid
        grid = prob_grid(100)
        assert grid[97] == pytest.approx(0.975)
        q = gaussian_quantiles(1.0, 2.0, grid)
        assert q[97] == pytest.approx(1.0 + 1.959964 * 2.0, abs=1e-6)

    def test_negative_sd(self):
        with pytest.raises(SpaceError):
            gaussian_quantiles(0, -1, prob_grid(10))


class TestHistogram:
    def test_single_bin_uniform(self):
        grid = prob_grid(10)
        np.testing.assert_allclose(quantiles_from_histogram([0, 1], [5], grid), grid, atol=1e-15)

    def test_support_containment(self):
        q = quantiles_from_histogram([0, 1, 2, 3], [0, 7, 0], prob_grid(50))
        assert q.min() >= 1 and q.max() <= 2

    def test_two_bins_median(self):
        q = quantiles_from_histogram([0, 1, 2], [1, 1], prob_grid(101))
        assert q[50] == pytest.approx(1.0, abs=1e-14)

    def test_zero_mass(self):
        with pytest.raises(SpaceError):
            quantiles_from_histogram([0, 1, 2], [0, 0], prob_grid(10))

    def test_bad_edges(self):
        with pytest.raises(SpaceError):
            quantiles_from_histogram([0, 0, 1], [1, 1], prob_grid(10))

    @given(st.lists(st.floats(0, 100), min_size=1, max_size=12).filter(lambda c: sum(c) > 0))
    def test_monotone(self, counts):
        q = quantiles_from_histogram(np.arange(len(counts) + 1.0), counts, prob_grid(40))
        assert np.all(np.diff(q) >= -1e-12)


class TestValidation:
    def test_decreasing(self, space):
        q = space.gaussian(0, 1)[::-1]
        assert space.validate(q)

    def test_tolerance(self, space):
        q = np.zeros(100)
        q[5] = -5e-10
        assert space.validate(q) == []

    def test_projection_restores_monotonicity(self, space, rng):
        coords = rng.normal(size=(3, 100))
        fixed = space.project(coords)
        for q in fixed:
            assert space.validate(q) == []
        # already monotone input is left unchanged
        mono = np.sort(coords, axis=1)
        np.testing.assert_allclose(space.project(mono), mono, atol=1e-14)
