import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from e2m import nn
from e2m.geometry import sample_simplex
from e2m.gradcheck import check_backprop, check_entropy_gradient, random_points, rel_error
from e2m.spaces import make_space

DELTA = 1e-10


class TestInit:
    def test_deterministic(self):
        a, b = nn.init_params([3, 5, 4], 11), nn.init_params([3, 5, 4], 11)
        for x, y in zip(a.arrays(), b.arrays()):
            np.testing.assert_array_equal(x, y)

    def test_needs_hidden_layer(self):
        with pytest.raises(nn.NetworkError):
            nn.init_params([3, 4], 0)

    def test_rejects_zero_width(self):
        with pytest.raises(nn.NetworkError):
            nn.init_params([3, 0, 4], 0)

    def test_he_scale(self):
        p = nn.init_params([8, 10000, 2], 0)
        assert abs(p.weights[0].std() - 0.5) < 0.1
        np.testing.assert_array_equal(p.biases[0], 0.0)

    def test_layer_dims(self):
        assert nn.init_params([3, 5, 6, 4], 0).layer_dims == [3, 5, 6, 4]


class TestForward:
    def test_zero_head_uniform(self):
        p = nn.init_params([3, 5, 4], 0)
        p.weights[-1][:] = 0.0
        w, _ = nn.forward(np.ones(3), p)
        np.testing.assert_allclose(w, 0.25, atol=1e-15)

    def test_logits_log3(self):
        p = nn.init_params([1, 1, 2], 0)
        p.weights[-1][:] = 0.0
        p.biases[-1][:] = [0.0, np.log(3.0)]
        w, _ = nn.forward(np.zeros(1), p)
        np.testing.assert_allclose(w, [0.25, 0.75], atol=1e-15)

    def test_eval_deterministic(self, rng):
        p = nn.init_params([4, 6, 3], 1)
        x = rng.normal(size=4)
        a, _ = nn.forward(x, p, 0.3, "eval")
        b, _ = nn.forward(x, p, 0.3, "eval")
        np.testing.assert_array_equal(a, b)

    def test_non_finite(self):
        with pytest.raises(nn.NetworkError):
            nn.forward(np.array([1.0, np.nan]), nn.init_params([2, 3, 2], 0))

    def test_feature_mismatch(self):
        with pytest.raises(nn.NetworkError):
            nn.forward(np.ones(3), nn.init_params([2, 3, 2], 0))

    def test_bad_mode(self):
        with pytest.raises(nn.NetworkError):
            nn.forward(np.ones(2), nn.init_params([2, 3, 2], 0), mode="predict")

    def test_batch_shape(self, rng):
        w, _ = nn.forward(rng.normal(size=(7, 4)), nn.init_params([4, 6, 5], 0))
        assert w.shape == (7, 5)

    @given(arrays(np.float64, (5,), elements=st.floats(-1e3, 1e3)))
    def test_output_on_simplex(self, x):
        w, _ = nn.forward(x, nn.init_params([5, 8, 6], 3))
        assert w.min() >= 0
        assert abs(w.sum() - 1) < 1e-12

    def test_softmax_extreme_logits(self):
        w = nn.softmax(np.array([[1e300, 0.0, -1e300]]))
        np.testing.assert_array_equal(w, [[1.0, 0.0, 0.0]])

    def test_dropout_preserves_expectation(self):
        p = nn.init_params([3, 4, 2], 0)
        x = np.array([[0.5, -0.2, 1.0]])
        _, cache = nn.forward(x, p, mode="eval")
        h_eval = cache.inputs[1][0]
        X = np.repeat(x, 100_000, axis=0)
        _, tcache = nn.forward(X, p, 0.3, "train", 0)
        h_train = tcache.inputs[1].mean(axis=0)
        active = h_eval > 0
        np.testing.assert_allclose(h_train[active], h_eval[active], rtol=0.01)

    def test_dropout_only_hidden(self, rng):
        p = nn.init_params([3, 4, 5], 0)
        w, cache = nn.forward(rng.normal(size=(6, 3)), p, 0.5, "train", 1)
        assert len(cache.masks) == 1
        np.testing.assert_allclose(w.sum(axis=1), 1.0)

    def test_dropout_rate_validated(self):
        with pytest.raises(nn.NetworkError):
            nn.forward(np.ones(2), nn.init_params([2, 3, 2], 0), 1.0, "train", 0)


class TestEntropy:
    def test_one_hot(self):
        assert nn.entropy(np.array([1.0, 0.0, 0.0]), DELTA) == pytest.approx(-DELTA, rel=1e-6)

    def test_uniform_four(self):
        assert nn.entropy(np.full(4, 0.25), DELTA) == pytest.approx(np.log(4), abs=1e-8)

    def test_grad_uniform_two(self):
        np.testing.assert_allclose(nn.entropy_grad(np.full(2, 0.5), DELTA), -np.log(0.5) - 1, atol=1e-9)

    def test_grad_formula(self, rng):
        w = rng.dirichlet(np.ones(5))
        np.testing.assert_allclose(nn.entropy_grad(w, DELTA), -np.log(w + DELTA) - w / (w + DELTA))

    def test_grad_fd(self):
        assert check_entropy_gradient(instances=100, seed=1).max_rel_error < 1e-6

    def test_bounds(self, rng):
        for m in (2, 5, 50):
            W = sample_simplex(rng, m, size=10_000 // 3)
            H = nn.entropy(W, DELTA)
            assert H.min() >= -np.log1p(DELTA)
            assert H.max() <= np.log(m) + 1e-6
            assert np.abs(nn.entropy_grad(W, DELTA)).max() <= abs(np.log(DELTA)) + 1

    def test_batch_rows(self, rng):
        W = rng.dirichlet(np.ones(3), size=4)
        np.testing.assert_allclose(nn.entropy(W), [nn.entropy(w) for w in W])


class TestBackprop:
    def test_zero_upstream(self, rng):
        p = nn.init_params([3, 5, 4], 0)
        _, cache = nn.forward(rng.normal(size=(2, 3)), p, 0.3, "train", 0)
        gW, gb = nn.backprop(cache, np.zeros((2, 4)), p)
        assert all(np.all(g == 0) for g in gW + gb)

    def test_constant_upstream(self, rng):
        p = nn.init_params([3, 5, 4], 0)
        _, cache = nn.forward(rng.normal(size=(2, 3)), p, 0.0, "train", 0)
        gW, gb = nn.backprop(cache, np.full((2, 4), 3.0), p)
        assert max(np.abs(g).max() for g in gW + gb) < 1e-14

    def test_shape_mismatch(self, rng):
        p = nn.init_params([3, 5, 4], 0)
        _, cache = nn.forward(rng.normal(size=(2, 3)), p)
        with pytest.raises(nn.NetworkError):
            nn.backprop(cache, np.zeros((2, 3)), p)

    def test_cache_from_other_network(self, rng):
        p = nn.init_params([3, 5, 4], 0)
        q = nn.init_params([3, 5, 5, 4], 0)
        _, cache = nn.forward(rng.normal(size=(2, 3)), p)
        with pytest.raises(nn.NetworkError):
            nn.backprop(cache, np.zeros((2, 4)), q)

    def test_finite_differences(self):
        assert check_backprop(instances=5, seed=3).max_rel_error < 1e-5


SPACE_CASES = [
    ("wasserstein1d", {"M": 15}, 1e-5),
    ("network", {"V": 4}, 1e-5),
    ("spd-power", {"l": 2}, 1e-5),
    ("spd-bw", {"l": 2}, 1e-3),
]


@pytest.mark.parametrize("name,dims,tol", SPACE_CASES)
@pytest.mark.parametrize("lam", [0.0, -0.05, 0.1])
def test_end_to_end_gradient(name, dims, tol, lam):
    """d/dtheta of d^2(mu(w_theta(x)), Y) + lam H(w_theta(x)) against central differences."""
    sp = make_space(name, **dims)
    rng = np.random.default_rng(7)
    m = 4
    anchors = sp.prepare(random_points(sp, m, rng))
    targets = sp.prepare(random_points(sp, 3, rng))
    X = rng.normal(size=(3, 2))
    p = nn.init_params([2, 5, m], 8)
    p.biases = [rng.normal(0, 0.5, size=b.shape) for b in p.biases]

    def objective(q):
        W, _ = nn.forward(X, q)
        losses, _ = sp.batch_loss_grad(W, anchors, targets)
        return float((losses + lam * nn.entropy(W)).sum())

    W, cache = nn.forward(X, p)
    _, grads = sp.batch_loss_grad(W, anchors, targets)
    gW, gb = nn.backprop(cache, grads + lam * nn.entropy_grad(W), p)
    analytic, numeric = [], []
    h = 1e-6
    for arrs, gs in ((p.weights, gW), (p.biases, gb)):
        for a, g in zip(arrs, gs):
            for idx in np.ndindex(a.shape):
                old = a[idx]
                a[idx] = old + h
                up = objective(p)
                a[idx] = old - h
                down = objective(p)
                a[idx] = old
                analytic.append(g[idx])
                numeric.append((up - down) / (2 * h))
    assert rel_error(np.array(analytic), np.array(numeric)) < tol


class TestAdam:
    def test_first_step(self):
        p = nn.MlpParams([np.zeros((1, 1))], [np.zeros(1)])
        g = ([np.ones((1, 1))], [np.ones(1)])
        new, state = nn.adam_step(nn.AdamState(lr=0.1), p, g)
        assert new.weights[0][0, 0] == pytest.approx(-0.1, abs=1e-7)
        assert state.k == 1

    def test_zero_gradient(self, rng):
        p = nn.init_params([3, 4, 2], 0)
        state = nn.AdamState()
        zeros = ([np.zeros_like(w) for w in p.weights], [np.zeros_like(b) for b in p.biases])
        q = p
        for _ in range(5):
            q, state = nn.adam_step(state, q, zeros)
        for a, b in zip(p.arrays(), q.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_recurrences(self, rng):
        p = nn.MlpParams([np.array([[0.5]])], [np.array([0.0])])
        state = nn.AdamState(lr=0.01)
        m = v = 0.0
        theta = 0.5
        for k in range(1, 6):
            g = rng.normal()
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            theta -= 0.01 * (m / (1 - 0.9**k)) / (np.sqrt(v / (1 - 0.999**k)) + 1e-8)
            p, state = nn.adam_step(state, p, ([np.array([[g]])], [np.array([0.0])]))
            assert p.weights[0][0, 0] == pytest.approx(theta, rel=1e-12)
        assert np.all(state.v[0] >= 0)

    def test_deterministic(self, rng):
        p = nn.init_params([3, 4, 2], 0)
        grads = ([rng.normal(size=w.shape) for w in p.weights], [rng.normal(size=b.shape) for b in p.biases])
        a, sa = nn.adam_step(nn.AdamState(), p, grads)
        b, sb = nn.adam_step(nn.AdamState(), p, grads)
        for x, y in zip(a.arrays() + sa.m + sa.v, b.arrays() + sb.m + sb.v):
            np.testing.assert_array_equal(x, y)

    def test_non_finite_gradient(self):
        p = nn.MlpParams([np.zeros((1, 1))], [np.zeros(1)])
        with pytest.raises(nn.NetworkError):
            nn.adam_step(nn.AdamState(), p, ([np.array([[np.inf]])], [np.zeros(1)]))

    def test_shape_mismatch(self):
        p = nn.MlpParams([np.zeros((1, 1))], [np.zeros(1)])
        with pytest.raises(nn.NetworkError):
            nn.adam_step(nn.AdamState(), p, ([np.zeros((2, 1))], [np.zeros(1)]))

    def test_bad_betas(self):
        with pytest.raises(nn.NetworkError):
            nn.AdamState(beta1=1.0)

    def test_inputs_untouched(self, rng):
        p = nn.init_params([2, 3, 2], 0)
        before = [a.copy() for a in p.arrays()]
        grads = ([np.ones_like(w) for w in p.weights], [np.ones_like(b) for b in p.biases])
        nn.adam_step(nn.AdamState(), p, grads)
        for a, b in zip(before, p.arrays()):
            np.testing.assert_array_equal(a, b)
