import numpy as np
import pytest

from acot import nn


def tiny_generator(d=1, w=2.0, b=1.0):
    layers = [(np.full((d, d), w), np.full(d, b)) for _ in range(3)]
    return nn.MlpParams(nn.Arch.GENERATOR, layers)


def flatten_params(params):
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()])
                           for w, b in params.layers])


def set_flat(params, flat):
    out = params.copy()
    i = 0
    for li, (w, b) in enumerate(out.layers):
        out.layers[li] = (flat[i:i + w.size].reshape(w.shape).copy(),
                          flat[i + w.size:i + w.size + b.size].copy())
        i += w.size + b.size
    return out


def fd_param_grad(loss_fn, params, h=1e-6):
    """Central finite differences over every parameter entry."""
    flat = flatten_params(params)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        up = flat.copy()
        up[i] += h
        down = flat.copy()
        down[i] -= h
        grad[i] = (loss_fn(set_flat(params, up))
                   - loss_fn(set_flat(params, down))) / (2 * h)
    return grad


class TestForward:
    def test_zero_parameters_give_zero_output(self):
        layers = [(np.zeros((2, 2)), np.zeros(2)) for _ in range(3)]
        p = nn.MlpParams(nn.Arch.GENERATOR, layers)
        np.testing.assert_array_equal(nn.mlp_forward(p, np.ones(2)),
                                      np.zeros(2))

    def test_identity_generator_transparent_on_nonnegative(self):
        layers = [(np.eye(3), np.zeros(3)) for _ in range(3)]
        p = nn.MlpParams(nn.Arch.GENERATOR, layers)
        v = np.array([0.5, 0.0, 2.0])
        np.testing.assert_array_equal(nn.mlp_forward(p, v), v)

    def test_single_unit_hand_computation(self):
        # per layer: 2*a + 1, ReLU transparent: 1 -> 3 -> 7 -> 15
        p = tiny_generator()
        assert nn.mlp_forward(p, np.array([1.0]))[0] == pytest.approx(15.0)

    def test_shape_errors(self):
        p = tiny_generator(d=2)
        with pytest.raises(ValueError):
            nn.mlp_forward(p, np.ones(3))
        with pytest.raises(ValueError):
            nn.mlp_forward(p, np.array([np.nan, 1.0]))

    def test_critic_and_classifier_shapes(self):
        rng = np.random.default_rng(0)
        critic = nn.init_mlp(nn.Arch.CRITIC, 4, rng=rng)
        assert nn.mlp_forward(critic, np.ones(4)).shape == (1,)
        clf = nn.init_mlp(nn.Arch.CLASSIFIER, 4, num_classes=3, rng=rng)
        assert nn.mlp_forward(clf, np.ones((4, 5))).shape == (3, 5)


class TestBackward:
    def test_linear_classifier_outer_product(self):
        rng = np.random.default_rng(1)
        clf = nn.init_mlp(nn.Arch.CLASSIFIER, 4, num_classes=3, rng=rng)
        v = rng.standard_normal(4)
        upstream = rng.standard_normal(3)
        grads, input_grad = nn.mlp_backward(clf, v, upstream)
        np.testing.assert_allclose(grads[0][0], np.outer(upstream, v),
                                   atol=1e-14)
        np.testing.assert_allclose(grads[0][1], upstream, atol=1e-14)
        np.testing.assert_allclose(input_grad, clf.layers[0][0].T @ upstream,
                                   atol=1e-14)

    def test_zero_upstream_gives_zero_gradients(self):
        p = tiny_generator(d=2)
        grads, input_grad = nn.mlp_backward(p, np.ones(2), np.zeros(2))
        for gw, gb in grads:
            assert not gw.any() and not gb.any()
        assert not input_grad.any()

    @pytest.mark.parametrize("arch", [nn.Arch.GENERATOR, nn.Arch.CRITIC])
    def test_matches_finite_differences(self, arch):
        rng = np.random.default_rng(2)
        checked = 0
        attempts = 0
        while checked < 50 and attempts < 500:
            attempts += 1
            d = int(rng.integers(2, 5))
            p = nn.init_mlp(arch, d, rng=rng, scale=0.5)
            v = rng.standard_normal(d)
            _, _, pres = nn._forward_cached(p, v[:, None])
            if min(np.abs(pre).min() for pre in pres[:-1]) < 1e-3:
                continue  # stay away from the ReLU kink
            upstream = rng.standard_normal(p.out_dim)

            def loss(params):
                return float(upstream @ nn.mlp_forward(params, v))

            analytic_list, _ = nn.mlp_backward(p, v, upstream)
            analytic = np.concatenate(
                [np.concatenate([gw.ravel(), gb.ravel()])
                 for gw, gb in analytic_list])
            fd = fd_param_grad(loss, p)
            denom = 1 + np.abs(fd)
            assert np.max(np.abs(analytic - fd) / denom) <= 1e-4
            checked += 1
        assert checked == 50

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        p = nn.init_mlp(nn.Arch.CRITIC, 3, rng=rng, scale=0.5)
        v = rng.standard_normal(3) + 2.0  # away from kinks
        _, input_grad = nn.mlp_backward(p, v, np.ones(1))
        h = 1e-6
        for i in range(3):
            vp = v.copy()
            vp[i] += h
            vm = v.copy()
            vm[i] -= h
            fd = (nn.mlp_forward(p, vp)[0] - nn.mlp_forward(p, vm)[0]) / (2 * h)
            assert input_grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)


class TestRmsprop:
    def test_zero_gradient_leaves_weights(self):
        p = tiny_generator()
        before = [w.copy() for w, _ in p.layers]
        state = nn.init_rmsprop_state(p)
        nn.rmsprop_step(p, nn.zero_like_grads(p), state, lr=1e-4)
        for (w, _), old in zip(p.layers, before):
            np.testing.assert_array_equal(w, old)

    def test_first_step_hand_computation(self):
        # s = 0.01 * 1^2, delta = -1e-4 / (0.1 + 1e-8)
        p = nn.MlpParams(nn.Arch.CLASSIFIER, [(np.zeros((1, 1)), np.zeros(1))])
        state = nn.init_rmsprop_state(p)
        grads = [(np.array([[1.0]]), np.zeros(1))]
        nn.rmsprop_step(p, grads, state, lr=1e-4, decay=0.99, eps=1e-8)
        assert state[0][0][0, 0] == pytest.approx(0.01)
        assert p.layers[0][0][0, 0] == pytest.approx(-1e-4 / (0.1 + 1e-8))

    def test_two_equal_steps_shrink_update(self):
        p = nn.MlpParams(nn.Arch.CLASSIFIER, [(np.zeros((1, 1)), np.zeros(1))])
        state = nn.init_rmsprop_state(p)
        grads = [(np.array([[1.0]]), np.zeros(1))]
        nn.rmsprop_step(p, grads, state, lr=1e-4)
        first = abs(p.layers[0][0][0, 0])
        nn.rmsprop_step(p, grads, state, lr=1e-4)
        second = abs(p.layers[0][0][0, 0]) - first
        assert second < first


class TestClipAndSerialize:
    def test_clip_weights(self):
        p = tiny_generator(d=2, w=5.0, b=-3.0)
        nn.clip_weights(p, 0.01)
        for w, b in p.layers:
            assert np.abs(w).max() <= 0.01 and np.abs(b).max() <= 0.01

    def test_json_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        p = nn.init_mlp(nn.Arch.CRITIC, 3, rng=rng)
        nn.save_mlp(tmp_path / "critic.json", p)
        back = nn.load_mlp(tmp_path / "critic.json")
        assert back.arch == p.arch
        for (w, b), (w2, b2) in zip(p.layers, back.layers):
            np.testing.assert_array_equal(w, w2)
            np.testing.assert_array_equal(b, b2)
