import numpy as np
import pytest

from hiertomo.neural.layers import Dense, Network
from hiertomo.neural.training import (
    AdamState,
    TrainingError,
    adam_step,
    build_model_input,
    infer,
    loss_l2,
    loss_l2_grad,
    train,
    weight_penalty,
)

FAST = {"epochs": 5, "batch_size": 8, "learning_rate": 0.001,
        "standardize_inputs": True, "standardize_targets": True}


class TestLoss:
    def test_unsquared_norm_examples(self):
        # single residual of length 5: loss is exactly 5, not 25
        p = np.zeros((1, 25))
        t = np.zeros((1, 25))
        t[0, 0] = 3.0
        t[0, 1] = 4.0
        assert loss_l2(p, t) == pytest.approx(5.0)

        # batch mean: norms 5 and 0 average to 2.5
        p2 = np.zeros((2, 25))
        t2 = np.zeros((2, 25))
        t2[0, :2] = [3.0, 4.0]
        assert loss_l2(p2, t2) == pytest.approx(2.5)

    def test_zero_loss_at_perfect_fit(self):
        x = np.random.default_rng(0).random((4, 7))
        assert loss_l2(x, x) == 0.0

    def test_grad_matches_finite_difference(self):
        rng = np.random.default_rng(1)
        p = rng.random((3, 6))
        t = rng.random((3, 6))
        g = loss_l2_grad(p, t)
        h = 1e-7
        for _ in range(20):
            i, j = rng.integers(3), rng.integers(6)
            pp = p.copy(); pp[i, j] += h
            pm = p.copy(); pm[i, j] -= h
            want = (loss_l2(pp, t) - loss_l2(pm, t)) / (2 * h)
            assert g[i, j] == pytest.approx(want, rel=1e-5)

    def test_grad_zero_row_at_zero_residual(self):
        p = np.ones((2, 3))
        t = p.copy()
        t[1] += 1.0
        g = loss_l2_grad(p, t)
        assert np.array_equal(g[0], np.zeros(3))
        assert np.linalg.norm(g[1]) > 0

    def test_shape_mismatch(self):
        with pytest.raises(TrainingError):
            loss_l2(np.zeros((2, 3)), np.zeros((2, 4)))


class TestAdam:
    def _toy_net(self):
        w = np.array([[1.0, 2.0]])
        return Network([Dense(w, np.array([0.0]), activation="linear",
                              name="d")], input_shape=(2,), arch="toy")

    def test_first_step_moves_by_lr(self):
        # with zero moment history the first bias-corrected step is
        # lr * g / (|g| + eps), i.e. almost exactly lr in magnitude
        net = self._toy_net()
        state = AdamState.for_network(net)
        cfg = {"learning_rate": 0.1, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}
        grads = [{"weight": np.array([[0.5, -2.0]]), "bias": np.array([3.0])}]
        adam_step(net, grads, state, cfg)
        assert np.allclose(net.layers[0].weight, [[0.9, 2.1]], atol=1e-8)
        assert np.allclose(net.layers[0].bias, [-0.1], atol=1e-8)
        assert state.t == 1

    def test_second_step_moment_accumulation(self):
        net = self._toy_net()
        state = AdamState.for_network(net)
        cfg = {"learning_rate": 0.1, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}
        g = [{"weight": np.array([[1.0, 0.0]]), "bias": np.array([0.0])}]
        adam_step(net, g, state, cfg)
        adam_step(net, g, state, cfg)
        # constant gradient: mhat/sqrt(vhat) stays 1, so two full lr steps
        assert net.layers[0].weight[0, 0] == pytest.approx(0.8, abs=1e-6)

    def test_zero_gradient_is_fixed_point(self):
        net = self._toy_net()
        state = AdamState.for_network(net)
        cfg = {"learning_rate": 0.1, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}
        g = [{"weight": np.zeros((1, 2)), "bias": np.zeros(1)}]
        adam_step(net, g, state, cfg)
        assert np.array_equal(net.layers[0].weight, [[1.0, 2.0]])

    def test_weight_penalty_excludes_bias(self):
        net = self._toy_net()
        net.layers[0].bias = np.array([100.0])
        assert weight_penalty(net, 0.5) == pytest.approx(0.5 * (1 + 4))


class TestTrain:
    def test_history_and_loss_decrease(self, params, lines, sensitivity, mesh, pinv):
        from hiertomo.phantom import build_dataset
        ds = build_dataset(5, params, lines, sensitivity, mesh,
                           n_single=24, n_double=24, n_train=40, n_test=8)
        tr = ds.train_idx
        a1 = np.stack([ds.samples[i].a_nu1 for i in tr])
        a2 = np.stack([ds.samples[i].a_nu2 for i in tr])
        t = np.stack([ds.samples[i].t_vec for i in tr])
        x = build_model_input("h-cnn", a1, a2)
        cfg = dict(FAST, epochs=25)
        model, hist = train("h-cnn", x, t, cfg, seed=0)
        assert len(hist) == 25
        assert all(h["loss_k"] > 0 for h in hist)
        # training must make real progress on its own data
        assert hist[-1]["loss_k"] < 0.5 * hist[0]["loss_k"]
        # Kelvin-scale loss starts near the raw target spread
        assert 100.0 < hist[0]["loss_k"] < 50000.0

        # inference returns raw Kelvin despite standardized training
        pred = infer(model, a1[0], a2[0])
        assert pred.shape == (1964,)
        assert 250.0 < pred.mean() < 700.0

    def test_overfit_single_sample(self, params, lines, sensitivity, mesh):
        from hiertomo.phantom import draw_sample
        s = draw_sample(np.random.default_rng(3), params, 1, lines,
                        sensitivity, mesh)
        x = build_model_input("h-cnn", s.a_nu1, s.a_nu2)
        t = s.t_vec[None, :]
        cfg = dict(FAST, epochs=200, batch_size=1, learning_rate=0.01)
        model, hist = train("h-cnn", x, np.repeat(t, 4, axis=0)[:1], cfg, seed=1)
        assert hist[-1]["loss_k"] < 1.0  # sub-Kelvin residual norm

    def test_determinism(self):
        rng = np.random.default_rng(7)
        x = rng.random((16, 8, 4, 2))
        t = 300.0 + 300.0 * rng.random((16, 1964))
        m1, h1 = train("d-cnn", x, t, FAST, seed=4)
        m2, h2 = train("d-cnn", x, t, FAST, seed=4)
        assert [h["loss_k"] for h in h1] == [h["loss_k"] for h in h2]
        for (_, _, p1), (_, _, p2) in zip(m1.network.parameters(),
                                          m2.network.parameters()):
            assert np.array_equal(p1, p2)

    def test_seed_changes_init(self):
        rng = np.random.default_rng(7)
        x = rng.random((8, 8, 4, 2))
        t = rng.random((8, 1964))
        m1, _ = train("d-cnn", x, t, dict(FAST, epochs=1), seed=0)
        m2, _ = train("d-cnn", x, t, dict(FAST, epochs=1), seed=1)
        assert not np.array_equal(m1.network.parameters()[0][2],
                                  m2.network.parameters()[0][2])

    def test_l2_penalty_shrinks_weights(self):
        rng = np.random.default_rng(8)
        x = rng.random((8, 8, 4, 2))
        t = np.zeros((8, 1964))
        cfg0 = dict(FAST, epochs=10, l2_penalty=0.0,
                    standardize_targets=False)
        cfg1 = dict(cfg0, l2_penalty=0.1)
        m0, _ = train("h-cnn", x, t, cfg0, seed=2)
        m1, _ = train("h-cnn", x, t, cfg1, seed=2)
        n0 = sum(np.sum(p * p) for _, nm, p in m0.network.parameters() if nm == "weight")
        n1 = sum(np.sum(p * p) for _, nm, p in m1.network.parameters() if nm == "weight")
        assert n1 < n0

    def test_empty_training_set(self):
        with pytest.raises(TrainingError):
            train("h-cnn", np.zeros((0, 8, 4, 2)), np.zeros((0, 1964)), FAST)


class TestModelInput:
    def test_pi_cnn_requires_pinv(self):
        with pytest.raises(TrainingError):
            build_model_input("pi-cnn", np.ones(32), np.ones(32), None)

    def test_pi_cnn_input_matches_pre_reconstruction(self, pinv):
        from hiertomo.pinv import pre_reconstruct
        rng = np.random.default_rng(0)
        a1, a2 = rng.random(32), rng.random(32)
        x = build_model_input("pi-cnn", a1, a2, pinv)
        c1, c2 = pre_reconstruct(a1, a2, pinv)
        assert x.shape == (1, 40, 40, 2)
        assert np.allclose(x[0, ..., 0], c1) and np.allclose(x[0, ..., 1], c2)

    def test_measurement_input_shape(self):
        x = build_model_input("d-cnn", np.ones((6, 32)), np.ones((6, 32)))
        assert x.shape == (6, 8, 4, 2)
