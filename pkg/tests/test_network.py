import time

import numpy as np
import pytest

from hiertomo.neural.layers import (
    AvgPool,
    Conv2D,
    Dense,
    Flatten,
    LayerError,
    MaxPool,
    Network,
)
from hiertomo.neural.specs import (
    ARCHS,
    OUTPUT_DIM,
    build_network,
    measurements_to_input,
)


class TestLayerUnits:
    def test_conv_hand_example(self):
        # 1x3x3x1 input, 2x2 kernel of ones, linear: plain window sums
        x = np.arange(9.0).reshape(1, 3, 3, 1)
        w = np.ones((2, 2, 1, 1))
        conv = Conv2D(w, np.array([1.0]), activation="linear")
        out, _ = conv.forward(x)
        want = np.array([[0 + 1 + 3 + 4, 1 + 2 + 4 + 5],
                         [3 + 4 + 6 + 7, 4 + 5 + 7 + 8]]) + 1.0
        assert np.array_equal(out[0, :, :, 0], want)

    def test_conv_relu_clips_negative(self):
        x = -np.ones((1, 2, 2, 1))
        conv = Conv2D(np.ones((2, 2, 1, 1)), np.zeros(1), activation="relu")
        out, _ = conv.forward(x)
        assert out[0, 0, 0, 0] == 0.0

    def test_leaky_relu_slope(self):
        x = -np.ones((1, 2, 2, 1))
        conv = Conv2D(np.ones((2, 2, 1, 1)), np.zeros(1),
                      activation="leaky_relu", slope=0.01)
        out, _ = conv.forward(x)
        assert out[0, 0, 0, 0] == pytest.approx(-0.04)

    def test_maxpool_values_and_tie_break(self):
        x = np.array([[5.0, 5.0], [1.0, 5.0]]).reshape(1, 2, 2, 1)
        pool = MaxPool((2, 2), (2, 2))
        out, cache = pool.forward(x)
        assert out[0, 0, 0, 0] == 5.0
        dx, _ = pool.backward(np.ones_like(out), cache)
        # tied max routes the gradient to the first window position only
        assert np.array_equal(dx[0, :, :, 0], [[1.0, 0.0], [0.0, 0.0]])

    def test_avgpool_overlapping_stride(self):
        x = np.arange(8.0).reshape(1, 2, 4, 1)
        pool = AvgPool((2, 2), (1, 1))
        out, _ = pool.forward(x)
        assert out.shape == (1, 1, 3, 1)
        assert np.allclose(out[0, 0, :, 0], [(0 + 1 + 4 + 5) / 4,
                                             (1 + 2 + 5 + 6) / 4,
                                             (2 + 3 + 6 + 7) / 4])

    def test_flatten_row_major(self):
        x = np.arange(12.0).reshape(1, 2, 3, 2)
        out, _ = Flatten().forward(x)
        assert np.array_equal(out[0], np.arange(12.0))

    def test_dense_affine(self):
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        d = Dense(w, np.array([0.5, -0.5]), activation="linear")
        out, _ = d.forward(np.array([[1.0, 1.0]]))
        assert np.allclose(out, [[3.5, 6.5]])

    def test_shape_validation(self):
        conv = Conv2D(np.ones((2, 2, 3, 4)), np.zeros(4))
        with pytest.raises(LayerError):
            conv.forward(np.zeros((1, 4, 4, 2)))
        d = Dense(np.ones((3, 5)), np.zeros(3))
        with pytest.raises(LayerError):
            d.forward(np.zeros((1, 4)))


class TestArchitectures:
    def test_pi_cnn_shape_chain(self):
        net = build_network("pi-cnn", np.random.default_rng(0))
        chain = {name: out for name, _, out in net.shape_chain()}
        assert chain["Conv1"] == (39, 39, 16)
        assert chain["MP1"] == (19, 19, 16)
        assert chain["Conv2"] == (18, 18, 32)
        assert chain["MP2"] == (9, 9, 32)
        assert chain["Flatten"] == (2592,)
        assert chain["FC1"] == (1024,)
        assert chain["FC2"] == (1024,)
        assert chain["FC3"] == (1964,)

    def test_d_cnn_shape_chain(self):
        net = build_network("d-cnn", np.random.default_rng(0))
        chain = {name: out for name, _, out in net.shape_chain()}
        assert chain["Conv1"] == (7, 3, 16)
        assert chain["Conv2"] == (6, 2, 32)
        assert chain["Flatten"] == (384,)
        assert chain["FC1"] == (1024,)
        assert chain["FC3"] == (1964,)

    def test_h_cnn_shape_chain(self):
        net = build_network("h-cnn", np.random.default_rng(0))
        chain = {name: out for name, _, out in net.shape_chain()}
        assert chain["Conv1"] == (7, 3, 8)
        assert chain["AP"] == (6, 2, 8)
        assert chain["Conv2"] == (5, 1, 14)
        assert chain["Flatten"] == (70,)
        assert chain["FC"] == (1964,)

    def test_forward_shapes(self):
        rng = np.random.default_rng(1)
        for arch in ARCHS:
            net = build_network(arch, rng)
            x = rng.random((3,) + net.input_shape)
            assert net.forward(x).shape == (3, OUTPUT_DIM)

    def test_output_layer_is_linear(self):
        # a linear head can emit negative values; a ReLU head could not
        rng = np.random.default_rng(2)
        net = build_network("h-cnn", rng)
        out = net.forward(rng.standard_normal((8,) + net.input_shape))
        assert (out < 0).any()

    def test_unknown_arch(self):
        with pytest.raises(ValueError):
            build_network("mlp", np.random.default_rng(0))

    def test_init_depends_on_rng(self):
        a = build_network("d-cnn", np.random.default_rng(0))
        b = build_network("d-cnn", np.random.default_rng(0))
        c = build_network("d-cnn", np.random.default_rng(1))
        assert np.array_equal(a.layers[0].weight, b.layers[0].weight)
        assert not np.array_equal(a.layers[0].weight, c.layers[0].weight)


class TestMeasurementsToInput:
    def test_layout(self):
        a1 = np.arange(32.0)
        a2 = 100.0 + a1
        x = measurements_to_input(a1, a2)
        assert x.shape == (8, 4, 2)
        # beam index = 8 * angle + offset rank -> row = rank, col = angle
        assert x[0, 0, 0] == 0.0     # angle 0, first offset
        assert x[3, 2, 0] == 19.0    # angle 2, offset rank 3 -> beam 19
        assert x[7, 3, 1] == 131.0   # angle 3, offset rank 7 -> beam 31

    def test_batched(self):
        rng = np.random.default_rng(0)
        a1 = rng.random((5, 32))
        a2 = rng.random((5, 32))
        x = measurements_to_input(a1, a2)
        assert x.shape == (5, 8, 4, 2)
        assert np.array_equal(x[2], measurements_to_input(a1[2], a2[2]))


def numeric_grad(f, arr, idx, h=1e-6):
    orig = arr[idx]
    arr[idx] = orig + h
    fp = f()
    arr[idx] = orig - h
    fm = f()
    arr[idx] = orig
    return (fp - fm) / (2 * h)


class TestGradientCheck:
    """Central-difference validation of the analytic backward passes."""

    @pytest.mark.parametrize("arch", ARCHS)
    def test_parameter_and_input_gradients(self, arch):
        rng = np.random.default_rng(17)
        net = build_network(arch, rng, output_dim=23)
        n = 2
        x = rng.standard_normal((n,) + net.input_shape)
        r = rng.standard_normal((n, 23))   # fixed linear readout

        def loss():
            return float((net.forward(x) * r).sum())

        out, caches = net.forward(x, want_cache=True)
        grads = net.backward(r.copy(), caches)

        start = time.time()
        checked = 0
        params = net.parameters()
        while checked < 100:
            li = int(rng.integers(len(params)))
            layer_index, name, arr = params[li]
            idx = tuple(int(rng.integers(s)) for s in arr.shape)
            want = numeric_grad(loss, arr, idx)
            got = grads[layer_index][name][idx]
            denom = max(abs(want), abs(got), 1e-8)
            assert abs(got - want) / denom < 1e-4, \
                f"{arch} layer {layer_index} {name}{idx}: {got} vs {want}"
            checked += 1
        assert time.time() - start < 60.0

        # input gradients exercise the pooling backward paths
        dout = r.copy()
        dx = dout
        for i in range(len(net.layers) - 1, -1, -1):
            dx, _ = net.layers[i].backward(dx, caches[i])
        for _ in range(20):
            idx = (int(rng.integers(n)),) + tuple(
                int(rng.integers(s)) for s in net.input_shape)
            want = numeric_grad(loss, x, idx)
            got = dx[idx]
            denom = max(abs(want), abs(got), 1e-8)
            assert abs(got - want) / denom < 1e-4
