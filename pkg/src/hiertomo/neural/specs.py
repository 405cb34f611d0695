"""The three reconstruction network architectures.

pi-cnn consumes the two 40x40 pre-reconstructed images (channel-stacked);
d-cnn and h-cnn consume the raw measurements reshaped to 8x4 per transition
(row = beam offset rank, column = projection-angle index). All three emit
the 1964-element hierarchical temperature vector.
"""

from __future__ import annotations

import numpy as np

from .layers import AvgPool, Conv2D, Dense, Flatten, MaxPool, Network

OUTPUT_DIM = 1964
LEAKY_SLOPE = 0.01
ARCHS = ("pi-cnn", "d-cnn", "h-cnn")


def _conv(rng, kh, kw, cin, cout, activation, name, slope=LEAKY_SLOPE):
    std = np.sqrt(2.0 / (kh * kw * cin))
    w = rng.normal(0.0, std, size=(kh, kw, cin, cout))
    return Conv2D(w, np.zeros(cout), stride=(1, 1), activation=activation,
                  slope=slope, name=name)


def _dense(rng, fin, fout, activation, name, slope=LEAKY_SLOPE):
    std = np.sqrt(2.0 / fin)
    w = rng.normal(0.0, std, size=(fout, fin))
    return Dense(w, np.zeros(fout), activation=activation, slope=slope, name=name)


def build_network(arch: str, rng: np.random.Generator,
                  output_dim: int = OUTPUT_DIM) -> Network:
    """Construct a freshly initialized network for the given architecture.

    Weights use He-scaled normal init, biases start at zero; the output
    layer is linear (Kelvin-scale regression).
    """
    if arch == "pi-cnn":
        layers = [
            _conv(rng, 2, 2, 2, 16, "relu", "Conv1"),
            MaxPool((2, 2), (2, 2), name="MP1"),
            _conv(rng, 2, 2, 16, 32, "relu", "Conv2"),
            MaxPool((2, 2), (2, 2), name="MP2"),
            Flatten(name="Flatten"),
            _dense(rng, 2592, 1024, "relu", "FC1"),
            _dense(rng, 1024, 1024, "relu", "FC2"),
            _dense(rng, 1024, output_dim, "linear", "FC3"),
        ]
        return Network(layers, input_shape=(40, 40, 2), arch=arch)
    if arch == "d-cnn":
        layers = [
            _conv(rng, 2, 2, 2, 16, "relu", "Conv1"),
            _conv(rng, 2, 2, 16, 32, "relu", "Conv2"),
            Flatten(name="Flatten"),
            _dense(rng, 384, 1024, "relu", "FC1"),
            _dense(rng, 1024, 1024, "relu", "FC2"),
            _dense(rng, 1024, output_dim, "linear", "FC3"),
        ]
        return Network(layers, input_shape=(8, 4, 2), arch=arch)
    if arch == "h-cnn":
        layers = [
            _conv(rng, 2, 2, 2, 8, "leaky_relu", "Conv1"),
            AvgPool((2, 2), (1, 1), name="AP"),
            _conv(rng, 2, 2, 8, 14, "leaky_relu", "Conv2"),
            Flatten(name="Flatten"),
            _dense(rng, 70, output_dim, "linear", "FC"),
        ]
        return Network(layers, input_shape=(8, 4, 2), arch=arch)
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHS}")


def measurements_to_input(a_nu1: np.ndarray, a_nu2: np.ndarray) -> np.ndarray:
    """Reshape two (..., 32) measurement vectors to (..., 8, 4, 2).

    Beam index i = 8 * angle_index + offset_rank maps to row = offset rank,
    column = angle index.
    """
    out = []
    for a in (a_nu1, a_nu2):
        a = np.asarray(a, dtype=float)
        grid = np.swapaxes(a.reshape(a.shape[:-1] + (4, 8)), -1, -2)
        out.append(grid)
    return np.stack(out, axis=-1)
