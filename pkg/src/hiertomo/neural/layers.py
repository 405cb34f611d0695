"""Network layers with analytic forward/backward passes.

All activations flow through channel-last float64 arrays with an explicit
batch axis: feature maps are (N, H, W, C), flat vectors (N, F). Convolution
and pooling use valid padding only (padding 0 throughout the shipped
architectures). Gradients are exact analytic derivatives; the ReLU kink and
exact pooling ties use the subgradient that routes to the first window
position in row-major order.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class LayerError(ValueError):
    pass


def _activate(z: np.ndarray, kind: str, slope: float) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "leaky_relu":
        return np.where(z > 0.0, z, slope * z)
    if kind == "linear":
        return z
    raise LayerError(f"unknown activation {kind!r}")


def _activation_grad(z: np.ndarray, kind: str, slope: float) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "leaky_relu":
        return np.where(z > 0.0, 1.0, slope)
    if kind == "linear":
        return np.ones_like(z)
    raise LayerError(f"unknown activation {kind!r}")


def _windows(x: np.ndarray, kh: int, kw: int, sh: int, sw: int) -> np.ndarray:
    """Sliding windows of a (N, H, W, C) array: (N, Ho, Wo, C, kh, kw)."""
    n, h, w, c = x.shape
    if kh > h or kw > w:
        raise LayerError(f"window {(kh, kw)} larger than input {(h, w)}")
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))
    return win[:, ::sh, ::sw]


class Conv2D:
    """Valid 2D convolution with bias and elementwise activation."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray,
                 stride: tuple[int, int] = (1, 1), activation: str = "relu",
                 slope: float = 0.01, name: str = "conv"):
        self.weight = np.asarray(weight, dtype=float)   # (kh, kw, cin, cout)
        self.bias = np.asarray(bias, dtype=float)       # (cout,)
        self.stride = stride
        self.activation = activation
        self.slope = slope
        self.name = name

    def out_shape(self, in_shape):
        h, w, c = in_shape
        kh, kw, cin, cout = self.weight.shape
        if c != cin:
            raise LayerError(f"{self.name}: input channels {c} != kernel {cin}")
        sh, sw = self.stride
        return ((h - kh) // sh + 1, (w - kw) // sw + 1, cout)

    def forward(self, x: np.ndarray):
        kh, kw, cin, cout = self.weight.shape
        if x.shape[-1] != cin:
            raise LayerError(f"{self.name}: input channels {x.shape[-1]} != kernel {cin}")
        win = _windows(x, kh, kw, *self.stride)
        z = np.tensordot(win, self.weight, axes=([4, 5, 3], [0, 1, 2])) + self.bias
        out = _activate(z, self.activation, self.slope)
        return out, (x, win, z)

    def backward(self, dout: np.ndarray, cache):
        x, win, z = cache
        kh, kw, cin, cout = self.weight.shape
        sh, sw = self.stride
        dz = dout * _activation_grad(z, self.activation, self.slope)
        db = dz.sum(axis=(0, 1, 2))
        dw = np.tensordot(win, dz, axes=([0, 1, 2], [0, 1, 2]))  # (C, kh, kw, cout)
        dw = dw.transpose(1, 2, 0, 3)
        dwin = np.tensordot(dz, self.weight, axes=([3], [3]))    # (N, Ho, Wo, kh, kw, C)
        dx = np.zeros_like(x)
        ho, wo = dz.shape[1], dz.shape[2]
        for i in range(kh):
            for j in range(kw):
                dx[:, i:i + ho * sh:sh, j:j + wo * sw:sw, :] += dwin[:, :, :, i, j, :]
        return dx, {"weight": dw, "bias": db}

    def params(self):
        return {"weight": self.weight, "bias": self.bias}


class MaxPool:
    def __init__(self, window: tuple[int, int], stride: tuple[int, int],
                 name: str = "maxpool"):
        self.window = window
        self.stride = stride
        self.name = name

    def out_shape(self, in_shape):
        h, w, c = in_shape
        ph, pw = self.window
        sh, sw = self.stride
        return ((h - ph) // sh + 1, (w - pw) // sw + 1, c)

    def forward(self, x: np.ndarray):
        ph, pw = self.window
        win = _windows(x, ph, pw, *self.stride)          # (N, Ho, Wo, C, ph, pw)
        flat = win.reshape(win.shape[:4] + (ph * pw,))
        arg = flat.argmax(axis=-1)                       # first index wins ties
        out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        return out, (x.shape, arg)

    def backward(self, dout: np.ndarray, cache):
        x_shape, arg = cache
        ph, pw = self.window
        sh, sw = self.stride
        n, ho, wo, c = dout.shape
        dx = np.zeros(x_shape)
        ni, hi, wi, ci = np.ogrid[:n, :ho, :wo, :c]
        rows = hi * sh + arg // pw
        cols = wi * sw + arg % pw
        np.add.at(dx, (np.broadcast_to(ni, arg.shape), rows, cols,
                       np.broadcast_to(ci, arg.shape)), dout)
        return dx, {}

    def params(self):
        return {}


class AvgPool:
    def __init__(self, window: tuple[int, int], stride: tuple[int, int],
                 name: str = "avgpool"):
        self.window = window
        self.stride = stride
        self.name = name

    def out_shape(self, in_shape):
        h, w, c = in_shape
        ph, pw = self.window
        sh, sw = self.stride
        return ((h - ph) // sh + 1, (w - pw) // sw + 1, c)

    def forward(self, x: np.ndarray):
        ph, pw = self.window
        win = _windows(x, ph, pw, *self.stride)
        return win.mean(axis=(-2, -1)), (x.shape,)

    def backward(self, dout: np.ndarray, cache):
        (x_shape,) = cache
        ph, pw = self.window
        sh, sw = self.stride
        ho, wo = dout.shape[1], dout.shape[2]
        dx = np.zeros(x_shape)
        share = dout / (ph * pw)
        for i in range(ph):
            for j in range(pw):
                dx[:, i:i + ho * sh:sh, j:j + wo * sw:sw, :] += share
        return dx, {}

    def params(self):
        return {}


class Flatten:
    """Row-major (H, W, C) flattening between feature maps and dense layers."""

    def __init__(self, name: str = "flatten"):
        self.name = name

    def out_shape(self, in_shape):
        h, w, c = in_shape
        return (h * w * c,)

    def forward(self, x: np.ndarray):
        return x.reshape(x.shape[0], -1), (x.shape,)

    def backward(self, dout: np.ndarray, cache):
        (x_shape,) = cache
        return dout.reshape(x_shape), {}

    def params(self):
        return {}


class Dense:
    def __init__(self, weight: np.ndarray, bias: np.ndarray,
                 activation: str = "relu", slope: float = 0.01,
                 name: str = "dense"):
        self.weight = np.asarray(weight, dtype=float)   # (out, in)
        self.bias = np.asarray(bias, dtype=float)       # (out,)
        self.activation = activation
        self.slope = slope
        self.name = name

    def out_shape(self, in_shape):
        (f,) = in_shape
        if f != self.weight.shape[1]:
            raise LayerError(f"{self.name}: input dim {f} != weight columns "
                             f"{self.weight.shape[1]}")
        return (self.weight.shape[0],)

    def forward(self, x: np.ndarray):
        if x.shape[1] != self.weight.shape[1]:
            raise LayerError(f"{self.name}: input dim {x.shape[1]} != weight "
                             f"columns {self.weight.shape[1]}")
        z = x @ self.weight.T + self.bias
        return _activate(z, self.activation, self.slope), (x, z)

    def backward(self, dout: np.ndarray, cache):
        x, z = cache
        dz = dout * _activation_grad(z, self.activation, self.slope)
        dw = dz.T @ x
        db = dz.sum(axis=0)
        dx = dz @ self.weight
        return dx, {"weight": dw, "bias": db}

    def params(self):
        return {"weight": self.weight, "bias": self.bias}


class Network:
    """An ordered layer pipeline with cached-activation backprop."""

    def __init__(self, layers, input_shape: tuple[int, ...], arch: str):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.arch = arch

    def shape_chain(self):
        """(name, in_shape, out_shape) for every layer, asserting chaining."""
        shape = self.input_shape
        rows = []
        for layer in self.layers:
            out = layer.out_shape(shape)
            rows.append((layer.name, shape, out))
            shape = out
        return rows

    def forward(self, x: np.ndarray, want_cache: bool = False):
        if x.shape[1:] != self.input_shape:
            raise LayerError(f"input shape {x.shape[1:]} != {self.input_shape}")
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            if want_cache:
                caches.append(cache)
        if not np.isfinite(x).all():
            raise LayerError("non-finite activation in forward pass")
        return (x, caches) if want_cache else x

    def backward(self, dout: np.ndarray, caches):
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            dout, grads[i] = self.layers[i].backward(dout, caches[i])
        return grads

    def parameters(self):
        """(layer_index, param_name, array) for every trainable tensor."""
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params().items():
                out.append((i, name, arr))
        return out

    def set_parameter(self, layer_index: int, name: str, value: np.ndarray):
        setattr(self.layers[layer_index], name, np.asarray(value, dtype=float))
