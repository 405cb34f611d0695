"""Loss, Adam optimization, the training loop, and inference.

The loss is the batch mean of unsquared residual Euclidean norms,

    L = (1/B) sum_b ||That_b - T_b||_2,

with an L2 weight penalty added through the gradient. Optional input /
target standardization is config-controlled; standardization statistics
are stored on the trained model so inference is self-contained and
outputs are always raw Kelvin.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .layers import Network
from .specs import build_network, measurements_to_input


class TrainingError(RuntimeError):
    pass


DEFAULT_TRAIN_CONFIG = {
    "learning_rate": 0.001,
    "batch_size": 128,
    "epochs": 100,
    "l2_penalty": 0.0001,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "standardize_inputs": False,
    "standardize_targets": False,
    "deterministic": True,
}


def loss_l2(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Batch mean of unsquared residual L2 norms."""
    p = np.atleast_2d(predictions)
    t = np.atleast_2d(targets)
    if p.shape != t.shape:
        raise TrainingError(f"prediction shape {p.shape} != target shape {t.shape}")
    if p.shape[0] == 0:
        raise TrainingError("empty batch")
    return float(np.mean(np.linalg.norm(p - t, axis=1)))


def loss_l2_grad(predictions: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Gradient of loss_l2 w.r.t. predictions; zero rows at zero residual."""
    p = np.atleast_2d(predictions)
    t = np.atleast_2d(targets)
    r = p - t
    norms = np.linalg.norm(r, axis=1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return np.where(norms > 0.0, r / safe, 0.0) / p.shape[0]


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_network(cls, net: Network) -> "AdamState":
        params = net.parameters()
        return cls(m=[np.zeros_like(p) for _, _, p in params],
                   v=[np.zeros_like(p) for _, _, p in params])


def adam_step(net: Network, grads: list, state: AdamState, config: dict) -> None:
    """One bias-corrected Adam update applied in place to the network."""
    lr = config["learning_rate"]
    b1, b2, eps = config["beta1"], config["beta2"], config["eps"]
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for k, (i, name, p) in enumerate(net.parameters()):
        g = grads[i][name]
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * g
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g
        mhat = state.m[k] / c1
        vhat = state.v[k] / c2
        net.set_parameter(i, name, p - lr * mhat / (np.sqrt(vhat) + eps))


def weight_penalty(net: Network, factor: float) -> float:
    """factor * sum of squared weight-matrix entries (biases excluded)."""
    total = 0.0
    for _, name, p in net.parameters():
        if name == "weight":
            total += float(np.sum(p * p))
    return factor * total


def _add_penalty_grads(net: Network, grads: list, factor: float) -> None:
    if factor == 0.0:
        return
    for i, layer in enumerate(net.layers):
        if "weight" in layer.params():
            grads[i]["weight"] = grads[i]["weight"] + 2.0 * factor * layer.weight


@dataclass
class Model:
    """A trained network plus the preprocessing it was trained with."""

    network: Network
    arch: str
    input_mu: np.ndarray | None = None      # per-channel
    input_sigma: np.ndarray | None = None
    target_mu: np.ndarray | None = None     # per-component, Kelvin
    target_sigma: float = 1.0               # scalar, Kelvin
    train_config: dict = field(default_factory=dict)

    def preprocess(self, x: np.ndarray) -> np.ndarray:
        if self.input_mu is not None:
            return (x - self.input_mu) / self.input_sigma
        return x

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forward a batch of raw network inputs to Kelvin-scale outputs."""
        out = self.network.forward(self.preprocess(x))
        if self.target_mu is not None:
            out = out * self.target_sigma + self.target_mu
        return out


def build_model_input(arch: str, a_nu1: np.ndarray, a_nu2: np.ndarray,
                      pinv=None) -> np.ndarray:
    """Turn batched measurement vectors (N, 32) into network inputs."""
    a1 = np.atleast_2d(np.asarray(a_nu1, dtype=float))
    a2 = np.atleast_2d(np.asarray(a_nu2, dtype=float))
    if arch == "pi-cnn":
        if pinv is None:
            raise TrainingError("pi-cnn inference requires the pseudo-inverse")
        c1 = (a1 @ pinv.matrix.T).reshape(-1, 40, 40)
        c2 = (a2 @ pinv.matrix.T).reshape(-1, 40, 40)
        return np.stack([c1, c2], axis=-1)
    return measurements_to_input(a1, a2)


def infer(model: Model, a_nu1: np.ndarray, a_nu2: np.ndarray, pinv=None) -> np.ndarray:
    """Reconstruct hierarchical temperature vector(s) from measurements."""
    x = build_model_input(model.arch, a_nu1, a_nu2, pinv)
    out = model.predict(x)
    if np.asarray(a_nu1).ndim == 1:
        return out[0]
    return out


def train(arch: str, inputs: np.ndarray, targets: np.ndarray,
          config: dict | None = None, seed: int = 0,
          progress=None) -> tuple[Model, list[dict]]:
    """Train a freshly initialized network of the given architecture.

    inputs are raw network inputs (N, H, W, C); targets raw Kelvin
    (N, 1964). Returns the trained model and a per-epoch history of
    Kelvin-scale loss. Fixed seed + deterministic flag gives bit-identical
    results across runs.
    """
    cfg = dict(DEFAULT_TRAIN_CONFIG)
    cfg.update(config or {})
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 2)))
    net = build_network(arch, rng, output_dim=targets.shape[1])

    x = np.asarray(inputs, dtype=float)
    t = np.asarray(targets, dtype=float)
    if len(x) == 0:
        raise TrainingError("empty training set")

    in_mu = in_sigma = None
    if cfg["standardize_inputs"]:
        axes = tuple(range(x.ndim - 1))
        in_mu = x.mean(axis=axes)
        in_sigma = np.maximum(x.std(axis=axes), 1e-12)
        x = (x - in_mu) / in_sigma

    t_mu = None
    t_sigma = 1.0
    z = t
    if cfg["standardize_targets"]:
        t_mu = t.mean(axis=0)
        t_sigma = max(float((t - t_mu).std()), 1e-12)
        z = (t - t_mu) / t_sigma

    state = AdamState.for_network(net)
    batch = int(cfg["batch_size"])
    penalty = float(cfg["l2_penalty"])
    history = []
    n = len(x)
    for epoch in range(int(cfg["epochs"])):
        start = time.perf_counter()
        perm = rng.permutation(n)
        norm_sum = 0.0
        for lo in range(0, n, batch):
            idx = perm[lo:lo + batch]
            xb, zb = x[idx], z[idx]
            pred, caches = net.forward(xb, want_cache=True)
            residual_norms = np.linalg.norm(pred - zb, axis=1)
            if not np.isfinite(residual_norms).all():
                raise TrainingError(f"training diverged at epoch {epoch}")
            norm_sum += float(residual_norms.sum())
            grads = net.backward(loss_l2_grad(pred, zb), caches)
            _add_penalty_grads(net, grads, penalty)
            adam_step(net, grads, state, cfg)
        mean_loss_k = (norm_sum / n) * t_sigma
        history.append({"epoch": epoch, "loss_k": mean_loss_k,
                        "wall_s": time.perf_counter() - start})
        if progress is not None:
            progress(history[-1])
    model = Model(network=net, arch=arch, input_mu=in_mu, input_sigma=in_sigma,
                  target_mu=t_mu, target_sigma=t_sigma, train_config=cfg)
    return model, history
