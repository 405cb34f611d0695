"""Serialization of datasets, trained models, and sensitivity matrices
on top of the binary container format."""

from __future__ import annotations

import numpy as np

from .container import load_container, save_container
from .geometry import SensitivityMatrix
from .neural.specs import build_network
from .neural.training import Model
from .phantom import Dataset, GaussianBlob, Sample

NOISE_RULE = "sigma = rms(A) * 10^(-snr_db/20); n ~ N(0,1) i.i.d."


def save_dataset(dataset: Dataset, path) -> None:
    blobs = []
    offsets = [0]
    for i, s in enumerate(dataset.samples):
        for b in s.blobs:
            blobs.append([b.xc, b.yc, b.sigma_x, b.sigma_y, b.lam, b.u, b.v])
        offsets.append(len(blobs))
    tensors = {
        "a_nu1": np.stack([s.a_nu1 for s in dataset.samples]),
        "a_nu2": np.stack([s.a_nu2 for s in dataset.samples]),
        "t_vec": np.stack([s.t_vec for s in dataset.samples]),
        "blobs": np.asarray(blobs, dtype=float),
        "blob_offsets": np.asarray(offsets, dtype=float),
        "train_idx": dataset.train_idx.astype(float),
        "test_idx": dataset.test_idx.astype(float),
    }
    meta = {
        "master_seed": dataset.master_seed,
        "noise_rule": NOISE_RULE,
        "config": dataset.config,
        "n_samples": len(dataset.samples),
    }
    save_container(path, "dataset", meta, tensors)


def load_dataset(path) -> Dataset:
    _, meta, t = load_container(path, expect_kind="dataset")
    offsets = t["blob_offsets"].astype(int)
    samples = []
    for i in range(int(meta["n_samples"])):
        rows = t["blobs"][offsets[i]:offsets[i + 1]]
        blobs = tuple(GaussianBlob(*row) for row in rows)
        samples.append(Sample(a_nu1=t["a_nu1"][i], a_nu2=t["a_nu2"][i],
                              t_vec=t["t_vec"][i], blobs=blobs, seed=i))
    return Dataset(samples=tuple(samples),
                   train_idx=t["train_idx"].astype(np.int64),
                   test_idx=t["test_idx"].astype(np.int64),
                   master_seed=int(meta["master_seed"]),
                   config=meta.get("config", {}))


def save_model(model: Model, path) -> None:
    tensors = {}
    for i, name, arr in model.network.parameters():
        tensors[f"layer{i:02d}.{name}"] = arr
    if model.input_mu is not None:
        tensors["input_mu"] = model.input_mu
        tensors["input_sigma"] = model.input_sigma
    if model.target_mu is not None:
        tensors["target_mu"] = model.target_mu
        tensors["target_sigma"] = np.asarray(model.target_sigma)
    meta = {
        "arch": model.arch,
        "train_config": model.train_config,
        "output_dim": int(model.network.layers[-1].weight.shape[0]),
    }
    save_container(path, "checkpoint", meta, tensors)


def load_model(path) -> Model:
    _, meta, t = load_container(path, expect_kind="checkpoint")
    net = build_network(meta["arch"], np.random.default_rng(0),
                        output_dim=int(meta["output_dim"]))
    for i, name, _ in net.parameters():
        net.set_parameter(i, name, t[f"layer{i:02d}.{name}"])
    return Model(
        network=net, arch=meta["arch"],
        input_mu=t.get("input_mu"), input_sigma=t.get("input_sigma"),
        target_mu=t.get("target_mu"),
        target_sigma=float(t["target_sigma"]) if "target_sigma" in t else 1.0,
        train_config=meta.get("train_config", {}),
    )


def save_sensitivity(matrix: SensitivityMatrix, path, geometry_config: dict) -> None:
    meta = {"units": matrix.units, "roi_cols": matrix.roi_cols,
            "geometry": geometry_config}
    save_container(path, "matrix", meta,
                   {"values": matrix.values, "beam_lengths": matrix.beam_lengths})


def load_sensitivity(path) -> SensitivityMatrix:
    _, meta, t = load_container(path, expect_kind="matrix")
    return SensitivityMatrix(values=t["values"], roi_cols=int(meta["roi_cols"]),
                             units=meta["units"], beam_lengths=t["beam_lengths"])
