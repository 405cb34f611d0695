"""Gaussian-inhomogeneity phantoms, rasterization, dataset assembly.

Temperature and concentration fields share the same blob geometry:

    T(x, y) = sum_l lam_l * u_l * f_l(x, y) / max(f_l) + T_min
    X(x, y) = sum_l lam_l * v_l * f_l(x, y) / max(f_l) + X_min

where f_l is an axis-aligned bivariate Gaussian density and max(f_l) is
its analytic peak 1 / (2 pi sx sy), so the normalized profile is 1 at the
(real-valued) blob center regardless of the grid. Fields are sampled at
integer coordinates x, y in {1..96}; x indexes columns, y indexes rows
(top row is y = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .geometry import SensingMesh, SensitivityMatrix
from .spectroscopy import TransitionLine, absorbance_density, forward_project


class PhantomError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianBlob:
    """One Gaussian inhomogeneity shared by the T and X fields."""

    xc: float
    yc: float
    sigma_x: float
    sigma_y: float
    lam: float      # shape scale in (0.7, 1)
    u: float        # temperature amplitude above T_min, K
    v: float        # concentration amplitude above X_min

    def peak_density(self) -> float:
        """Analytic peak of the unnormalized Gaussian density."""
        return 1.0 / (2.0 * np.pi * self.sigma_x * self.sigma_y)


@dataclass(frozen=True)
class PhantomParams:
    t_min: float = 300.0
    t_peak_lo: float = 600.0
    t_peak_hi: float = 900.0
    x_min: float = 0.01
    x_peak_lo: float = 0.10
    x_peak_hi: float = 0.12
    center_lo: float = 34.0
    center_hi: float = 65.0
    sigma_lo: float = 10.0
    sigma_hi: float = 25.0
    pressure_atm: float = 1.0

    def __post_init__(self):
        if not (self.t_min < self.t_peak_lo < self.t_peak_hi):
            raise PhantomError("require t_min < t_peak_lo < t_peak_hi")
        if not (self.x_min < self.x_peak_lo < self.x_peak_hi):
            raise PhantomError("require x_min < x_peak_lo < x_peak_hi")

    @classmethod
    def from_config(cls, cfg: dict) -> "PhantomParams":
        return cls(
            t_min=cfg["t_min_k"], t_peak_lo=cfg["t_peak_lo_k"], t_peak_hi=cfg["t_peak_hi_k"],
            x_min=cfg["x_min"], x_peak_lo=cfg["x_peak_lo"], x_peak_hi=cfg["x_peak_hi"],
            center_lo=cfg["center_lo_px"], center_hi=cfg["center_hi_px"],
            sigma_lo=cfg["sigma_lo_px"], sigma_hi=cfg["sigma_hi_px"],
            pressure_atm=cfg["pressure_atm"],
        )


@dataclass(frozen=True)
class Sample:
    """One (measurements, temperature) pair with its generating blobs."""

    a_nu1: np.ndarray       # (32,) noise-free
    a_nu2: np.ndarray       # (32,)
    t_vec: np.ndarray       # (1964,) hierarchical temperature, K
    blobs: tuple[GaussianBlob, ...]
    seed: int | None = None


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    train_idx: np.ndarray
    test_idx: np.ndarray
    master_seed: int
    config: dict = field(default_factory=dict)


def gaussian_field(blobs, baseline: float, amplitude_attr: str,
                   size: int = 96) -> np.ndarray:
    """Render the summed normalized-Gaussian field on a size x size grid.

    amplitude_attr selects the per-blob amplitude ("u" for temperature,
    "v" for concentration); baseline is the field minimum (T_min or X_min).
    """
    if not blobs:
        raise PhantomError("at least one blob is required")
    x = np.arange(1, size + 1, dtype=float)[None, :]   # columns
    y = np.arange(1, size + 1, dtype=float)[:, None]   # rows, top row y=1
    out = np.full((size, size), float(baseline))
    for b in blobs:
        if b.sigma_x <= 0 or b.sigma_y <= 0:
            raise PhantomError("blob standard deviations must be positive")
        prof = np.exp(-((x - b.xc) ** 2 / (2 * b.sigma_x ** 2)
                        + (y - b.yc) ** 2 / (2 * b.sigma_y ** 2)))
        out += b.lam * getattr(b, amplitude_attr) * prof
    return out


def rasterize(fine_field: np.ndarray, mesh: SensingMesh) -> np.ndarray:
    """Aggregate a fine image to the hierarchical cell vector.

    RoI entries copy their fine pixel; each background entry is the mean of
    its patch of fine pixels; exterior pixels are ignored.
    """
    f = np.asarray(fine_field, dtype=float)
    if f.shape != (mesh.n_fine, mesh.n_fine):
        raise PhantomError(f"field shape {f.shape} != {(mesh.n_fine, mesh.n_fine)}")
    s, w = mesh.roi_start, mesh.roi_side
    out = np.empty(mesh.n_cells)
    out[:mesh.n_roi] = f[s:s + w, s:s + w].ravel()
    p = mesh.patch
    patch_means = f.reshape(mesh.n_coarse, p, mesh.n_coarse, p).mean(axis=(1, 3))
    out[mesh.n_roi:] = patch_means[mesh.bg_cells[:, 0], mesh.bg_cells[:, 1]]
    return out


def draw_blobs(rng: np.random.Generator, params: PhantomParams,
               n_blobs: int) -> tuple[GaussianBlob, ...]:
    """Draw blob parameters from the configured uniform distributions."""
    if n_blobs not in (1, 2):
        raise PhantomError("n_blobs must be 1 or 2")
    blobs = []
    for _ in range(n_blobs):
        xc = rng.uniform(params.center_lo, params.center_hi)
        yc = rng.uniform(params.center_lo, params.center_hi)
        sx = rng.uniform(params.sigma_lo, params.sigma_hi)
        sy = rng.uniform(params.sigma_lo, params.sigma_hi)
        lam = rng.uniform(0.7, 1.0)
        u = rng.uniform(params.t_peak_lo - params.t_min, params.t_peak_hi - params.t_min)
        v = rng.uniform(params.x_peak_lo - params.x_min, params.x_peak_hi - params.x_min)
        blobs.append(GaussianBlob(xc=xc, yc=yc, sigma_x=sx, sigma_y=sy,
                                  lam=lam, u=u, v=v))
    return tuple(blobs)


def sample_from_blobs(blobs, params: PhantomParams, lines, L: SensitivityMatrix,
                      mesh: SensingMesh, seed: int | None = None) -> Sample:
    """Synthesize fields from given blobs and forward-project them."""
    t_field = gaussian_field(blobs, params.t_min, "u", size=mesh.n_fine)
    x_field = gaussian_field(blobs, params.x_min, "v", size=mesh.n_fine)
    t_vec = rasterize(t_field, mesh)
    x_vec = rasterize(x_field, mesh)
    line1, line2 = lines
    a1 = forward_project(L, absorbance_density(t_vec, x_vec, params.pressure_atm, line1))
    a2 = forward_project(L, absorbance_density(t_vec, x_vec, params.pressure_atm, line2))
    return Sample(a_nu1=a1, a_nu2=a2, t_vec=t_vec, blobs=tuple(blobs), seed=seed)


def draw_sample(rng: np.random.Generator, params: PhantomParams, n_blobs: int,
                lines, L: SensitivityMatrix, mesh: SensingMesh,
                seed: int | None = None) -> Sample:
    """Draw one random phantom and its noise-free measurements."""
    blobs = draw_blobs(rng, params, n_blobs)
    return sample_from_blobs(blobs, params, lines, L, mesh, seed=seed)


def _sample_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    # Stream label 0 = per-sample blob draws; label 1 = train/test split.
    return np.random.SeedSequence(entropy=(master_seed, 0, index))


def build_dataset(master_seed: int, params: PhantomParams, lines,
                  L: SensitivityMatrix, mesh: SensingMesh,
                  n_single: int = 4500, n_double: int = 6400,
                  n_train: int = 10000, n_test: int = 900,
                  config: dict | None = None) -> Dataset:
    """Generate the full dataset and a seeded random train/test split.

    Sample i uses a seed derived from (master_seed, i), so generation is
    order-independent and reproducible sample by sample.
    """
    total = n_single + n_double
    if n_train + n_test != total:
        raise PhantomError(
            f"split sizes {n_train}+{n_test} != total samples {total}")
    samples = []
    for i in range(total):
        n_blobs = 1 if i < n_single else 2
        rng = np.random.default_rng(_sample_seed(master_seed, i))
        samples.append(draw_sample(rng, params, n_blobs, lines, L, mesh, seed=i))
    split_rng = np.random.default_rng(np.random.SeedSequence(entropy=(master_seed, 1)))
    perm = split_rng.permutation(total)
    return Dataset(samples=tuple(samples), train_idx=perm[:n_train],
                   test_idx=perm[n_train:], master_seed=master_seed,
                   config=dict(config or {}))


def blobs_to_csv(dataset: Dataset, path) -> None:
    """Export blob metadata for audit: one row per blob."""
    rows = []
    for i, s in enumerate(dataset.samples):
        for b in s.blobs:
            rows.append([i, b.xc, b.yc, b.sigma_x, b.sigma_y, b.lam, b.u, b.v])
    header = "sample,xc,yc,sigma_x,sigma_y,lam,u,v"
    np.savetxt(path, np.asarray(rows), delimiter=",", header=header, comments="")
