"""Peak matching, reconstruction-error metrics, and SNR sweeps.

Per-sample metrics: relative peak-distance error (mean over blobs of the
center-to-reconstructed-peak distance divided by the RoI side R = 40
fine pixels), relative peak-amplitude error, and relative whole-field
reconstruction error on the hierarchical vectors. Test-set values are
arithmetic means of the per-sample metrics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import SensingMesh
from .imaging import vector_to_image
from .neural.training import Model, build_model_input
from .spectroscopy import add_noise

ROI_SIDE_PX = 40.0


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class PeakMatch:
    true_x: float
    true_y: float
    true_amp: float
    rec_x: int
    rec_y: int
    rec_amp: float


def _pixel_of(x: float, y: float) -> tuple[int, int]:
    """Nearest grid pixel (row, col) of continuous coordinates (x, y)."""
    return int(np.rint(y)) - 1, int(np.rint(x)) - 1


def find_matched_peaks(recon_image: np.ndarray, truth_image: np.ndarray,
                       blobs, mesh: SensingMesh) -> list[PeakMatch]:
    """Match each true blob center to the reconstructed peak in its
    Voronoi region of the RoI.

    The reconstructed peak is the argmax of the reconstruction over the
    RoI pixels nearer to that center than to any other center; argmax
    ties break to the lowest row-major pixel index.
    """
    s, w = mesh.roi_start, mesh.roi_side
    rows = np.arange(s, s + w)
    cols = np.arange(s, s + w)
    px = cols[None, :] + 1.0   # x coordinate of each RoI pixel
    py = rows[:, None] + 1.0
    dists = []
    for b in blobs:
        if not (s + 1 <= b.xc <= s + w and s + 1 <= b.yc <= s + w):
            raise EvaluationError("true blob center lies outside the RoI")
        dists.append((px - b.xc) ** 2 + (py - b.yc) ** 2)
    owner = np.argmin(np.stack(dists), axis=0)   # ties go to the first blob
    roi = recon_image[s:s + w, s:s + w]
    matches = []
    for li, b in enumerate(blobs):
        masked = np.where(owner == li, roi, -np.inf)
        flat = int(masked.argmax())              # first row-major index on ties
        rr, cc = divmod(flat, w)
        rec_row, rec_col = s + rr, s + cc
        true_row, true_col = _pixel_of(b.xc, b.yc)
        matches.append(PeakMatch(
            true_x=b.xc, true_y=b.yc,
            true_amp=float(truth_image[true_row, true_col]),
            rec_x=rec_col + 1, rec_y=rec_row + 1,
            rec_amp=float(recon_image[rec_row, rec_col]),
        ))
    return matches


def compute_sample_metrics(matches, t_hat_vec: np.ndarray, t_vec: np.ndarray,
                           r_px: float = ROI_SIDE_PX):
    """Per-sample (peak-distance, peak-amplitude, reconstruction) errors."""
    if r_px <= 0:
        raise EvaluationError("r_px must be positive")
    t_norm = np.linalg.norm(t_vec)
    if t_norm == 0:
        raise EvaluationError("zero ground-truth vector")
    d_peak = float(np.mean([
        np.hypot(m.rec_x - m.true_x, m.rec_y - m.true_y) / r_px for m in matches]))
    e_peak = float(np.mean([
        abs(m.rec_amp - m.true_amp) / abs(m.true_amp) for m in matches]))
    e_t = float(np.linalg.norm(np.asarray(t_hat_vec) - np.asarray(t_vec)) / t_norm)
    return d_peak, e_peak, e_t


def aggregate(per_sample) -> tuple[float, float, float]:
    """Arithmetic means of per-sample (d_peak, e_peak, e_t) triples."""
    arr = np.asarray(list(per_sample), dtype=float)
    if arr.size == 0:
        raise EvaluationError("no sample metrics to aggregate")
    return tuple(arr.mean(axis=0))


def noise_rng(master_seed: int, sample_index: int, snr_db: float) -> np.random.Generator:
    """Noise generator keyed by (master seed, sample, SNR) so every model
    sees identical corrupted inputs at a given noise level."""
    key = int(round(snr_db * 1000)) if np.isfinite(snr_db) else -1
    return np.random.default_rng(
        np.random.SeedSequence(entropy=(master_seed, 3, sample_index, key)))


def evaluate_model(model: Model, samples, sample_indices, snr_db: float,
                   master_seed: int, pinv, mesh: SensingMesh) -> dict:
    """Evaluate one model on a test set at one noise level."""
    start = time.perf_counter()
    a1 = np.stack([s.a_nu1 for s in samples])
    a2 = np.stack([s.a_nu2 for s in samples])
    if np.isfinite(snr_db):
        for k, idx in enumerate(sample_indices):
            rng = noise_rng(master_seed, int(idx), snr_db)
            a1[k] = add_noise(a1[k], snr_db, rng)
            a2[k] = add_noise(a2[k], snr_db, rng)
    x = build_model_input(model.arch, a1, a2, pinv)
    preds = model.predict(x)
    per_sample = []
    for k, s in enumerate(samples):
        truth_img = vector_to_image(s.t_vec, mesh)
        recon_img = vector_to_image(preds[k], mesh)
        matches = find_matched_peaks(recon_img, truth_img, s.blobs, mesh)
        per_sample.append(compute_sample_metrics(matches, preds[k], s.t_vec))
    d_peak, e_peak, e_t = aggregate(per_sample)
    return {
        "model": model.arch, "snr_db": snr_db,
        "D_peak": d_peak, "E_peak": e_peak, "E_T": e_t,
        "H": len(samples), "wall_time_s": time.perf_counter() - start,
    }


def snr_sweep(models: dict, samples, sample_indices, snr_list,
              master_seed: int, pinv, mesh: SensingMesh) -> list[dict]:
    """One report row per (model, SNR level)."""
    if not models:
        raise EvaluationError("no models to sweep")
    rows = []
    for name in sorted(models):
        for snr in snr_list:
            rows.append(evaluate_model(models[name], samples, sample_indices,
                                       float(snr), master_seed, pinv, mesh))
    return rows


def report_to_csv(rows, path) -> None:
    header = "model,snr_db,D_peak,E_peak,E_T,H,wall_time_s"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(f"{r['model']},{r['snr_db']:.6g},{r['D_peak']:.12g},"
                     f"{r['E_peak']:.12g},{r['E_T']:.12g},{r['H']},"
                     f"{r['wall_time_s']:.6g}\n")
