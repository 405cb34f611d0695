"""Rendering of hierarchical vectors to images and image export.

The 1964-element hierarchical vector maps to a 96x96 image: the first
1600 entries fill the central 40x40 RoI block row-major, each of the 364
background entries is duplicated over its 4x4 patch, and the 1792 pixels
outside the octagonal coverage are zero.
"""

from __future__ import annotations

import numpy as np

from .geometry import SensingMesh


class ImagingError(ValueError):
    pass


def vector_to_image(vec: np.ndarray, mesh: SensingMesh) -> np.ndarray:
    """Render a hierarchical cell vector as a fine-resolution image."""
    v = np.asarray(vec, dtype=float)
    if v.shape != (mesh.n_cells,):
        raise ImagingError(f"vector length {v.shape} != {(mesh.n_cells,)}")
    img = np.zeros((mesh.n_fine, mesh.n_fine))
    s, w = mesh.roi_start, mesh.roi_side
    img[s:s + w, s:s + w] = v[:mesh.n_roi].reshape(w, w)
    p = mesh.patch
    for j, (cr, cc) in enumerate(mesh.bg_cells):
        img[cr * p:(cr + 1) * p, cc * p:(cc + 1) * p] = v[mesh.n_roi + j]
    return img


def export_image(image: np.ndarray, path, fmt: str = "pgm") -> None:
    """Write an image as an ASCII portable graymap or as raw-Kelvin CSV.

    The graymap scales [min, max] over nonzero coverage to [0, 255];
    a constant coverage maps to a single gray level of 255.
    """
    img = np.asarray(image, dtype=float)
    if fmt == "csv":
        np.savetxt(path, img, delimiter=",")
        return
    if fmt != "pgm":
        raise ImagingError(f"unknown image format {fmt!r}")
    coverage = img != 0.0
    gray = np.zeros(img.shape, dtype=np.int64)
    if coverage.any():
        lo = img[coverage].min()
        hi = img[coverage].max()
        if hi > lo:
            gray[coverage] = np.rint((img[coverage] - lo) / (hi - lo) * 255).astype(np.int64)
        else:
            gray[coverage] = 255
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P2\n{img.shape[1]} {img.shape[0]}\n255\n")
        for row in gray:
            fh.write(" ".join(str(v) for v in row) + "\n")
