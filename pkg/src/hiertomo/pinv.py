"""Truncated-SVD pseudo-inverse and the pre-reconstruction step.

The minimum-norm least-squares inverse of the RoI chord-length matrix
turns the 32 beam measurements into a coarse 40 x 40 pre-image whose
peak location roughly tracks the true inhomogeneity, giving the network
a spatially structured input instead of raw projections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PinvError(ValueError):
    pass


@dataclass(frozen=True)
class PseudoInverse:
    matrix: np.ndarray          # (n_cols, n_rows) of the input matrix
    singular_values: np.ndarray
    n_kept: int
    rcond: float


def pseudo_inverse(m: np.ndarray, rcond: float = 1e-10) -> PseudoInverse:
    """Moore-Penrose pseudo-inverse via SVD with relative cutoff rcond.

    Singular values below rcond * sigma_max are treated as zero.
    """
    m = np.asarray(m, dtype=float)
    if not np.isfinite(m).all():
        raise PinvError("matrix contains non-finite entries")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    cutoff = rcond * (s[0] if s.size else 0.0)
    keep = s > cutoff
    inv_s = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    pinv = (vt.T * inv_s) @ u.T
    return PseudoInverse(matrix=pinv, singular_values=s,
                         n_kept=int(keep.sum()), rcond=rcond)


def pre_reconstruct(a_nu1: np.ndarray, a_nu2: np.ndarray, pinv: PseudoInverse,
                    grid_side: int = 40) -> tuple[np.ndarray, np.ndarray]:
    """Back-project both measurement vectors to grid_side^2 pre-images.

    Each output is the row-major reshape of pinv @ A onto the RoI grid,
    matching the reshape used when the hierarchical vector is rendered.
    """
    out = []
    for a in (a_nu1, a_nu2):
        a = np.asarray(a, dtype=float)
        if a.shape != (pinv.matrix.shape[1],):
            raise PinvError(f"measurement length {a.shape} != {pinv.matrix.shape[1]}")
        c = pinv.matrix @ a
        if c.size != grid_side * grid_side:
            raise PinvError("pre-image size does not match the RoI grid")
        out.append(c.reshape(grid_side, grid_side))
    return out[0], out[1]


def pre_images_to_input(c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Stack the two pre-images channel-last for the network entry layer."""
    return np.stack([c1, c2], axis=-1)
