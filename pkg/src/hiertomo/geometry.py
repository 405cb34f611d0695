"""Sensing-region geometry: hierarchical mesh, beam layout, chord lengths.

The sensing region is an octagon obtained from a 345.6 mm bounding square
with four 45-degree corner cuts of leg 100.8 mm. The central 144 x 144 mm
square (the region of interest, RoI) is meshed with 3.6 mm fine cells
(40 x 40 = 1600 cells); the remaining coverage is meshed with 14.4 mm
coarse cells. A coarse cell belongs to the region iff its center lies
strictly inside the ideal octagon; with the default dimensions this yields
exactly 364 background cells, which is validated at build time.

Coordinate frame: origin at the bottom-left corner of the bounding square,
x rightward, y upward. Fine pixel (row r counted from the top, column c)
has center ((c + 0.5) * 3.6, (95.5 - r) * 3.6) mm.

Chord lengths are computed with an incremental parametric grid walk and
stored in centimetres in the sensitivity matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MM_PER_CM = 10.0

_T_EPS = 1e-9  # merge tolerance for parametric crossings, in mm along the beam


class GeometryError(ValueError):
    """Raised when a geometry config is inconsistent."""


@dataclass(frozen=True)
class SensingMesh:
    """Hierarchical fine/coarse mesh over the octagonal sensing region."""

    square_mm: float
    fine_mm: float
    coarse_mm: float
    n_fine: int            # fine pixels per side of the bounding square
    n_coarse: int          # coarse cells per side
    roi_side: int          # fine cells per RoI side
    roi_start: int         # first fine row/col of the RoI block
    patch: int             # fine pixels per coarse-cell side
    roi_index: np.ndarray      # (n_fine, n_fine) int, -1 outside RoI
    bg_index: np.ndarray       # (n_coarse, n_coarse) int, -1 outside background
    bg_cells: np.ndarray       # (n_bg, 2) coarse (row, col) in index order
    coarse_inside: np.ndarray  # (n_coarse, n_coarse) bool, center inside octagon
    exterior_fine: np.ndarray  # (n_fine, n_fine) bool

    @property
    def n_roi(self) -> int:
        return self.roi_side * self.roi_side

    @property
    def n_bg(self) -> int:
        return len(self.bg_cells)

    @property
    def n_cells(self) -> int:
        return self.n_roi + self.n_bg

    def coverage_fine(self) -> np.ndarray:
        """Boolean (n_fine, n_fine) mask of fine pixels inside the region."""
        return ~self.exterior_fine


@dataclass(frozen=True)
class Beam:
    """A single line-of-sight beam."""

    index: int
    angle_deg: float
    offset_mm: float       # signed perpendicular offset from the region center
    point: tuple[float, float]      # a point on the line, mm
    direction: tuple[float, float]  # unit direction


@dataclass(frozen=True)
class BeamSet:
    beams: tuple[Beam, ...]
    angles_deg: tuple[float, ...]
    spacing_mm: float

    def __len__(self) -> int:
        return len(self.beams)

    def __iter__(self):
        return iter(self.beams)

    def __getitem__(self, i: int) -> Beam:
        return self.beams[i]


@dataclass(frozen=True)
class SensitivityMatrix:
    """Dense beam-by-cell chord-length matrix, partitioned [RoI | background]."""

    values: np.ndarray     # (n_beams, n_cells), chord lengths
    roi_cols: int          # column partition point
    units: str             # "cm" (default) or "mm"
    beam_lengths: np.ndarray  # per-beam clipped in-region length, same units

    @property
    def roi(self) -> np.ndarray:
        return self.values[:, : self.roi_cols]

    @property
    def background(self) -> np.ndarray:
        return self.values[:, self.roi_cols:]


def _inside_octagon(x: np.ndarray, y: np.ndarray, side: float, leg: float) -> np.ndarray:
    """Strict interior test for the corner-cut square.

    The epsilon keeps points whose exact coordinates lie on a cut line
    (e.g. coarse-cell centers on the 45-degree boundary) classified as
    outside despite floating-point rounding of the coordinate products.
    """
    eps = 1e-9 * side
    inside = (x > eps) & (x < side - eps) & (y > eps) & (y < side - eps)
    inside &= (x + y > leg + eps) & ((side - x) + y > leg + eps)
    inside &= (x + (side - y) > leg + eps) & ((side - x) + (side - y) > leg + eps)
    return inside


def build_mesh(config: dict | None = None) -> SensingMesh:
    """Build the hierarchical mesh from a geometry config dict.

    Raises GeometryError if the dimensions do not tile exactly or if the
    octagon membership rule does not produce exactly the expected number
    of background cells implied by the config (364 for the default).
    """
    from .config import default_config

    cfg = (config or default_config()["geometry"])
    square = float(cfg["square_mm"])
    fine = float(cfg["fine_cell_mm"])
    coarse = float(cfg["coarse_cell_mm"])
    roi_side_mm = float(cfg["roi_side_mm"])
    leg = float(cfg["corner_cut_leg_mm"])

    n_fine = round(square / fine)
    n_coarse = round(square / coarse)
    patch = round(coarse / fine)
    roi_side = round(roi_side_mm / fine)
    if not math.isclose(n_fine * fine, square, rel_tol=1e-12):
        raise GeometryError("bounding square is not divisible by the fine cell size")
    if not math.isclose(n_coarse * coarse, square, rel_tol=1e-12):
        raise GeometryError("bounding square is not divisible by the coarse cell size")
    if not math.isclose(roi_side * fine, roi_side_mm, rel_tol=1e-12):
        raise GeometryError("RoI side is not divisible by the fine cell size")
    if patch * fine != coarse or (n_fine - roi_side) % 2 != 0:
        raise GeometryError("fine/coarse cell sizes do not nest on the RoI")

    roi_start = (n_fine - roi_side) // 2

    # Coarse-cell centers; rows counted from the top so y decreases with row.
    cc = (np.arange(n_coarse) + 0.5) * coarse
    cx = np.tile(cc, (n_coarse, 1))
    cy = np.tile(cc[::-1, None], (1, n_coarse))
    coarse_inside = _inside_octagon(cx, cy, square, leg)

    # RoI block in coarse coordinates.
    r0 = roi_start // patch
    r1 = (roi_start + roi_side) // patch
    roi_coarse = np.zeros((n_coarse, n_coarse), dtype=bool)
    roi_coarse[r0:r1, r0:r1] = True
    if not coarse_inside[roi_coarse].all():
        raise GeometryError("RoI extends outside the octagon")

    bg_mask = coarse_inside & ~roi_coarse
    bg_cells = np.argwhere(bg_mask)  # row-major order
    bg_index = np.full((n_coarse, n_coarse), -1, dtype=np.int64)
    bg_index[bg_cells[:, 0], bg_cells[:, 1]] = np.arange(len(bg_cells))

    expected_bg = None
    if config is None or "expected_background_cells" not in cfg:
        # The default geometry must reproduce the canonical cell count.
        if (square, fine, coarse, roi_side_mm, leg) == (345.6, 3.6, 14.4, 144.0, 100.8):
            expected_bg = 364
    else:
        expected_bg = int(cfg["expected_background_cells"])
    if expected_bg is not None and len(bg_cells) != expected_bg:
        raise GeometryError(
            f"background cell count {len(bg_cells)} != expected {expected_bg}; "
            "geometry config is inconsistent"
        )

    roi_index = np.full((n_fine, n_fine), -1, dtype=np.int64)
    rr = np.arange(roi_side)
    roi_index[roi_start:roi_start + roi_side, roi_start:roi_start + roi_side] = (
        rr[:, None] * roi_side + rr[None, :]
    )

    exterior_fine = np.repeat(np.repeat(~coarse_inside, patch, axis=0), patch, axis=1)
    # RoI pixels are never exterior (checked above via roi_coarse containment).

    return SensingMesh(
        square_mm=square, fine_mm=fine, coarse_mm=coarse,
        n_fine=n_fine, n_coarse=n_coarse,
        roi_side=roi_side, roi_start=roi_start, patch=patch,
        roi_index=roi_index, bg_index=bg_index, bg_cells=bg_cells,
        coarse_inside=coarse_inside, exterior_fine=exterior_fine,
    )


def build_beams(config: dict | None = None) -> BeamSet:
    """Build the beam set: for each angle, equispaced parallel beams with
    offsets symmetric about the region center.

    Beams are ordered by (angle index, offset ascending); the global index
    is 8 * angle_index + offset_rank for the default 8-beam layout.
    """
    from .config import default_config

    cfg = (config or default_config()["geometry"])
    square = float(cfg["square_mm"])
    angles = tuple(float(a) for a in cfg["angles_deg"])
    count = int(cfg["beams_per_angle"])
    spacing = float(cfg["beam_spacing_mm"])
    if spacing <= 0 or count < 1:
        raise GeometryError("beam spacing must be > 0 and count >= 1")

    center = (square / 2.0, square / 2.0)
    offsets = (np.arange(count) - (count - 1) / 2.0) * spacing
    beams = []
    for ai, ang in enumerate(angles):
        th = math.radians(ang)
        ux, uy = math.cos(th), math.sin(th)
        nx, ny = -uy, ux
        for oi, off in enumerate(offsets):
            beams.append(Beam(
                index=ai * count + oi,
                angle_deg=ang,
                offset_mm=float(off),
                point=(center[0] + off * nx, center[1] + off * ny),
                direction=(ux, uy),
            ))
    return BeamSet(beams=tuple(beams), angles_deg=angles, spacing_mm=spacing)


def _fine_grid_walk(beam: Beam, mesh: SensingMesh):
    """Parametric walk of the beam across the fine grid.

    Returns (rows, cols, lengths_mm, t0s) for every fine pixel the beam
    crosses inside the bounding square, ordered along the beam direction.
    """
    ux, uy = beam.direction
    if ux == 0.0 and uy == 0.0:
        raise GeometryError("degenerate beam direction")
    px, py = beam.point
    side = mesh.square_mm
    cell = mesh.fine_mm
    n = mesh.n_fine

    # Slab clipping of the line to the bounding square.
    tmin, tmax = -math.inf, math.inf
    for p, u in ((px, ux), (py, uy)):
        if abs(u) < 1e-15:
            if p <= 0.0 or p >= side:
                return (np.empty(0, np.int64),) * 2 + (np.empty(0),) * 2
        else:
            t0, t1 = (0.0 - p) / u, (side - p) / u
            if t0 > t1:
                t0, t1 = t1, t0
            tmin, tmax = max(tmin, t0), min(tmax, t1)
    if tmax - tmin <= _T_EPS:
        return (np.empty(0, np.int64),) * 2 + (np.empty(0),) * 2

    crossings = [np.array([tmin, tmax])]
    for p, u in ((px, ux), (py, uy)):
        if abs(u) >= 1e-15:
            tk = (np.arange(n + 1) * cell - p) / u
            crossings.append(tk[(tk > tmin) & (tk < tmax)])
    ts = np.unique(np.concatenate(crossings))
    # Merge near-duplicate crossings (corner hits).
    keep = np.concatenate(([True], np.diff(ts) > _T_EPS))
    ts = ts[keep]
    if ts[-1] < tmax - _T_EPS:
        ts = np.append(ts, tmax)

    t0s, t1s = ts[:-1], ts[1:]
    tm = 0.5 * (t0s + t1s)
    xm = px + tm * ux
    ym = py + tm * uy
    cols = np.clip((xm / cell).astype(np.int64), 0, n - 1)
    rows = np.clip(((side - ym) / cell).astype(np.int64), 0, n - 1)
    lengths = t1s - t0s
    ok = lengths > _T_EPS
    return rows[ok], cols[ok], lengths[ok], t0s[ok]


def clip_beam(beam: Beam, mesh: SensingMesh):
    """Clip a beam to the union of mesh cells (the staircase octagon).

    Returns (entry_point, exit_point, length_mm). Length is the total
    in-region chord length; a beam that misses the region returns length 0
    with entry == exit == None.
    """
    rows, cols, lengths, t0s = _fine_grid_walk(beam, mesh)
    if len(rows) == 0:
        return None, None, 0.0
    inside = ~mesh.exterior_fine[rows, cols]
    if not inside.any():
        return None, None, 0.0
    idx = np.flatnonzero(inside)
    t_in = t0s[idx[0]]
    t_out = t0s[idx[-1]] + lengths[idx[-1]]
    px, py = beam.point
    ux, uy = beam.direction
    entry = (px + t_in * ux, py + t_in * uy)
    exit_ = (px + t_out * ux, py + t_out * uy)
    return entry, exit_, float(lengths[inside].sum())


def traverse_chords(beam: Beam, mesh: SensingMesh):
    """Per-cell chord lengths of a beam through the hierarchical mesh.

    Returns (cell_indices, chord_mm) with cells in first-crossing order
    along the beam; RoI cells carry indices [0, n_roi), background cells
    [n_roi, n_cells). Exterior pixels contribute nothing.
    """
    rows, cols, lengths, _ = _fine_grid_walk(beam, mesh)
    n_roi = mesh.n_roi
    chords = np.zeros(mesh.n_cells)
    order = np.full(mesh.n_cells, -1, dtype=np.int64)
    pos = 0
    patch = mesh.patch
    for r, c, ln in zip(rows, cols, lengths):
        j = mesh.roi_index[r, c]
        if j < 0:
            jb = mesh.bg_index[r // patch, c // patch]
            if jb < 0:
                continue
            j = n_roi + jb
        if order[j] < 0:
            order[j] = pos
            pos += 1
        chords[j] += ln
    cells = np.flatnonzero(order >= 0)
    cells = cells[np.argsort(order[cells])]
    return cells, chords[cells]


def build_sensitivity(beams: BeamSet, mesh: SensingMesh, units: str = "cm") -> SensitivityMatrix:
    """Assemble the dense beam-by-cell chord-length matrix."""
    if units not in ("cm", "mm"):
        raise GeometryError(f"unknown unit {units!r}")
    scale = 1.0 / MM_PER_CM if units == "cm" else 1.0
    values = np.zeros((len(beams), mesh.n_cells))
    lengths = np.zeros(len(beams))
    for beam in beams:
        cells, chords = traverse_chords(beam, mesh)
        values[beam.index, cells] = chords * scale
        _, _, clip_len = clip_beam(beam, mesh)
        lengths[beam.index] = clip_len * scale
    return SensitivityMatrix(values=values, roi_cols=mesh.n_roi, units=units,
                             beam_lengths=lengths)


def sensitivity_to_csv(matrix: SensitivityMatrix, path) -> None:
    """Write the sensitivity matrix as CSV, one row per beam."""
    np.savetxt(path, matrix.values, delimiter=",")
