"""Footprint and walking-direction propagation.

Every person observation in a sequence is reprojected into a chosen
reference frame and splatted as a truncated Gaussian onto the label
grid; summing over all frames and objects yields the footprint map.
Walking directions are the image-plane displacement of consecutive
observations of the same object, accumulated by Gaussian-weighted
vector averaging.

Label-grid convention: with downsample s, cell (r, c) covers image
pixels [c*s, (c+1)*s) x [r*s, (r+1)*s) and has its center at image
point ((c + 0.5) * s, (r + 0.5) * s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._splat import accumulate_gaussians
from .errors import NonFiniteValue
from .geometry import DEFAULT_Z_MIN
from .sequence_io import Sequence

# Present direction cells must carry a unit vector; sums below this norm
# are treated as cancelled and left absent.
DIRECTION_CANCEL_NORM = 1e-6
# 3D displacement below this is a stationary observation (meters).
STATIONARY_DISPLACEMENT = 0.01
# Image-plane displacement below this cannot be normalized meaningfully
# (motion almost exactly along the optical ray).
DEGENERATE_PIXEL_DISPLACEMENT = 1e-12


@dataclass(frozen=True)
class PropagationParams:
    """Splat geometry knobs.

    sigma and support_radius are in label-grid cells; support_radius
    defaults to 3 * sigma. downsample is image pixels per grid cell.
    """

    sigma: float = 2.0
    downsample: int = 1
    support_radius: Optional[float] = None
    z_min: float = DEFAULT_Z_MIN

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive and finite")
        if int(self.downsample) != self.downsample or self.downsample < 1:
            raise ValueError("downsample must be an integer >= 1")
        if self.support_radius is not None and not (
            self.support_radius >= self.sigma
        ):
            raise ValueError("support_radius must be >= sigma")
        if not (math.isfinite(self.z_min) and self.z_min > 0):
            raise ValueError("z_min must be positive and finite")

    @property
    def support(self) -> float:
        return 3.0 * self.sigma if self.support_radius is None else self.support_radius


@dataclass
class Diagnostics:
    """Counters for observations that contributed nothing."""

    behind_camera: int = 0
    off_grid: int = 0
    splatted: int = 0


@dataclass(eq=False)
class FootprintMap:
    """Accumulated footprint grid for one reference frame."""

    grid: np.ndarray
    params: PropagationParams
    ref_frame: int
    diagnostics: Diagnostics = field(default_factory=Diagnostics)


@dataclass(eq=False)
class DirectionMap:
    """Per-cell expected walking direction in the image plane.

    vectors is (H, W, 2) holding unit (du, dv) where valid is True;
    invalid cells hold zeros.
    """

    vectors: np.ndarray
    valid: np.ndarray
    params: PropagationParams
    ref_frame: int
    diagnostics: Diagnostics = field(default_factory=Diagnostics)


def _relative_pose_arrays(seq: Sequence, ref_frame: int):
    """Rotations/translations mapping each frame's camera coords into the
    reference frame's camera coords, stacked over frames.

    Poses were validated at construction, so the products here carry at
    most ~1e-15 orthonormality drift and are used directly.
    """
    ref_pose = seq.frame(ref_frame).pose
    rot_wr = ref_pose.rotation.T  # world -> ref camera
    rots = np.stack([f.pose.rotation for f in seq.frames])
    ts = np.stack([f.pose.translation for f in seq.frames])
    rel_rot = rot_wr[None, :, :] @ rots
    rel_t = (ts - ref_pose.translation) @ rot_wr.T
    return rel_rot, rel_t


def splat_centers(
    seq: Sequence, ref_frame: int, params: PropagationParams
) -> tuple[np.ndarray, Diagnostics]:
    """Project every observation into ref_frame's label grid.

    Returns (centers, diagnostics): centers is (K, 2) float64 of (gx, gy)
    in grid units for the observations that survive the behind-camera
    test and the off-grid band (centers farther than support_radius
    cells outside the grid contribute nothing and are dropped).
    """
    k = seq.intrinsics
    s = params.downsample
    h, w = k.grid_shape(s)
    support = params.support
    rel_rot, rel_t = _relative_pose_arrays(seq, ref_frame)
    frame_row = {f.frame_index: i for i, f in enumerate(seq.frames)}
    grouped = seq.foot_points_by_frame()

    diag = Diagnostics()
    chunks = []
    for f in seq.frames:
        pts = grouped.get(f.frame_index)
        if pts is None:
            continue
        row = frame_row[f.frame_index]
        cam = pts @ rel_rot[row].T + rel_t[row]
        z = cam[:, 2]
        in_front = z > params.z_min
        diag.behind_camera += int((~in_front).sum())
        if not in_front.any():
            continue
        cam = cam[in_front]
        z = z[in_front]
        gx = (k.fx * cam[:, 0] / z + k.cx) / s
        gy = (k.fy * cam[:, 1] / z + k.cy) / s
        on_band = (
            (gx >= -support)
            & (gx <= w + support)
            & (gy >= -support)
            & (gy <= h + support)
        )
        diag.off_grid += int((~on_band).sum())
        if on_band.any():
            chunks.append(np.stack([gx[on_band], gy[on_band]], axis=1))
    centers = (
        np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.float64)
    )
    diag.splatted = centers.shape[0]
    return centers, diag


def propagate_footprints(
    seq: Sequence, ref_frame: int, params: Optional[PropagationParams] = None
) -> FootprintMap:
    """Accumulate Gaussian splats of all reprojected foot points.

    Each surviving projection adds an unnormalized Gaussian (peak 1,
    std sigma, truncated beyond support_radius) centered on the
    projected point; contributions from all frames and objects sum.
    """
    params = params or PropagationParams()
    h, w = seq.intrinsics.grid_shape(params.downsample)
    centers, diag = splat_centers(seq, ref_frame, params)
    grids = np.zeros((1, h, w), dtype=np.float64)
    if centers.shape[0]:
        values = np.ones((centers.shape[0], 1), dtype=np.float64)
        accumulate_gaussians(grids, centers, values, params.sigma, params.support)
    return FootprintMap(
        grid=grids[0], params=params, ref_frame=ref_frame, diagnostics=diag
    )


def binarize(map_or_grid) -> np.ndarray:
    """Non-zero cells to 1, zero cells to 0 (uint8)."""
    grid = np.asarray(getattr(map_or_grid, "grid", map_or_grid))
    if not np.isfinite(grid).all():
        raise NonFiniteValue("cannot binarize a non-finite map")
    return (grid > 0).astype(np.uint8)


def walking_direction(
    p_now: np.ndarray,
    p_next: np.ndarray,
    min_displacement: float = STATIONARY_DISPLACEMENT,
) -> Optional[np.ndarray]:
    """Unit 3-vector from p_now toward p_next (both in one frame).

    Returns None for stationary observations (displacement below
    min_displacement meters).
    """
    a = np.asarray(p_now, dtype=np.float64).reshape(3)
    b = np.asarray(p_next, dtype=np.float64).reshape(3)
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise NonFiniteValue("walking_direction requires finite points")
    d = b - a
    norm = float(np.linalg.norm(d))
    if norm < min_displacement:
        return None
    return d / norm


def _trajectory_steps(seq: Sequence):
    """(obs_now, obs_next) pairs of consecutive annotations per object."""
    by_object: dict[str, list] = {}
    for o in seq.observations:
        by_object.setdefault(o.object_id, []).append(o)
    steps = []
    for traj in by_object.values():
        traj.sort(key=lambda o: o.frame_index)
        steps.extend(zip(traj, traj[1:]))
    return steps


def propagate_directions(
    seq: Sequence, ref_frame: int, params: Optional[PropagationParams] = None
) -> DirectionMap:
    """Gaussian-weighted average of image-plane walking directions.

    For each observation with a successor, both endpoints are
    transformed into the reference frame and projected; the normalized
    pixel displacement is splatted (weighted by the same truncated
    Gaussian as footprints, centered on the current endpoint). Cells
    whose accumulated vector nearly cancels are left absent.
    """
    params = params or PropagationParams()
    k = seq.intrinsics
    s = params.downsample
    h, w = k.grid_shape(s)
    support = params.support
    rel_rot, rel_t = _relative_pose_arrays(seq, ref_frame)
    frame_row = {f.frame_index: i for i, f in enumerate(seq.frames)}

    diag = Diagnostics()
    centers = []
    dirs = []
    for now, nxt in _trajectory_steps(seq):
        r_now = frame_row[now.frame_index]
        r_nxt = frame_row[nxt.frame_index]
        p_now = rel_rot[r_now] @ now.foot_point + rel_t[r_now]
        p_next = rel_rot[r_nxt] @ nxt.foot_point + rel_t[r_nxt]
        if np.linalg.norm(p_next - p_now) < STATIONARY_DISPLACEMENT:
            continue  # stationary observation, contributes no direction
        if p_now[2] <= params.z_min or p_next[2] <= params.z_min:
            diag.behind_camera += 1
            continue
        u0 = k.fx * p_now[0] / p_now[2] + k.cx
        v0 = k.fy * p_now[1] / p_now[2] + k.cy
        u1 = k.fx * p_next[0] / p_next[2] + k.cx
        v1 = k.fy * p_next[1] / p_next[2] + k.cy
        gx, gy = u0 / s, v0 / s
        if not (-support <= gx <= w + support and -support <= gy <= h + support):
            diag.off_grid += 1
            continue
        du, dv = u1 - u0, v1 - v0
        norm = math.hypot(du, dv)
        if norm < DEGENERATE_PIXEL_DISPLACEMENT:
            continue  # motion along the optical ray projects to a point
        centers.append((gx, gy))
        dirs.append((du / norm, dv / norm))

    grids = np.zeros((2, h, w), dtype=np.float64)
    if centers:
        accumulate_gaussians(
            grids,
            np.asarray(centers, dtype=np.float64),
            np.asarray(dirs, dtype=np.float64),
            params.sigma,
            support,
        )
    diag.splatted = len(centers)
    sums = np.moveaxis(grids, 0, -1)  # (H, W, 2)
    norms = np.linalg.norm(sums, axis=-1)
    valid = norms >= DIRECTION_CANCEL_NORM
    vectors = np.zeros_like(sums)
    vectors[valid] = sums[valid] / norms[valid, None]
    return DirectionMap(
        vectors=vectors,
        valid=valid,
        params=params,
        ref_frame=ref_frame,
        diagnostics=diag,
    )
