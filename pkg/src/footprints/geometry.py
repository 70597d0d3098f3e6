"""Rigid 3D transforms and pinhole projection.

Coordinate conventions used throughout the package:

  Camera frame (standard computer vision):
    - x right, y down, z forward (along the optical axis, into the scene)
  Image frame:
    - u right, v down, origin at the top-left corner, units pixels
  Poses:
    - stored as camera-to-world transforms; frame-to-frame transforms are
      always derived via `relative_transform`, never stored

All rotations are 3x3 matrices validated to be orthonormal with det +1.
All values are float64; transforms are immutable once constructed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidTransform, NonFiniteValue

# Tolerance at which a rotation is accepted as-is.
ORTHONORMAL_TOL = 1e-9
# Drift in (ORTHONORMAL_TOL, REPAIR_LIMIT] after a product is silently
# re-orthonormalized; anything beyond is reported as an error.
REPAIR_LIMIT = 1e-6

DEFAULT_Z_MIN = 0.1


class Pixel(NamedTuple):
    """Continuous image coordinates, pixels."""

    u: float
    v: float


def _rotation_drift(r: np.ndarray) -> float:
    """Max elementwise deviation of r'r from I, plus det deviation from 1."""
    err = np.abs(r.T @ r - np.eye(3)).max()
    return max(float(err), abs(float(np.linalg.det(r)) - 1.0))


def _orthonormalize(r: np.ndarray) -> np.ndarray:
    """Nearest rotation in Frobenius norm (polar factor via SVD)."""
    u, _, vt = np.linalg.svd(r)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


@dataclass(frozen=True, eq=False)
class CameraIntrinsics:
    """Ideal pinhole camera, no distortion."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy, self.width, self.height)
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteValue("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")

    def grid_shape(self, downsample: int) -> tuple[int, int]:
        """(rows, cols) of the label grid at the given downsample factor."""
        return (
            math.ceil(self.height / downsample),
            math.ceil(self.width / downsample),
        )


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion: x -> rotation @ x + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if rot.shape != (3, 3):
            raise InvalidTransform(f"rotation must be 3x3, got {rot.shape}")
        if not (np.isfinite(rot).all() and np.isfinite(t).all()):
            raise NonFiniteValue("transform entries must be finite")
        drift = _rotation_drift(rot)
        if drift > ORTHONORMAL_TOL:
            raise InvalidTransform(
                f"rotation not orthonormal (drift {drift:.3e} > {ORTHONORMAL_TOL:.0e})"
            )
        rot = rot.copy()
        t = t.copy()
        rot.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a batch (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        if p.shape == (3,):
            return self.rotation @ p + self.translation
        return p @ self.rotation.T + self.translation


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform applying b first, then a: result(x) = a(b(x)).

    Floating-point drift up to REPAIR_LIMIT is projected back onto the
    rotation group; larger drift raises InvalidTransform rather than being
    silently repaired.
    """
    rot = a.rotation @ b.rotation
    t = a.rotation @ b.translation + a.translation
    drift = _rotation_drift(rot)
    if drift > ORTHONORMAL_TOL:
        if drift > REPAIR_LIMIT:
            raise InvalidTransform(
                f"composition drift {drift:.3e} exceeds repair limit {REPAIR_LIMIT:.0e}"
            )
        rot = _orthonormalize(rot)
    return RigidTransform(rot, t)


def invert(t: RigidTransform) -> RigidTransform:
    """Inverse motion: invert(t)(t(x)) = x."""
    rot = t.rotation.T
    return RigidTransform(rot, -(rot @ t.translation))


def relative_transform(
    pose_src: RigidTransform, pose_dst: RigidTransform
) -> RigidTransform:
    """Map src-camera coordinates to dst-camera coordinates.

    Both arguments are camera-to-world poses sharing one world frame;
    the result is invert(pose_dst) composed with pose_src.
    """
    return compose(invert(pose_dst), pose_src)


def project(
    k: CameraIntrinsics, p: np.ndarray, z_min: float = DEFAULT_Z_MIN
) -> Optional[Pixel]:
    """Pinhole projection of a camera-frame point.

    Returns the continuous pixel even when it falls outside the image
    bounds (callers clip). Returns None when depth <= z_min ("behind
    camera", including the near-plane band where projection blows up).
    """
    p = np.asarray(p, dtype=np.float64).reshape(3)
    if not np.isfinite(p).all():
        raise NonFiniteValue("cannot project non-finite point")
    z = p[2]
    if z <= z_min:
        return None
    return Pixel(float(k.fx * p[0] / z + k.cx), float(k.fy * p[1] / z + k.cy))


def project_points(
    k: CameraIntrinsics, points: np.ndarray, z_min: float = DEFAULT_Z_MIN
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of (N, 3) camera-frame points.

    Returns (uv, valid): uv is (N, 2), rows where valid is False (depth
    <= z_min) are left as NaN.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not np.isfinite(pts).all():
        raise NonFiniteValue("cannot project non-finite points")
    z = pts[:, 2]
    valid = z > z_min
    uv = np.full((pts.shape[0], 2), np.nan)
    zv = z[valid]
    uv[valid, 0] = k.fx * pts[valid, 0] / zv + k.cx
    uv[valid, 1] = k.fy * pts[valid, 1] / zv + k.cy
    return uv, valid


def rotation_x(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_y(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(angle_rad: float) -> np.ndarray:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
