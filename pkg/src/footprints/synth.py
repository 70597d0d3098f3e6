"""Synthetic driving-sequence generator with known walkable regions.

World frame: z = 0 is the ground plane, z up, x/y horizontal (meters).
The camera rides at a fixed height with heading 0 looking along +x;
its frame follows the package convention (x right, y down, z forward).
Pedestrians do seeded random waypoint walks confined to axis-aligned
walkable rectangles, so every generated observation is inside a known
region and the propagation pipeline can be checked for containment.

Everything is a pure function of the spec (including its seed): one
sequential Philox stream drives all random choices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import InfeasibleSpec, ShapeMismatch
from .geometry import DEFAULT_Z_MIN, CameraIntrinsics, RigidTransform
from .propagation import PropagationParams
from .sequence_io import Frame, PersonObservation, Sequence

# World-space sampling step when rasterizing rectangles into masks.
MASK_SAMPLE_STEP = 0.05
# Pedestrian leg speeds, meters per second.
SPEED_RANGE = (0.5, 2.0)
# A rectangle whose diagonal is shorter than this cannot host a walk.
MIN_WALK_DIAGONAL = 0.5


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle on the ground plane, world meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("rectangle must have positive area")

    @property
    def diagonal(self) -> float:
        return math.hypot(self.xmax - self.xmin, self.ymax - self.ymin)


@dataclass(frozen=True)
class CameraPath:
    """Constant-speed, constant-turn-rate camera trajectory."""

    start: tuple[float, float] = (0.0, 0.0)
    height: float = 1.8
    heading_deg: float = 0.0
    speed: float = 1.0
    turn_rate_deg_s: float = 0.0


@dataclass(frozen=True)
class SceneSpec:
    walkable_rects: tuple[Rect, ...]
    n_pedestrians: int
    n_frames: int
    frame_dt: float
    camera: CameraPath
    intrinsics: CameraIntrinsics
    downsample: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n_frames < 2:
            raise ValueError("n_frames must be >= 2")
        if self.frame_dt <= 0:
            raise ValueError("frame_dt must be positive")
        if self.n_pedestrians < 0:
            raise ValueError("n_pedestrians must be >= 0")
        object.__setattr__(self, "walkable_rects", tuple(self.walkable_rects))

    @classmethod
    def default(cls, seed: int = 7) -> "SceneSpec":
        """Slow drive past a 16 x 12 m walkable patch, ~20 s of capture."""
        return cls(
            walkable_rects=(Rect(4.0, -6.0, 20.0, 6.0),),
            n_pedestrians=5,
            n_frames=20,
            frame_dt=1.0,
            camera=CameraPath(speed=0.5),
            intrinsics=CameraIntrinsics(
                fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480
            ),
            downsample=4,
            seed=seed,
        )

    @classmethod
    def from_json(cls, source: Union[str, Path, dict]) -> "SceneSpec":
        if isinstance(source, (str, Path)):
            data = json.loads(Path(source).read_text(encoding="utf-8"))
        else:
            data = source
        cam = data.get("camera", {})
        intr = data["intrinsics"]
        return cls(
            walkable_rects=tuple(Rect(*r) for r in data["walkable_rects"]),
            n_pedestrians=int(data["n_pedestrians"]),
            n_frames=int(data["n_frames"]),
            frame_dt=float(data["frame_dt"]),
            camera=CameraPath(
                start=tuple(cam.get("start", (0.0, 0.0))),
                height=float(cam.get("height", 1.8)),
                heading_deg=float(cam.get("heading_deg", 0.0)),
                speed=float(cam.get("speed", 1.0)),
                turn_rate_deg_s=float(cam.get("turn_rate_deg_s", 0.0)),
            ),
            intrinsics=CameraIntrinsics(
                fx=float(intr["fx"]), fy=float(intr["fy"]),
                cx=float(intr["cx"]), cy=float(intr["cy"]),
                width=int(intr["width"]), height=int(intr["height"]),
            ),
            downsample=int(data.get("downsample", 4)),
            seed=int(data.get("seed", 0)),
        )


def _camera_pose(position: np.ndarray, heading_rad: float) -> RigidTransform:
    """Camera-to-world pose for a level camera looking along the heading."""
    c, s = math.cos(heading_rad), math.sin(heading_rad)
    right = np.array([s, -c, 0.0])
    down = np.array([0.0, 0.0, -1.0])
    forward = np.array([c, s, 0.0])
    rotation = np.stack([right, down, forward], axis=1)
    return RigidTransform(rotation, position)


def _camera_poses(spec: SceneSpec) -> list[RigidTransform]:
    pos = np.array([spec.camera.start[0], spec.camera.start[1], spec.camera.height])
    heading = math.radians(spec.camera.heading_deg)
    turn = math.radians(spec.camera.turn_rate_deg_s)
    poses = []
    for _ in range(spec.n_frames):
        poses.append(_camera_pose(pos.copy(), heading))
        step = spec.camera.speed * spec.frame_dt
        pos = pos + step * np.array([math.cos(heading), math.sin(heading), 0.0])
        heading += turn * spec.frame_dt
    return poses


def _walk_positions(
    rng: np.random.Generator, rect: Rect, n_frames: int, dt: float
) -> np.ndarray:
    """One pedestrian's ground position per frame: waypoint-to-waypoint
    walking, new waypoint and speed per leg."""

    def sample_point() -> np.ndarray:
        return np.array(
            [rng.uniform(rect.xmin, rect.xmax), rng.uniform(rect.ymin, rect.ymax)]
        )

    pos = sample_point()
    waypoint = sample_point()
    speed = rng.uniform(*SPEED_RANGE)
    out = np.empty((n_frames, 2))
    for k in range(n_frames):
        out[k] = pos
        t_left = dt
        while t_left > 0:
            to_wp = waypoint - pos
            dist = float(np.linalg.norm(to_wp))
            reach = speed * t_left
            if dist > reach:
                pos = pos + to_wp * (reach / dist)
                break
            pos = waypoint
            t_left -= dist / speed
            waypoint = sample_point()
            speed = rng.uniform(*SPEED_RANGE)
    return out


def _rect_world_samples(rect: Rect) -> np.ndarray:
    """Dense ground-plane sampling of a rectangle, (M, 3) with z = 0."""
    xs = np.arange(rect.xmin, rect.xmax + MASK_SAMPLE_STEP / 2, MASK_SAMPLE_STEP)
    ys = np.arange(rect.ymin, rect.ymax + MASK_SAMPLE_STEP / 2, MASK_SAMPLE_STEP)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)


def _rasterize_mask(
    pose: RigidTransform,
    k: CameraIntrinsics,
    downsample: int,
    world_samples: np.ndarray,
) -> np.ndarray:
    h, w = k.grid_shape(downsample)
    mask = np.zeros((h, w), dtype=np.uint8)
    cam = (world_samples - pose.translation) @ pose.rotation
    z = cam[:, 2]
    front = z > DEFAULT_Z_MIN
    if front.any():
        u = k.fx * cam[front, 0] / z[front] + k.cx
        v = k.fy * cam[front, 1] / z[front] + k.cy
        inside = (u >= 0) & (u < k.width) & (v >= 0) & (v < k.height)
        cols = (u[inside] / downsample).astype(np.int64)
        rows = (v[inside] / downsample).astype(np.int64)
        mask[rows, cols] = 1
    return mask


def generate_scene(
    spec: SceneSpec, with_masks: bool = True
) -> tuple[Sequence, list[np.ndarray]]:
    """Build a Sequence plus per-frame ground-truth walkability masks.

    Observations are recorded in each frame's camera coordinates; masks
    mark label-grid cells covered by the projected walkable rectangles.
    Deterministic for a fixed spec. Mask rasterization is dense and can
    dominate runtime on large scenes; pass with_masks=False to skip it
    (an empty list is returned instead).
    """
    walkable = [r for r in spec.walkable_rects if r.diagonal >= MIN_WALK_DIAGONAL]
    if spec.n_pedestrians > 0 and not walkable:
        raise InfeasibleSpec(
            f"no rectangle with diagonal >= {MIN_WALK_DIAGONAL} m to walk in"
        )

    poses = _camera_poses(spec)
    rng = np.random.Generator(np.random.Philox(spec.seed))

    observations = []
    for p in range(spec.n_pedestrians):
        rect = walkable[int(rng.integers(len(walkable)))]
        ground = _walk_positions(rng, rect, spec.n_frames, spec.frame_dt)
        for k in range(spec.n_frames):
            world = np.array([ground[k, 0], ground[k, 1], 0.0])
            cam = poses[k].rotation.T @ (world - poses[k].translation)
            observations.append(
                PersonObservation(
                    object_id=f"ped{p:03d}", frame_index=k, foot_point=cam
                )
            )

    seq = Sequence(
        sequence_id=f"synth-{spec.seed:08d}",
        intrinsics=spec.intrinsics,
        frames=tuple(
            Frame(frame_index=k, timestamp=k * spec.frame_dt, pose=poses[k])
            for k in range(spec.n_frames)
        ),
        observations=tuple(observations),
    )

    masks: list[np.ndarray] = []
    if with_masks:
        samples = [_rect_world_samples(r) for r in spec.walkable_rects]
        for pose in poses:
            mask = np.zeros(spec.intrinsics.grid_shape(spec.downsample), dtype=np.uint8)
            for pts in samples:
                mask |= _rasterize_mask(pose, spec.intrinsics, spec.downsample, pts)
            masks.append(mask)
    return seq, masks


@dataclass
class CoverageViolation:
    ref_frame: int
    source_frame: int
    object_id: str
    center: tuple[float, float]  # grid units
    distance: float  # cells to the nearest mask positive


@dataclass
class CoverageReport:
    checked: int = 0
    violations: list[CoverageViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def coverage_check(
    seq: Sequence, masks: list[np.ndarray], params: PropagationParams
) -> CoverageReport:
    """Verify every on-grid splat center lies within the ground-truth
    mask dilated by support_radius cells.

    Centers are taken pre-truncation: every projected observation whose
    center lands inside the grid is checked against every reference
    frame's mask. Violations are reported, not raised.
    """
    if len(masks) != len(seq.frames):
        raise ShapeMismatch(
            f"{len(masks)} masks for {len(seq.frames)} frames"
        )
    k = seq.intrinsics
    s = params.downsample
    h, w = k.grid_shape(s)
    support = params.support
    report = CoverageReport()

    pos_centers = []
    for mask in masks:
        if mask.shape != (h, w):
            raise ShapeMismatch(f"mask shape {mask.shape} != grid {(h, w)}")
        rc = np.argwhere(mask > 0)
        pos_centers.append(rc[:, ::-1] + 0.5)  # (P, 2) as (cx, cy)

    for i, ref in enumerate(seq.frames):
        rot_wr = ref.pose.rotation.T
        centers = pos_centers[i]
        for obs in seq.observations:
            src = seq.frame(obs.frame_index)
            world = src.pose.apply(obs.foot_point)
            cam = rot_wr @ (world - ref.pose.translation)
            if cam[2] <= params.z_min:
                continue
            gx = (k.fx * cam[0] / cam[2] + k.cx) / s
            gy = (k.fy * cam[1] / cam[2] + k.cy) / s
            if not (0 <= gx < w and 0 <= gy < h):
                continue
            report.checked += 1
            if centers.shape[0]:
                d = float(
                    np.sqrt(((centers - (gx, gy)) ** 2).sum(axis=1)).min()
                )
            else:
                d = math.inf
            if d > support:
                report.violations.append(
                    CoverageViolation(
                        ref_frame=ref.frame_index,
                        source_frame=obs.frame_index,
                        object_id=obs.object_id,
                        center=(float(gx), float(gy)),
                        distance=d,
                    )
                )
    return report
