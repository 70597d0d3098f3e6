"""Sequence interchange format and output artifacts.

A capture sequence is stored as UTF-8 JSON Lines: one header record,
frame records in increasing frame_index, then observation records in any
order. Rotations are serialized as 9 row-major numbers; positions are
meters, timestamps seconds. See docs/format.md for the full schema.

Dense maps are written as 16-bit PGM (P5, maxval 65535) with the true
peak value recorded in a "# vmax=" header comment, as 8-bit PNG for
visualization, or as PFM for direction maps. Metric reports go to JSON
or CSV with a fixed key/column order.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Optional, Union

import numpy as np

from .errors import (
    DuplicateFrameIndex,
    InvariantViolation,
    MalformedRecord,
    NonFiniteValue,
    UnknownFrame,
)
from .evaluation import MetricsReport
from .geometry import CameraIntrinsics, RigidTransform

PathLike = Union[str, Path]

METRIC_FIELDS = ("pred_total", "pred_valid_tp", "missing_fn", "expansion", "map", "kl")


@dataclass(frozen=True, eq=False)
class PersonObservation:
    """One 3D person annotation: foot point in the annotating frame's
    camera coordinates (meters)."""

    object_id: str
    frame_index: int
    foot_point: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.foot_point, dtype=np.float64).reshape(3)
        if not np.isfinite(p).all():
            raise NonFiniteValue(
                f"foot_point of {self.object_id!r}@{self.frame_index} not finite"
            )
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "foot_point", p)


@dataclass(frozen=True, eq=False)
class Frame:
    frame_index: int
    timestamp: float
    pose: RigidTransform  # camera-to-world


@dataclass(eq=False)
class Sequence:
    """A capture episode: intrinsics, posed frames, person observations.

    Immutable after construction; labels are never propagated across
    Sequence boundaries.
    """

    sequence_id: str
    intrinsics: CameraIntrinsics
    frames: tuple[Frame, ...]
    observations: tuple[PersonObservation, ...] = ()
    _frame_lookup: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.frames = tuple(self.frames)
        self.observations = tuple(self.observations)
        if len(self.frames) == 0:
            raise InvariantViolation("sequence has no frames")
        lookup = {}
        prev_ts = None
        prev_idx = None
        for f in self.frames:
            if f.frame_index in lookup:
                raise DuplicateFrameIndex(f.frame_index)
            if prev_idx is not None and f.frame_index < prev_idx:
                raise InvariantViolation(
                    "frames out of order", f"frame_index {f.frame_index}"
                )
            if not math.isfinite(f.timestamp):
                raise NonFiniteValue(f"timestamp of frame {f.frame_index}")
            if prev_ts is not None and f.timestamp <= prev_ts:
                raise InvariantViolation(
                    "timestamps not strictly increasing",
                    f"frame {f.frame_index}",
                )
            lookup[f.frame_index] = f
            prev_ts = f.timestamp
            prev_idx = f.frame_index
        for o in self.observations:
            if o.frame_index not in lookup:
                raise InvariantViolation(
                    "observation references missing frame",
                    f"{o.object_id!r} -> frame {o.frame_index}",
                )
        self._frame_lookup = lookup

    def frame(self, frame_index: int) -> Frame:
        try:
            return self._frame_lookup[frame_index]
        except KeyError:
            raise UnknownFrame(
                f"frame {frame_index} not in sequence {self.sequence_id!r}"
            ) from None

    def has_frame(self, frame_index: int) -> bool:
        return frame_index in self._frame_lookup

    def foot_points_by_frame(self) -> dict[int, np.ndarray]:
        """Stacked (N_i, 3) foot points per frame_index, in stored order.

        Cached: sequences are immutable after construction.
        """
        cached = getattr(self, "_fp_groups", None)
        if cached is None:
            groups: dict[int, list[np.ndarray]] = {}
            for o in self.observations:
                groups.setdefault(o.frame_index, []).append(o.foot_point)
            cached = {fi: np.stack(pts) for fi, pts in groups.items()}
            self._fp_groups = cached
        return cached


# -- JSON Lines sequence format ------------------------------------------


def _require(record: dict, key: str, line: int):
    if key not in record:
        raise MalformedRecord(line, f"missing field {key!r}")
    return record[key]


def _as_number(value, name: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedRecord(line, f"{name} must be a number")
    return float(value)


def _number_list(value, n: int, name: str, line: int) -> list[float]:
    if not isinstance(value, list) or len(value) != n:
        raise MalformedRecord(line, f"{name} must be a list of {n} numbers")
    return [_as_number(v, name, line) for v in value]


def parse_sequence(source: Union[PathLike, bytes, BinaryIO]) -> Sequence:
    """Parse and validate a JSON-lines sequence.

    Raises MalformedRecord with the 1-based line number of the first
    offending line, or InvariantViolation / DuplicateFrameIndex when the
    records are individually well-formed but structurally inconsistent.
    """
    if isinstance(source, (str, Path)):
        raw = Path(source).read_bytes()
    elif isinstance(source, bytes):
        raw = source
    else:
        raw = source.read()

    header = None
    frames: list[Frame] = []
    seen_frames: set[int] = set()
    observations: list[tuple[int, PersonObservation]] = []
    prev_frame_index = None

    for line_no, line in enumerate(raw.splitlines(), start=1):
        text = line.decode("utf-8").strip()
        if not text:
            continue
        try:
            record = json.loads(text)
        except json.JSONDecodeError as e:
            raise MalformedRecord(line_no, f"invalid JSON ({e.msg})") from None
        if not isinstance(record, dict):
            raise MalformedRecord(line_no, "record must be a JSON object")
        rtype = _require(record, "type", line_no)

        if rtype == "header":
            if header is not None:
                raise MalformedRecord(line_no, "duplicate header")
            if frames or observations:
                raise MalformedRecord(line_no, "header must be the first record")
            intr = _require(record, "intrinsics", line_no)
            if not isinstance(intr, dict):
                raise MalformedRecord(line_no, "intrinsics must be an object")
            seq_id = _require(record, "sequence_id", line_no)
            if not isinstance(seq_id, str):
                raise MalformedRecord(line_no, "sequence_id must be a string")
            try:
                intrinsics = CameraIntrinsics(
                    fx=_as_number(_require(intr, "fx", line_no), "fx", line_no),
                    fy=_as_number(_require(intr, "fy", line_no), "fy", line_no),
                    cx=_as_number(_require(intr, "cx", line_no), "cx", line_no),
                    cy=_as_number(_require(intr, "cy", line_no), "cy", line_no),
                    width=int(_as_number(_require(intr, "width", line_no), "width", line_no)),
                    height=int(_as_number(_require(intr, "height", line_no), "height", line_no)),
                )
            except (ValueError, NonFiniteValue) as e:
                raise MalformedRecord(line_no, f"bad intrinsics: {e}") from None
            header = (seq_id, intrinsics)

        elif rtype == "frame":
            if header is None:
                raise MalformedRecord(line_no, "frame record before header")
            idx = _require(record, "frame_index", line_no)
            if isinstance(idx, bool) or not isinstance(idx, int):
                raise MalformedRecord(line_no, "frame_index must be an integer")
            if idx in seen_frames:
                raise DuplicateFrameIndex(idx)
            if prev_frame_index is not None and idx < prev_frame_index:
                raise MalformedRecord(line_no, "frame_index not increasing")
            ts = _as_number(_require(record, "timestamp", line_no), "timestamp", line_no)
            rot = _number_list(_require(record, "rotation", line_no), 9, "rotation", line_no)
            t = _number_list(_require(record, "translation", line_no), 3, "translation", line_no)
            try:
                pose = RigidTransform(np.array(rot).reshape(3, 3), np.array(t))
            except Exception as e:
                raise MalformedRecord(line_no, f"bad pose: {e}") from None
            frames.append(Frame(frame_index=idx, timestamp=ts, pose=pose))
            seen_frames.add(idx)
            prev_frame_index = idx

        elif rtype == "observation":
            if header is None:
                raise MalformedRecord(line_no, "observation record before header")
            oid = _require(record, "object_id", line_no)
            if not isinstance(oid, str):
                raise MalformedRecord(line_no, "object_id must be a string")
            idx = _require(record, "frame_index", line_no)
            if isinstance(idx, bool) or not isinstance(idx, int):
                raise MalformedRecord(line_no, "frame_index must be an integer")
            fp = _number_list(_require(record, "foot_point", line_no), 3, "foot_point", line_no)
            try:
                obs = PersonObservation(object_id=oid, frame_index=idx, foot_point=np.array(fp))
            except NonFiniteValue as e:
                raise MalformedRecord(line_no, str(e)) from None
            observations.append((line_no, obs))

        else:
            raise MalformedRecord(line_no, f"unknown record type {rtype!r}")

    if header is None:
        raise MalformedRecord(1, "missing header record")
    seq_id, intrinsics = header
    known = {f.frame_index for f in frames}
    for line_no, obs in observations:
        if obs.frame_index not in known:
            raise InvariantViolation(
                "observation references missing frame",
                f"line {line_no}: {obs.object_id!r} -> frame {obs.frame_index}",
            )
    return Sequence(
        sequence_id=seq_id,
        intrinsics=intrinsics,
        frames=tuple(frames),
        observations=tuple(o for _, o in observations),
    )


def _dump(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


def sequence_to_bytes(seq: Sequence) -> bytes:
    """Canonical serialization: header, frames, then observations.

    Numbers are written with Python's shortest round-trip float
    formatting, so parse(write(seq)) reproduces every field exactly.
    """
    out = io.StringIO()
    k = seq.intrinsics
    out.write(
        _dump(
            {
                "type": "header",
                "sequence_id": seq.sequence_id,
                "intrinsics": {
                    "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
                    "width": k.width, "height": k.height,
                },
            }
        )
        + "\n"
    )
    for f in seq.frames:
        out.write(
            _dump(
                {
                    "type": "frame",
                    "frame_index": f.frame_index,
                    "timestamp": f.timestamp,
                    "rotation": [float(v) for v in f.pose.rotation.ravel()],
                    "translation": [float(v) for v in f.pose.translation],
                }
            )
            + "\n"
        )
    for o in seq.observations:
        out.write(
            _dump(
                {
                    "type": "observation",
                    "object_id": o.object_id,
                    "frame_index": o.frame_index,
                    "foot_point": [float(v) for v in o.foot_point],
                }
            )
            + "\n"
        )
    return out.getvalue().encode("utf-8")


def write_sequence(seq: Sequence, path: PathLike) -> None:
    Path(path).write_bytes(sequence_to_bytes(seq))


# -- dense map formats -----------------------------------------------------


def _grid_of(map_or_grid) -> np.ndarray:
    grid = getattr(map_or_grid, "grid", map_or_grid)
    return np.asarray(grid, dtype=np.float64)


def write_heatmap(map_or_grid, path: PathLike, format: str = "pgm16") -> None:
    """Write a non-negative dense map as PGM16 (lossless up to 16-bit
    quantization of value/vmax) or PNG8 (visualization only)."""
    grid = _grid_of(map_or_grid)
    if grid.ndim != 2:
        raise ValueError("heatmap grid must be 2-D")
    if not np.isfinite(grid).all():
        raise NonFiniteValue("heatmap contains non-finite values")
    if (grid < 0).any():
        raise ValueError("heatmap values must be >= 0")
    vmax = float(grid.max()) if grid.size else 0.0
    fmt = format.lower()
    if fmt == "pgm16":
        q = (
            np.zeros(grid.shape, dtype=np.uint16)
            if vmax == 0.0
            else np.round(grid * (65535.0 / vmax)).astype(np.uint16)
        )
        header = f"P5\n# vmax={vmax!r}\n{grid.shape[1]} {grid.shape[0]}\n65535\n"
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(q.astype(">u2").tobytes())
    elif fmt == "png8":
        from PIL import Image

        q8 = (
            np.zeros(grid.shape, dtype=np.uint8)
            if vmax == 0.0
            else np.round(grid * (255.0 / vmax)).astype(np.uint8)
        )
        Image.fromarray(q8, mode="L").save(str(path))
    else:
        raise ValueError(f"unknown heatmap format {format!r}")


def write_pgm_raw(grid: np.ndarray, path: PathLike, maxval: Optional[int] = None) -> None:
    """Write integer values (e.g. semantic class ids) verbatim as PGM."""
    g = np.asarray(grid)
    if g.ndim != 2 or not np.issubdtype(g.dtype, np.integer):
        raise ValueError("raw PGM requires a 2-D integer grid")
    if (g < 0).any():
        raise ValueError("raw PGM values must be >= 0")
    maxval = int(g.max()) if maxval is None else int(maxval)
    maxval = max(maxval, 1)
    if maxval > 65535 or int(g.max()) > maxval:
        raise ValueError("values exceed 16-bit PGM range")
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{g.shape[1]} {g.shape[0]}\n{maxval}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(g.astype(dtype).tobytes())


def read_heatmap(path: PathLike, raw: bool = False) -> np.ndarray:
    """Read a PGM heatmap back to float values.

    Files written by write_heatmap carry the original peak in a
    "# vmax=" comment and are dequantized with it; plain PGMs without
    the comment are normalized by their maxval into [0, 1]. With
    raw=True the stored integers are returned unscaled (for semantic
    class-id maps).
    """
    raw_bytes = Path(path).read_bytes()
    if not raw_bytes.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    vmax = None
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(raw_bytes) and raw_bytes[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(raw_bytes):
            raise ValueError(f"{path}: truncated PGM header")
        if raw_bytes[pos : pos + 1] == b"#":
            end = raw_bytes.index(b"\n", pos)
            comment = raw_bytes[pos + 1 : end].decode("ascii").strip()
            if comment.startswith("vmax="):
                vmax = float(comment[5:])
            pos = end + 1
            continue
        start = pos
        while pos < len(raw_bytes) and not raw_bytes[pos : pos + 1].isspace():
            pos += 1
        tokens.append(int(raw_bytes[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval <= 0 or maxval > 65535:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    dtype = ">u2" if maxval > 255 else "u1"
    data = np.frombuffer(raw_bytes, dtype=dtype, count=width * height, offset=pos)
    q = data.reshape(height, width)
    if raw:
        return q.astype(np.int64)
    scale = (vmax / maxval) if vmax is not None else (1.0 / maxval)
    return q.astype(np.float64) * scale


def write_direction_map(dmap, path: PathLike) -> None:
    """Write a direction map as 3-channel PFM: (dx, dy, valid).

    Standard PFM has no 2-channel variant, so the third channel carries
    the presence mask (1 where a direction exists, else 0); absent cells
    store a zero vector. Little-endian float32, rows bottom-to-top.
    """
    vectors = np.asarray(dmap.vectors, dtype=np.float32)
    valid = np.asarray(dmap.valid, dtype=np.float32)
    h, w = valid.shape
    planes = np.zeros((h, w, 3), dtype=np.float32)
    planes[:, :, 0] = np.where(dmap.valid, vectors[:, :, 0], 0.0)
    planes[:, :, 1] = np.where(dmap.valid, vectors[:, :, 1], 0.0)
    planes[:, :, 2] = valid
    with open(path, "wb") as fh:
        fh.write(f"PF\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(planes[::-1].tobytes())  # bottom-to-top scanlines


def read_direction_map(path: PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Read a PFM direction map; returns (vectors (H, W, 2), valid (H, W))."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"PF":
        raise ValueError(f"{path}: not a 3-channel PFM file")
    w, h = (int(v) for v in parts[1].split())
    scale = float(parts[2])
    dtype = "<f4" if scale < 0 else ">f4"
    planes = np.frombuffer(parts[3], dtype=dtype, count=w * h * 3)
    planes = planes.reshape(h, w, 3)[::-1]
    valid = planes[:, :, 2] > 0.5
    return planes[:, :, :2].astype(np.float64), valid


# -- metric reports --------------------------------------------------------


def _report_values(report: MetricsReport) -> list:
    return [getattr(report, name) for name in METRIC_FIELDS]


def write_metrics(report: MetricsReport, path: PathLike, format: str = "json") -> None:
    """Serialize a report with stable key names / column order."""
    fmt = format.lower()
    if fmt == "json":
        payload = dict(zip(METRIC_FIELDS, _report_values(report)))
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    elif fmt == "csv":
        values = ["" if v is None else repr(v) for v in _report_values(report)]
        text = ",".join(METRIC_FIELDS) + "\n" + ",".join(values) + "\n"
        Path(path).write_text(text, encoding="utf-8")
    else:
        raise ValueError(f"unknown metrics format {format!r}")


def read_metrics(path: PathLike, format: Optional[str] = None) -> MetricsReport:
    fmt = format.lower() if format else Path(path).suffix.lstrip(".").lower()
    text = Path(path).read_text(encoding="utf-8")
    if fmt == "json":
        data = json.loads(text)
        for name in METRIC_FIELDS[:4]:
            if not isinstance(data.get(name), (int, float)):
                raise ValueError(f"{path}: missing or non-numeric field {name!r}")
        return MetricsReport(**{k: data.get(k) for k in METRIC_FIELDS})
    if fmt == "csv":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if len(lines) != 2 or lines[0] != ",".join(METRIC_FIELDS):
            raise ValueError(f"{path}: unexpected CSV layout")
        cells = lines[1].split(",")
        kwargs = {
            name: (None if cell == "" else float(cell))
            for name, cell in zip(METRIC_FIELDS, cells)
        }
        return MetricsReport(**kwargs)
    raise ValueError(f"unknown metrics format {fmt!r}")
