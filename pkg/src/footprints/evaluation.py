"""Dense-prediction evaluation metrics.

Expansion ratios, average precision, and the semantic feet-location
histogram / KL-divergence protocol. All counts are in label-grid cells.

Binary maps are uint8/bool arrays of {0, 1}; score maps are float arrays
in [0, 1]; class histograms are 1-D probability vectors. Seeded sampling
uses the Philox counter-based generator (see docs/format.md).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence as SequenceT

import numpy as np

from .errors import (
    EmptyGroundTruth,
    EmptyLocations,
    NonFiniteValue,
    ShapeMismatch,
)

DEFAULT_KL_EPSILON = 1e-6
DEFAULT_MODE_WINDOW = 5


@dataclass
class MetricsReport:
    """Expansion-ratio quadruple plus optional mAP and KL scalars.

    All four ratios are normalized by the ground-truth positive count.
    For reports produced by `expansion_metrics` the identities

        pred_valid_tp + missing_fn == 1.0
        pred_total == pred_valid_tp + expansion

    hold exactly (they are enforced by construction there). Reports
    deserialized from files may carry independently rounded values, so
    the identities are not re-checked here.
    """

    pred_total: float
    pred_valid_tp: float
    missing_fn: float
    expansion: float
    map: Optional[float] = None
    kl: Optional[float] = None

    def __post_init__(self):
        for name in ("pred_total", "pred_valid_tp", "missing_fn", "expansion"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise NonFiniteValue(f"{name} must be finite")
        for name in ("map", "kl"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise NonFiniteValue(f"{name} must be finite when set")


def _as_binary(grid: np.ndarray, name: str) -> np.ndarray:
    g = np.asarray(grid)
    if g.dtype != bool:
        vals = np.unique(g)
        if not np.isin(vals, (0, 1)).all():
            raise ValueError(f"{name} must contain only 0/1 values")
        g = g.astype(bool)
    return g


def expansion_metrics(pred: np.ndarray, gt: np.ndarray) -> MetricsReport:
    """Ratios of predicted-positive cells relative to ground truth.

    pred_total = |pred| / G, tp = |pred & gt| / G, fn = |gt & ~pred| / G,
    expansion = |pred & ~gt| / G, where G is the ground-truth positive
    count. fn and pred_total are derived from the other two so the
    report identities hold exactly in floating point.
    """
    p = _as_binary(pred, "pred")
    g = _as_binary(gt, "gt")
    if p.shape != g.shape:
        raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
    n_gt = int(g.sum())
    if n_gt == 0:
        raise EmptyGroundTruth("ground truth has no positive cell")
    tp = int((p & g).sum()) / n_gt
    expansion = int((p & ~g).sum()) / n_gt
    return MetricsReport(
        pred_total=tp + expansion,
        pred_valid_tp=tp,
        missing_fn=1.0 - tp,
        expansion=expansion,
    )


def average_precision(scores: np.ndarray, gt: np.ndarray) -> float:
    """All-points average precision over cells.

    Cells are ranked by descending score with row-major tie-breaking;
    AP is the mean of precision values at each positive cell's rank
    (equivalently the area under the all-points PR curve).
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    g = _as_binary(gt, "gt").ravel()
    if s.shape != g.shape:
        raise ShapeMismatch(f"scores {scores.shape} vs gt {gt.shape}")
    if not np.isfinite(s).all():
        raise NonFiniteValue("scores must be finite")
    n_pos = int(g.sum())
    if n_pos == 0:
        raise EmptyGroundTruth("ground truth has no positive cell")
    # lexsort: last key is primary. Negated scores -> descending, index
    # ascending within ties.
    order = np.lexsort((np.arange(s.size), -s))
    hits = g[order]
    cum_tp = np.cumsum(hits)
    ranks = np.arange(1, s.size + 1)
    precision_at_hits = cum_tp[hits] / ranks[hits]
    return float(precision_at_hits.sum() / n_pos)


def mean_ap(pairs: SequenceT[tuple[np.ndarray, np.ndarray]]) -> float:
    """Unweighted mean of per-image average precision."""
    if len(pairs) == 0:
        raise EmptyGroundTruth("no (scores, gt) pairs given")
    return float(np.mean([average_precision(s, g) for s, g in pairs]))


def semantic_histogram(
    locations: np.ndarray,
    sem: np.ndarray,
    window: int = DEFAULT_MODE_WINDOW,
    n_classes: Optional[int] = None,
) -> np.ndarray:
    """Histogram of modal semantic classes around feet locations.

    For each (u, v) location the modal class id in the window x window
    pixel neighborhood (clipped at image borders, ties resolved to the
    smallest id) is counted; counts are normalized to probabilities.
    """
    locs = np.asarray(locations, dtype=np.float64).reshape(-1, 2)
    if locs.shape[0] == 0:
        raise EmptyLocations("no locations to histogram")
    sem = np.asarray(sem)
    if sem.ndim != 2:
        raise ShapeMismatch("semantic map must be 2-D")
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    h, w = sem.shape
    if n_classes is None:
        n_classes = int(sem.max()) + 1
    half = window // 2
    counts = np.zeros(n_classes, dtype=np.int64)
    for u, v in locs:
        col = int(math.floor(u))
        row = int(math.floor(v))
        if not (0 <= col < w and 0 <= row < h):
            raise ValueError(f"location ({u}, {v}) outside the image")
        patch = sem[
            max(0, row - half) : min(h, row + half + 1),
            max(0, col - half) : min(w, col + half + 1),
        ]
        mode = int(np.bincount(patch.ravel(), minlength=n_classes).argmax())
        counts[mode] += 1
    return counts / counts.sum()


def kl_divergence(
    p: np.ndarray, q: np.ndarray, epsilon: float = DEFAULT_KL_EPSILON
) -> float:
    """KL(p || q) in nats after additive-epsilon smoothing.

    Both histograms are smoothed by epsilon and renormalized; with
    epsilon = 0, zero-probability p entries contribute 0 by convention.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ShapeMismatch(f"histograms must be 1-D and equal length, got {p.shape} vs {q.shape}")
    for name, h in (("p", p), ("q", q)):
        if not np.isfinite(h).all() or (h < 0).any():
            raise ValueError(f"{name} must be a non-negative finite histogram")
        if abs(h.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} must sum to 1, got {h.sum()!r}")
    ps = (p + epsilon) / (p + epsilon).sum()
    qs = (q + epsilon) / (q + epsilon).sum()
    nz = ps > 0
    with np.errstate(divide="ignore"):
        terms = ps[nz] * np.log(ps[nz] / qs[nz])
    return float(terms.sum())


def sample_locations(
    scores: np.ndarray,
    n: int,
    seed: int,
    downsample: int = 1,
) -> np.ndarray:
    """Draw n pixel locations with probability proportional to score.

    Sampling is with replacement from grid cells (uniform when the map
    is all zero); returned coordinates are full-resolution cell centers,
    i.e. ((col + 0.5) * downsample, (row + 0.5) * downsample). Output is
    an (n, 2) array of (u, v), deterministic per seed.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2:
        raise ShapeMismatch("score map must be 2-D")
    if not np.isfinite(s).all() or (s < 0).any():
        raise NonFiniteValue("scores must be finite and non-negative")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.zeros((0, 2))
    flat = s.ravel()
    total = flat.sum()
    probs = np.full(flat.size, 1.0 / flat.size) if total == 0 else flat / total
    rng = np.random.Generator(np.random.Philox(seed))
    idx = rng.choice(flat.size, size=n, replace=True, p=probs)
    rows, cols = np.unravel_index(idx, s.shape)
    return np.stack(
        [(cols + 0.5) * downsample, (rows + 0.5) * downsample], axis=1
    )
