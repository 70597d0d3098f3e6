"""Training-objective kernels as pure numerical functions.

Class-balanced binary cross-entropy, the hard-false-positive sampler,
and a 3-layer leaky-ReLU critic with Wasserstein/gradient-penalty
losses. All gradients are analytic and hand-derived; `footprints
losses-check` verifies them against central finite differences.

Randomness (sampling, interpolation) uses the Philox counter-based
64-bit generator so identical inputs + seed reproduce identical output
across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NonFiniteValue, ShapeMismatch

EPS_CLAMP = 1e-7
DEFAULT_LEAKY_SLOPE = 0.2
DEFAULT_LAMBDA_GP = 10.0


@dataclass(frozen=True)
class ClassWeights:
    c_pos: float
    c_neg: float

    def __post_init__(self):
        if not (math.isfinite(self.c_pos) and math.isfinite(self.c_neg)):
            raise NonFiniteValue("class weights must be finite")
        if self.c_pos < 0 or self.c_neg < 0:
            raise ValueError("class weights must be >= 0")


def clamp_scores(p: np.ndarray, eps: float = EPS_CLAMP) -> np.ndarray:
    """Clip predictions into [eps, 1 - eps] so logs stay finite."""
    arr = np.asarray(p, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NonFiniteValue("score map contains non-finite values")
    if (arr < 0).any() or (arr > 1).any():
        raise ValueError("scores must lie in [0, 1]")
    return np.clip(arr, eps, 1.0 - eps)


def class_weights(y: np.ndarray) -> ClassWeights:
    """Per-class weights from reciprocal label frequencies.

    c = n_total / (2 * n_class), so a balanced map yields (1, 1). When a
    class is absent it gets weight 0 and the present class weight 1.
    """
    arr = np.asarray(y)
    n_total = arr.size
    n_pos = int(np.count_nonzero(arr))
    n_neg = n_total - n_pos
    if n_pos == 0:
        return ClassWeights(0.0, 1.0)
    if n_neg == 0:
        return ClassWeights(1.0, 0.0)
    return ClassWeights(n_total / (2.0 * n_pos), n_total / (2.0 * n_neg))


def cbl_loss(
    p: np.ndarray, y: np.ndarray, w: ClassWeights
) -> tuple[float, np.ndarray]:
    """Class-balanced cross-entropy, mean-reduced over cells.

    loss = mean(-c_pos * y * log(p) - c_neg * (1 - y) * log(1 - p))
    Returns (loss, d loss / d p) with p clamped away from {0, 1}.
    """
    yb = np.asarray(y, dtype=np.float64)
    pc = clamp_scores(p)
    if pc.shape != yb.shape:
        raise ShapeMismatch(f"p {pc.shape} vs y {yb.shape}")
    n = pc.size
    per_cell = -w.c_pos * yb * np.log(pc) - w.c_neg * (1.0 - yb) * np.log1p(-pc)
    grad = (-w.c_pos * yb / pc + w.c_neg * (1.0 - yb) / (1.0 - pc)) / n
    return float(per_cell.mean()), grad


@dataclass(frozen=True)
class SamplerParams:
    """Top-K% pool truncation followed by a uniform draw of N cells."""

    top_percent: float = 1.0
    num_samples: int = 10
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.top_percent <= 100.0):
            raise ValueError("top_percent must be in (0, 100]")
        if self.num_samples < 1:
            raise ValueError("num_samples must be positive")


def sample_hard_false_positives(
    p: np.ndarray, y: np.ndarray, params: SamplerParams
) -> list[tuple[int, int]]:
    """Sample high-scoring cells whose ground-truth label is negative.

    Negative cells are ranked by descending score (ties broken by
    row-major order), truncated to the top ceil(K% * pool) and sampled
    uniformly without replacement. Deterministic for fixed inputs+seed.
    """
    pc = np.asarray(p, dtype=np.float64)
    yb = np.asarray(y)
    if pc.shape != yb.shape:
        raise ShapeMismatch(f"p {pc.shape} vs y {yb.shape}")
    if not np.isfinite(pc).all():
        raise NonFiniteValue("score map contains non-finite values")
    flat_p = pc.ravel()
    neg = np.flatnonzero(yb.ravel() == 0)
    if neg.size == 0:
        return []
    order = np.lexsort((neg, -flat_p[neg]))
    n_top = math.ceil(params.top_percent / 100.0 * neg.size)
    pool = neg[order[:n_top]]
    n_draw = min(params.num_samples, pool.size)
    rng = np.random.Generator(np.random.Philox(params.seed))
    chosen = rng.choice(pool.size, size=n_draw, replace=False)
    width = pc.shape[1]
    return [(int(i) // width, int(i) % width) for i in pool[chosen]]


# -- discriminator ----------------------------------------------------------


@dataclass(eq=False)
class Discriminator:
    """3 affine layers (in -> hidden -> hidden -> 1) with leaky-ReLU
    activations between them."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: float
    leaky_slope: float = DEFAULT_LEAKY_SLOPE

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        self.w3 = np.asarray(self.w3, dtype=np.float64)
        self.b3 = float(self.b3)
        h, d = self.w1.shape
        if (
            self.b1.shape != (h,)
            or self.w2.shape != (h, h)
            or self.b2.shape != (h,)
            or self.w3.shape != (h,)
        ):
            raise ShapeMismatch("inconsistent discriminator layer shapes")
        for arr in (self.w1, self.b1, self.w2, self.b2, self.w3):
            if not np.isfinite(arr).all():
                raise NonFiniteValue("discriminator parameters must be finite")
        if not math.isfinite(self.b3):
            raise NonFiniteValue("discriminator parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def random(
        cls, seed: int, in_dim: int = 256, hidden: int = 256,
        leaky_slope: float = DEFAULT_LEAKY_SLOPE,
    ) -> "Discriminator":
        """Gaussian init scaled by 1/sqrt(fan_in)."""
        rng = np.random.Generator(np.random.Philox(seed))
        return cls(
            w1=rng.normal(size=(hidden, in_dim)) / math.sqrt(in_dim),
            b1=rng.normal(size=hidden) * 0.1,
            w2=rng.normal(size=(hidden, hidden)) / math.sqrt(hidden),
            b2=rng.normal(size=hidden) * 0.1,
            w3=rng.normal(size=hidden) / math.sqrt(hidden),
            b3=float(rng.normal()) * 0.1,
            leaky_slope=leaky_slope,
        )


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0, z, slope * z)


def _leaky_grad(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0, 1.0, slope)


def _forward_batch(d: Discriminator, x: np.ndarray):
    """Returns (scores, z1, a1, z2, a2) for a (B, in_dim) batch."""
    z1 = x @ d.w1.T + d.b1
    a1 = _leaky(z1, d.leaky_slope)
    z2 = a1 @ d.w2.T + d.b2
    a2 = _leaky(z2, d.leaky_slope)
    scores = a2 @ d.w3 + d.b3
    return scores, z1, a1, z2, a2


def _grad_x_batch(d: Discriminator, x: np.ndarray) -> np.ndarray:
    """d score / d x for every row of a (B, in_dim) batch."""
    _, z1, _, z2, _ = _forward_batch(d, x)
    delta2 = d.w3[None, :] * _leaky_grad(z2, d.leaky_slope)
    delta1 = (delta2 @ d.w2) * _leaky_grad(z1, d.leaky_slope)
    return delta1 @ d.w1


def discriminator_eval(
    d: Discriminator, x: np.ndarray
) -> tuple[float, np.ndarray, dict[str, np.ndarray]]:
    """Score one feature vector, with exact analytic gradients.

    Returns (score, d score/d x, d score/d params) where grad_params is
    keyed by field name (w1, b1, w2, b2, w3, b3).
    """
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    if xv.shape != (d.in_dim,):
        raise ShapeMismatch(f"expected ({d.in_dim},) input, got {xv.shape}")
    if not np.isfinite(xv).all():
        raise NonFiniteValue("input vector must be finite")

    z1 = d.w1 @ xv + d.b1
    a1 = _leaky(z1, d.leaky_slope)
    z2 = d.w2 @ a1 + d.b2
    a2 = _leaky(z2, d.leaky_slope)
    score = float(d.w3 @ a2 + d.b3)

    delta2 = d.w3 * _leaky_grad(z2, d.leaky_slope)
    delta1 = (d.w2.T @ delta2) * _leaky_grad(z1, d.leaky_slope)
    grads = {
        "w3": a2.copy(),
        "b3": 1.0,
        "w2": np.outer(delta2, a1),
        "b2": delta2.copy(),
        "w1": np.outer(delta1, xv),
        "b1": delta1.copy(),
    }
    return score, d.w1.T @ delta1, grads


class WganGpLosses(NamedTuple):
    disc_loss: float
    gen_loss: float
    gp: float


def wgan_gp_losses(
    d: Discriminator,
    real: np.ndarray,
    fake: np.ndarray,
    lambda_gp: float = DEFAULT_LAMBDA_GP,
    seed: int = 0,
) -> WganGpLosses:
    """Wasserstein critic/generator losses with gradient penalty.

    disc_loss = mean D(fake) - mean D(real) + lambda_gp * gp
    gen_loss  = -mean D(fake)
    gp        = mean over pairs of (||grad_x D(a*real + (1-a)*fake)|| - 1)^2

    The interpolation coefficients a are drawn per pair from the seeded
    Philox generator; with lambda_gp = 0 no interpolation happens and
    the result is seed-independent. Batch reductions use numpy's
    fixed-order pairwise summation, so results are bit-stable.
    """
    r = np.asarray(real, dtype=np.float64)
    f = np.asarray(fake, dtype=np.float64)
    if r.ndim != 2 or f.ndim != 2 or r.shape[1] != f.shape[1]:
        raise ShapeMismatch(f"batches must be (B, width): {r.shape} vs {f.shape}")
    if r.shape[0] == 0 or f.shape[0] == 0:
        raise ShapeMismatch("batches must be non-empty")
    if r.shape[1] != d.in_dim:
        raise ShapeMismatch(f"batch width {r.shape[1]} != in_dim {d.in_dim}")
    if not (np.isfinite(r).all() and np.isfinite(f).all()):
        raise NonFiniteValue("batches must be finite")

    mean_real = float(np.mean(_forward_batch(d, r)[0]))
    mean_fake = float(np.mean(_forward_batch(d, f)[0]))

    gp = 0.0
    if lambda_gp != 0.0:
        if r.shape[0] != f.shape[0]:
            raise ShapeMismatch(
                "gradient penalty pairs real and fake rows; batch sizes must match"
            )
        rng = np.random.Generator(np.random.Philox(seed))
        alpha = rng.uniform(0.0, 1.0, size=r.shape[0])[:, None]
        interp = alpha * r + (1.0 - alpha) * f
        grad_norms = np.linalg.norm(_grad_x_batch(d, interp), axis=1)
        gp = float(np.mean((grad_norms - 1.0) ** 2))

    disc_loss = mean_fake - mean_real + lambda_gp * gp
    if not math.isfinite(disc_loss):
        raise NonFiniteValue("non-finite discriminator loss")
    return WganGpLosses(disc_loss=disc_loss, gen_loss=-mean_fake, gp=gp)
