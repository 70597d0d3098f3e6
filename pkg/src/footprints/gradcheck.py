"""Finite-difference verification of the analytic gradients in `losses`.

Central differences with a fixed step in double precision. Errors are
reported as |analytic - numeric| / max(1e-3, |analytic|, |numeric|): a
relative error with a small absolute floor so near-zero coordinates do
not produce spurious blowups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses

FD_STEP = 1e-6
TOLERANCE = 1e-4
# Parameter tensors are spot-checked at this many random coordinates
# per trial; exhaustive FD over every weight would dominate runtime
# without sharpening the check.
COORDS_PER_TENSOR = 8


def central_difference(func, x: np.ndarray, index: tuple, step: float = FD_STEP) -> float:
    """(f(x + step e_i) - f(x - step e_i)) / (2 step) at one coordinate."""
    hi = x.copy()
    lo = x.copy()
    hi[index] += step
    lo[index] -= step
    return (func(hi) - func(lo)) / (2.0 * step)


def _error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-3, abs(analytic), abs(numeric))


def _score_fn(d: losses.Discriminator):
    """Forward-only critic score of a single vector (fast FD probe)."""
    return lambda q: float(losses._forward_batch(d, q[None, :])[0][0])


def _with_param(d: losses.Discriminator, name: str, value) -> losses.Discriminator:
    kwargs = {f: getattr(d, f) for f in ("w1", "b1", "w2", "b2", "w3", "b3")}
    kwargs[name] = value
    return losses.Discriminator(leaky_slope=d.leaky_slope, **kwargs)


@dataclass
class CheckResult:
    name: str
    trials: int
    max_error: float

    @property
    def passed(self) -> bool:
        return self.max_error < TOLERANCE


def check_cbl_gradient(trials: int = 100, seed: int = 0, shape=(8, 8)) -> CheckResult:
    """Full FD sweep of d loss / d p on random interior score maps."""
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    for _ in range(trials):
        p = rng.uniform(0.05, 0.95, size=shape)
        y = (rng.uniform(size=shape) < 0.4).astype(np.uint8)
        w = losses.class_weights(y)
        _, grad = losses.cbl_loss(p, y, w)
        for idx in np.ndindex(shape):
            num = central_difference(lambda q: losses.cbl_loss(q, y, w)[0], p, idx)
            worst = max(worst, _error(grad[idx], num))
    return CheckResult("cbl_loss/grad_p", trials, worst)


def check_discriminator_gradients(
    trials: int = 100, seed: int = 0, in_dim: int = 256, hidden: int = 32
) -> CheckResult:
    """FD check of grad_x (sampled coordinates) and grad_params."""
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    for t in range(trials):
        d = losses.Discriminator.random(seed=seed * 7919 + t, in_dim=in_dim, hidden=hidden)
        score = _score_fn(d)
        x = rng.normal(size=in_dim)
        _, grad_x, grad_params = losses.discriminator_eval(d, x)

        for i in rng.choice(in_dim, size=min(in_dim, 32), replace=False):
            num = central_difference(score, x, (int(i),))
            worst = max(worst, _error(grad_x[i], num))

        for name in ("w1", "b1", "w2", "b2", "w3"):
            tensor = getattr(d, name)
            flat_coords = rng.choice(
                tensor.size, size=min(tensor.size, COORDS_PER_TENSOR), replace=False
            )
            for flat in flat_coords:
                idx = np.unravel_index(int(flat), tensor.shape)
                hi = tensor.copy()
                lo = tensor.copy()
                hi[idx] += FD_STEP
                lo[idx] -= FD_STEP
                num = (
                    _score_fn(_with_param(d, name, hi))(x)
                    - _score_fn(_with_param(d, name, lo))(x)
                ) / (2 * FD_STEP)
                worst = max(worst, _error(grad_params[name][idx], num))

        num_b3 = (
            _score_fn(_with_param(d, "b3", d.b3 + FD_STEP))(x)
            - _score_fn(_with_param(d, "b3", d.b3 - FD_STEP))(x)
        ) / (2 * FD_STEP)
        worst = max(worst, _error(grad_params["b3"], num_b3))
    return CheckResult("discriminator_eval/grads", trials, worst)


def check_gradient_penalty(
    trials: int = 100, seed: int = 0, in_dim: int = 256, hidden: int = 32, batch: int = 4
) -> CheckResult:
    """FD check of the critic gradient inside the penalty term, plus the
    penalty value recomputed from full FD gradients."""
    rng = np.random.Generator(np.random.Philox(seed))
    worst = 0.0
    for t in range(trials):
        d = losses.Discriminator.random(seed=seed * 104729 + t, in_dim=in_dim, hidden=hidden)
        score = _score_fn(d)
        real = rng.normal(size=(batch, in_dim))
        fake = rng.normal(size=(batch, in_dim))
        gp_seed = int(rng.integers(2**31))
        _, _, gp = losses.wgan_gp_losses(d, real, fake, lambda_gp=1.0, seed=gp_seed)

        # Rebuild the interpolates from the same seeded stream.
        alpha = np.random.Generator(np.random.Philox(gp_seed)).uniform(
            0.0, 1.0, size=batch
        )[:, None]
        interp = alpha * real + (1.0 - alpha) * fake
        analytic = losses._grad_x_batch(d, interp)

        fd_norms = np.empty(batch)
        for b in range(batch):
            xb = interp[b]
            fd_full = np.array(
                [central_difference(score, xb, (i,)) for i in range(in_dim)]
            )
            fd_norms[b] = np.linalg.norm(fd_full)
            for i in rng.choice(in_dim, size=min(in_dim, 16), replace=False):
                worst = max(worst, _error(analytic[b, i], fd_full[i]))
        gp_fd = float(np.mean((fd_norms - 1.0) ** 2))
        worst = max(worst, _error(gp, gp_fd))
    return CheckResult("wgan_gp/grad_interp", trials, worst)


def run_all_checks(trials: int = 100, seed: int = 0) -> list[CheckResult]:
    return [
        check_cbl_gradient(trials=trials, seed=seed),
        check_discriminator_gradients(trials=trials, seed=seed + 1),
        check_gradient_penalty(trials=trials, seed=seed + 2),
    ]
