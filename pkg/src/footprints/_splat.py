"""Truncated-Gaussian splat accumulation kernel.

The kernel is the throughput-critical inner loop of footprint and
direction propagation: for every splat center it adds an unnormalized
Gaussian (peak 1), cut off outside a Euclidean disk of `support` cells,
into C channel grids. Accumulation order is fixed by the input order,
so results are bit-stable regardless of caller-side parallelism.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def accumulate_gaussians(grids, centers, values, sigma, support):
    """grids: (C, H, W) float64, updated in place.

    centers: (K, 2) float64 splat centers as (gx, gy) in grid units.
    values:  (K, C) float64 per-splat channel weights.
    Cell (r, c) has center (c + 0.5, r + 0.5); a splat contributes
    values[k] * exp(-d^2 / (2 sigma^2)) to cells with d <= support.
    """
    n_ch, h, w = grids.shape
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    r2max = support * support
    cap = max(h, w)
    row_exp = np.empty(cap)
    row_d2 = np.empty(cap)
    col_exp = np.empty(cap)
    col_d2 = np.empty(cap)

    for k in range(centers.shape[0]):
        gx = centers[k, 0]
        gy = centers[k, 1]

        lo = gy - support - 0.5
        r0 = 0 if lo <= 0.0 else int(math.ceil(lo))
        hi = gy + support - 0.5
        r1 = h - 1 if hi >= h - 1 else int(math.floor(hi))
        lo = gx - support - 0.5
        c0 = 0 if lo <= 0.0 else int(math.ceil(lo))
        hi = gx + support - 0.5
        c1 = w - 1 if hi >= w - 1 else int(math.floor(hi))
        if r1 < r0 or c1 < c0:
            continue

        for i in range(r1 - r0 + 1):
            dy = (r0 + i) + 0.5 - gy
            row_d2[i] = dy * dy
            row_exp[i] = math.exp(-dy * dy * inv2s2)
        for j in range(c1 - c0 + 1):
            dx = (c0 + j) + 0.5 - gx
            col_d2[j] = dx * dx
            col_exp[j] = math.exp(-dx * dx * inv2s2)

        for i in range(r1 - r0 + 1):
            dy2 = row_d2[i]
            ey = row_exp[i]
            r = r0 + i
            for j in range(c1 - c0 + 1):
                if dy2 + col_d2[j] <= r2max:
                    g = ey * col_exp[j]
                    for ch in range(n_ch):
                        grids[ch, r, c0 + j] += values[k, ch] * g
