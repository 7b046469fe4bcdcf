"""Pure numpy implementations of the compiled kernels.

Same signatures and same bit-level generator as ``_kernels.pyx``. Floating
point results agree with the compiled core to a few ulps (libm vs numpy
transcendental functions, summation order).
"""

from __future__ import annotations

import numpy as np
from scipy.special import erfc

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def _philox_rounds(c0, c1, c2, c3, k0: int, k1: int):
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint64(k0), lo1, hi0 ^ c3 ^ np.uint64(k1), lo0
    return c0, c1, c2, c3


def philox4x32(counters, k0: int, k1: int) -> np.ndarray:
    counters = np.asarray(counters, dtype=np.uint32)
    out = _philox_rounds(*counters.T, int(k0), int(k1))
    return np.stack(out, axis=1).astype(np.uint32)


def philox_normals(seed: int, stream: int, path_start: int, n_paths: int, n_steps: int) -> np.ndarray:
    seed = int(seed)
    k0, k1 = seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF
    path = np.uint64(path_start) + np.arange(n_paths, dtype=np.uint64)
    step = np.arange(n_steps, dtype=np.uint64)
    c0 = np.broadcast_to(step[None, :], (n_paths, n_steps))
    c1 = np.broadcast_to((path & _MASK32)[:, None], (n_paths, n_steps))
    c2 = np.broadcast_to((path >> _SHIFT32)[:, None], (n_paths, n_steps))
    c3 = np.full((n_paths, n_steps), stream, dtype=np.uint64)
    x0, x1, x2, x3 = _philox_rounds(c0, c1, c2, c3, k0, k1)
    u1 = ((x0 >> np.uint64(5)).astype(np.float64) * 67108864.0 + (x1 >> np.uint64(6)) + 0.5) * 2.0**-53
    u2 = ((x2 >> np.uint64(5)).astype(np.float64) * 67108864.0 + (x3 >> np.uint64(6)) + 0.5) * 2.0**-53
    return np.ascontiguousarray(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))


def _ncdf(x):
    return 0.5 * erfc(-x * 0.7071067811865476)


def black_forward(fwd, strike: float, stdev, is_call: bool) -> np.ndarray:
    fwd = np.asarray(fwd, dtype=np.float64)
    s = np.broadcast_to(np.asarray(stdev, dtype=np.float64)[None, :], fwd.shape)
    intrinsic = np.maximum(fwd - strike, 0.0) if is_call else np.maximum(strike - fwd, 0.0)
    live = (s > 0.0) & (fwd > 0.0) & (strike > 0.0)
    if not live.any():
        return np.ascontiguousarray(intrinsic)
    safe_s = np.where(live, s, 1.0)
    safe_f = np.where(live, fwd, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(safe_f / strike) + 0.5 * safe_s * safe_s) / safe_s
    d2 = d1 - safe_s
    if is_call:
        price = safe_f * _ncdf(d1) - strike * _ncdf(d2)
    else:
        price = strike * _ncdf(-d2) - safe_f * _ncdf(-d1)
    return np.ascontiguousarray(np.where(live, price, intrinsic))


def split_weighted_sum(x, w_pos, w_neg) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return (np.maximum(x, 0.0) * w_pos + np.minimum(x, 0.0) * w_neg).sum(axis=1)
