"""Pure numpy versions of the compiled kernels (same signatures, same results)."""
import numpy as np
from scipy.special import expit


def smooth_cutoff(xi, r1, r2):
    t = (r2 - np.abs(np.asarray(xi, dtype=np.float64))) / (r2 - r1)
    out = np.zeros_like(t)
    out[t >= 1.0] = 1.0
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    z = (1.0 - 2.0 * ti) / (ti * (1.0 - ti))
    out[inside] = expit(-z)
    return out


def gauss_interp(grid_vals, theta, tau, msp, chunk=1 << 16):
    grid_vals = np.asarray(grid_vals, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    m = grid_vals.shape[0]
    h = 2.0 * np.pi / m
    offsets = np.arange(-msp + 1, msp + 1)
    out = np.empty(theta.shape[0])
    for start in range(0, theta.shape[0], chunk):
        th = theta[start:start + chunk]
        r = np.floor(th / h).astype(np.int64)[:, None] + offsets
        d = th[:, None] - r * h
        w = np.exp(-d * d / (4.0 * tau))
        out[start:start + chunk] = (grid_vals[r % m] * w).sum(axis=1)
    return np.sqrt(np.pi / tau) * out
