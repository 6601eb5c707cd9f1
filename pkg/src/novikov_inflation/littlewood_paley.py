"""Smooth dyadic partition of frequency space and Besov-type norms.

The low-frequency cutoff ``chi`` equals 1 on ``|xi| <= r1`` and vanishes for
``|xi| >= r2``; the annular profile is ``phi(xi) = chi(xi/2) - chi(xi)``.
Block ``j = -1`` is ``chi(D) f`` and block ``j >= 0`` is ``phi(2^-j D) f``.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .spectral import EPS_SUPP, BandError, Field, Grid, derivative, irfft, leakage, lp_norm, product


@dataclass(frozen=True)
class CutoffProfile:
    """Radial C-infinity step: 1 on ``|xi| <= inner``, 0 on ``|xi| >= outer``."""

    inner: float
    outer: float

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValueError("need 0 < inner < outer")

    def __call__(self, xi):
        return kernels.smooth_cutoff(xi, self.inner, self.outer)

    def integral(self):
        """Exact integral over the real line (the transition is antisymmetric)."""
        return self.inner + self.outer


LP_CUTOFF = CutoffProfile(3.0 / 4.0, 4.0 / 3.0)
DATA_CUTOFF = CutoffProfile(1.0 / 4.0, 1.0 / 2.0)


def build_cutoff(kind):
    if kind == "lp":
        return LP_CUTOFF
    if kind == "data":
        return DATA_CUTOFF
    raise ValueError(f"unknown cutoff kind {kind!r}")


def phi(xi, chi=LP_CUTOFF):
    xi = np.asarray(xi, dtype=np.float64)
    return chi(xi / 2.0) - chi(xi)


def annulus(j, chi=LP_CUTOFF):
    """Closed frequency interval carrying block j."""
    if j == -1:
        return 0.0, chi.outer
    return chi.inner * 2.0**j, 2.0 * chi.outer * 2.0**j


def j_max(grid, chi=LP_CUTOFF):
    """Largest j whose annulus lies strictly below the grid's Nyquist wavenumber."""
    j = -1
    while annulus(j + 1, chi)[1] < grid.nyquist:
        j += 1
    return j


def resolved_wavenumber(grid, chi=LP_CUTOFF):
    """Blocks -1..j_max sum to the identity exactly below this wavenumber."""
    return chi.inner * 2.0 ** (j_max(grid, chi) + 1)


def block_window(grid, j, chi=LP_CUTOFF):
    """(slice of rfft indices, multiplier values on that slice) for block j."""
    if j < -1:
        raise ValueError("blocks j <= -2 vanish identically")
    jm = j_max(grid, chi)
    if j > jm:
        raise ValueError(f"block j={j} exceeds j_max={jm} for this grid")
    lo, hi = annulus(j, chi)
    sl = grid.window(lo, hi)
    k = grid.wavenumbers[sl]
    mult = chi(k) if j == -1 else phi(k * 2.0**-j, chi)
    return sl, mult


def _block_spectrum(f, j, chi):
    sl, mult = block_window(f.grid, j, chi)
    X = f.spectrum[sl]
    if not np.any(X):
        return None
    Y = np.zeros(f.grid.n_modes, dtype=np.complex128)
    Y[sl] = X * mult
    return Y


def dyadic_block(f, j, chi=LP_CUTOFF):
    """Delta_j f, band-declared on the block annulus."""
    Y = _block_spectrum(f, j, chi)
    band = annulus(j, chi)
    if Y is None:
        return Field(f.grid, np.zeros(f.grid.count), band=band, check=False)
    return Field(f.grid, spectrum=Y, band=band, check=False)


def compact_block(f, j, chi=LP_CUTOFF, oversample=8):
    """Delta_j f on a small power-of-two grid (same length) holding its window.

    The band-limited block is the same trigonometric polynomial on both grids,
    so this is a cheap carrier for off-grid evaluation.  ``oversample`` extra
    nodes per Nyquist interval keep node maxima next to the true peaks.
    """
    sl, mult = block_window(f.grid, j, chi)
    n = 2
    while n // 2 <= oversample * sl.stop:
        n *= 2
    n = min(n, f.grid.count)
    small = Grid(f.grid.length, n)
    Y = np.zeros(small.n_modes, dtype=np.complex128)
    Y[sl] = f.spectrum[sl] * mult * (n / f.grid.count)
    return Field(small, spectrum=Y, check=False)


def block_sup(f, j, chi=LP_CUTOFF):
    """Sup of |Delta_j f| over the line (not just the nodes), via off-grid refinement."""
    from .interp import sup_norm

    return sup_norm(compact_block(f, j, chi))


@dataclass
class DyadicBlockSet:
    source: Field
    blocks: dict = dc_field(default_factory=dict)

    def reconstruct(self):
        total = np.zeros(self.source.grid.count)
        for b in self.blocks.values():
            total += b.samples
        return Field(self.source.grid, total)


def dyadic_blocks(f, chi=LP_CUTOFF):
    return DyadicBlockSet(f, {j: dyadic_block(f, j, chi) for j in range(-1, j_max(f.grid, chi) + 1)})


def block_norm(f, j, p=np.inf, chi=LP_CUTOFF):
    """||Delta_j f||_{L^p}; blocks with identically zero spectrum cost nothing."""
    Y = _block_spectrum(f, j, chi)
    if Y is None:
        return 0.0
    s = irfft(Y, f.grid.count)
    if p == np.inf:
        return float(np.max(np.abs(s)))
    return lp_norm(Field(f.grid, s, check=False), p)


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float
    r: float

    def __post_init__(self):
        for name in ("p", "r"):
            v = getattr(self, name)
            if not (v == np.inf or v in (1, 2)):
                raise ValueError(f"{name} must be 1, 2 or inf, got {v}")


def _lr_combine(values, r):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 0.0
    if r == np.inf:
        return float(values.max())
    return float(np.sum(values**r) ** (1.0 / r))


def besov_norm(f, params, chi=LP_CUTOFF):
    """|| (2^{js} ||Delta_j f||_{L^p})_j ||_{l^r} over j = -1 .. j_max."""
    terms = [
        2.0 ** (j * params.s) * block_norm(f, j, params.p, chi)
        for j in range(-1, j_max(f.grid, chi) + 1)
    ]
    return _lr_combine(terms, params.r)


def restricted_norm(f, k, idx, chi=LP_CUTOFF):
    """sum_{j in idx} 2^{kj} ||Delta_j f||_{L^inf}."""
    if k not in (0, 1):
        raise ValueError("restricted norm uses k in {0, 1}")
    jm = j_max(f.grid, chi)
    bad = [j for j in idx if j < 0 or j > jm]
    if bad:
        raise ValueError(f"indices {bad} outside [0, {jm}]")
    return float(sum(2.0 ** (k * j) * block_norm(f, j, np.inf, chi) for j in idx))


def lipschitz_norm(f):
    """||f||_inf + ||f'||_inf over the nodes."""
    return lp_norm(f, np.inf) + lp_norm(derivative(f), np.inf)


def partition_of_unity_deviation(grid, chi=LP_CUTOFF):
    """max_k |chi(k) + sum_{j=0}^{j_max} phi(2^-j k) - 1| over k below the resolved wavenumber."""
    k = grid.wavenumbers
    k = k[k <= resolved_wavenumber(grid, chi)]
    total = chi(k)
    for j in range(0, j_max(grid, chi) + 1):
        total = total + phi(k * 2.0**-j, chi)
    return float(np.max(np.abs(total - 1.0)))


# ------------------------------------------------------------------ Bernstein


@dataclass
class BernsteinReport:
    shape: str
    lam: float
    k: int
    p: float
    q: float
    upper_ratio: float
    lower_ratio: float | None
    upper_constant: float
    lower_constant: float | None

    def violates(self, C):
        """True when the measured ratios break the C^{k+1} bounds."""
        if self.upper_ratio > C ** (self.k + 1) * (1 + 1e-12):
            return True
        if self.lower_ratio is not None and self.lower_ratio < C ** (-self.k - 1) * (1 - 1e-12):
            return True
        return False


def _band_of(shape, lam):
    if shape == "ball":
        return 0.0, 4.0 / 3.0 * lam
    if shape == "annulus":
        return 3.0 / 4.0 * lam, 8.0 / 3.0 * lam
    raise ValueError(f"unknown shape {shape!r}")


def bernstein_check(f, shape, lam, k, p=np.inf, q=np.inf):
    """Measured Bernstein ratios for a field band-limited to ``lam * shape``."""
    lo, hi = _band_of(shape, lam)
    leak = leakage(f, lo, hi)
    if leak > EPS_SUPP:
        raise BandError(f"field has {leak:.3e} relative mass outside {shape} of radius {lam}")
    if q < p:
        raise ValueError("need p <= q")
    dk = f
    for _ in range(k):
        dk = derivative(dk)
    inv = lambda e: 0.0 if e == np.inf else 1.0 / e
    base_p = lp_norm(f, p)
    if base_p == 0.0:
        raise ValueError("zero field")
    upper = lp_norm(dk, q) / (lam ** (k + inv(p) - inv(q)) * base_p)
    lower = None
    if shape == "annulus":
        lower = lp_norm(dk, p) / (lam**k * base_p)
    up_c = upper ** (1.0 / (k + 1)) if upper > 0 else 0.0
    low_c = None
    if lower is not None:
        low_c = (1.0 / lower) ** (1.0 / (k + 1)) if lower > 0 else np.inf
    return BernsteinReport(shape, lam, k, p, q, upper, lower, up_c, low_c)


# ----------------------------------------------------------------- commutator


def commutator(v, f, j, chi=LP_CUTOFF):
    """v * Delta_j(f') - Delta_j(v * f'), products dealiased."""
    df = derivative(f)
    left = product(v, dyadic_block(df, j, chi))
    right = dyadic_block(product(v, df), j, chi)
    return Field(v.grid, left.samples - right.samples)


def commutator_sum(v, f, chi=LP_CUTOFF):
    """sum_j 2^j ||[Delta_j, v d/dx] f||_inf over j = -1 .. j_max."""
    df = derivative(f)
    vdf = product(v, df)
    total = 0.0
    for j in range(-1, j_max(v.grid, chi) + 1):
        left = product(v, dyadic_block(df, j, chi))
        right = dyadic_block(vdf, j, chi)
        total += 2.0**j * float(np.max(np.abs(left.samples - right.samples)))
    return total


def commutator_bound(v, f, chi=LP_CUTOFF):
    """||v'||_inf ||f||_{B^1_{inf,1}} + ||f'||_inf ||v'||_{B^0_{inf,1}}."""
    dv = derivative(v)
    return lp_norm(dv, np.inf) * besov_norm(f, BesovParams(1, np.inf, 1), chi) + lp_norm(
        derivative(f), np.inf
    ) * besov_norm(dv, BesovParams(0, np.inf, 1), chi)
