"""Periodic spectral representation of functions on a truncated real line.

A :class:`Grid` samples ``[-L/2, L/2)`` at ``N`` equispaced nodes; a
:class:`Field` holds real samples on a grid together with a lazily computed
real-to-complex spectrum.  The spectrum convention is the unnormalized
``rfft`` of the samples,

.. math::

    X_q = \\sum_{m=0}^{N-1} f(x_m) e^{-2\\pi i q m / N},\\qquad
    x_m = -L/2 + m\\,\\Delta x,

so that the Fourier-series coefficient of wavenumber ``k_q = 2 pi q / L`` is
``c_q = (-1)^q X_q / N``.  Fourier multipliers act on ``X_q`` directly.
"""
from __future__ import annotations

import struct
import threading
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

#: relative l2 spectral mass allowed outside a declared band
EPS_SUPP = 1e-8

_WORKERS = 1


class BandError(ValueError):
    """A field carries spectral mass where it is declared (or required) not to."""


def set_threads(n):
    """Number of worker threads used by every FFT in the package."""
    global _WORKERS
    _WORKERS = max(1, int(n))


def rfft(x):
    return sfft.rfft(x, workers=_WORKERS)


def irfft(X, n):
    return sfft.irfft(X, n=n, workers=_WORKERS)


@dataclass(frozen=True)
class Grid:
    """Periodic lattice standing in for the real line."""

    length: float
    count: int

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"grid length must be positive, got {self.length}")
        n = int(self.count)
        if n < 2 or n & (n - 1):
            raise ValueError(f"point count must be a power of two, got {self.count}")
        object.__setattr__(self, "count", n)
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self):
        return self.length / self.count

    @property
    def nyquist(self):
        """Largest resolved wavenumber, pi / dx."""
        return np.pi / self.dx

    @property
    def dk(self):
        return 2.0 * np.pi / self.length

    @property
    def n_modes(self):
        return self.count // 2 + 1

    @cached_property
    def nodes(self):
        x = -0.5 * self.length + self.dx * np.arange(self.count)
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self):
        """Nonnegative wavenumbers k_q, q = 0 .. N/2, matching the rfft layout."""
        k = self.dk * np.arange(self.n_modes)
        k.flags.writeable = False
        return k

    def window(self, lo, hi):
        """Slice of rfft indices with lo <= k_q <= hi (clipped to the lattice)."""
        q0 = max(0, int(np.ceil(lo / self.dk - 1e-9)))
        q1 = min(self.n_modes - 1, int(np.floor(hi / self.dk + 1e-9)))
        return slice(q0, max(q0, q1 + 1))

    def sign(self, sl=slice(None)):
        """(-1)^q on the rfft indices in ``sl``; converts between X_q and c_q."""
        q = np.arange(self.n_modes)[sl]
        return 1.0 - 2.0 * (q & 1)

    def mode_weights(self, sl=slice(None)):
        """Two-sided multiplicity of each rfft coefficient in l2 sums."""
        q = np.arange(self.n_modes)[sl]
        w = np.full(q.shape, 2.0)
        w[(q == 0) | (q == self.count // 2)] = 1.0
        return w


class Field:
    """Real function sampled on a :class:`Grid`, spectrum computed on demand."""

    def __init__(self, grid, samples=None, *, spectrum=None, band=None, check=True):
        self.grid = grid
        self._lock = threading.Lock()
        self._spectrum = None
        if samples is None:
            if spectrum is None:
                raise ValueError("need samples or spectrum")
            spectrum = np.asarray(spectrum, dtype=np.complex128)
            if spectrum.shape != (grid.n_modes,):
                raise ValueError(f"spectrum has shape {spectrum.shape}, expected ({grid.n_modes},)")
            samples = irfft(spectrum, grid.count)
            self._spectrum = spectrum
        else:
            samples = np.asarray(samples, dtype=np.float64)
            if samples.shape != (grid.count,):
                raise ValueError(f"samples have shape {samples.shape}, expected ({grid.count},)")
        if check and not np.all(np.isfinite(samples)):
            raise ValueError("field samples contain NaN or inf")
        samples.flags.writeable = False
        self.samples = samples
        self.band = None if band is None else (float(band[0]), float(band[1]))
        if check and self.band is not None:
            leak = leakage(self, *self.band)
            if leak > EPS_SUPP:
                raise BandError(
                    f"relative spectral mass {leak:.3e} outside declared band {self.band}"
                )

    @property
    def spectrum(self):
        if self._spectrum is None:
            with self._lock:
                if self._spectrum is None:
                    spec = rfft(self.samples)
                    spec.flags.writeable = False
                    self._spectrum = spec
        return self._spectrum

    def drop_spectrum(self):
        """Release the cached spectrum (large grids)."""
        with self._lock:
            self._spectrum = None

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.count, float(value)), band=(0.0, 0.0) if value else None)

    @classmethod
    def from_function(cls, grid, fn, band=None):
        return cls(grid, fn(grid.nodes), band=band)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.count))

    def with_band(self, band):
        out = Field(self.grid, self.samples, band=None)
        out._spectrum = self._spectrum
        out.band = (float(band[0]), float(band[1]))
        return out

    def _coerce(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.samples
        return float(other)

    def __add__(self, other):
        return Field(self.grid, self.samples + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.samples - self._coerce(other))

    def __rsub__(self, other):
        return Field(self.grid, self._coerce(other) - self.samples)

    def __mul__(self, other):
        if isinstance(other, Field):
            return NotImplemented
        return Field(self.grid, self.samples * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.samples / float(other))

    def __neg__(self):
        return Field(self.grid, -self.samples)

    def __repr__(self):
        return f"Field(L={self.grid.length}, N={self.grid.count}, band={self.band})"


def spectral_mass(f, sl=slice(None)):
    X = f.spectrum[sl]
    return float(np.sum(f.grid.mode_weights(sl) * (X.real**2 + X.imag**2)))


def leakage(f, lo, hi):
    """Relative l2 spectral mass of ``f`` outside ``lo <= |k| <= hi``."""
    total = spectral_mass(f)
    if total == 0.0:
        return 0.0
    sl = f.grid.window(lo, hi)
    outside = spectral_mass(f, slice(0, sl.start)) + spectral_mass(f, slice(sl.stop, None))
    return outside / total


def nyquist_fraction(f):
    total = spectral_mass(f)
    if total == 0.0:
        return 0.0
    q = f.grid.count // 2
    return spectral_mass(f, slice(q, q + 1)) / total


def apply_multiplier(f, mult, band=None):
    """Field whose spectrum is ``mult * spectrum(f)``; ``mult`` is an array over k_q."""
    return Field(f.grid, spectrum=f.spectrum * mult, band=band, check=False)


def _check_nyquist(f):
    frac = nyquist_fraction(f)
    if frac > EPS_SUPP:
        raise BandError(f"Nyquist-mode mass fraction {frac:.3e} exceeds {EPS_SUPP}: field unresolved")


def derivative(f, order=1):
    """Spectral derivative; the Nyquist coefficient is zeroed."""
    _check_nyquist(f)
    k = f.grid.wavenumbers
    mult = (1j * k) ** order
    mult[-1] = 0.0
    return apply_multiplier(f, mult, band=f.band)


def helmholtz_inverse(f):
    """(1 - d^2/dx^2)^{-1} f, multiplier 1 / (1 + k^2)."""
    k = f.grid.wavenumbers
    return apply_multiplier(f, 1.0 / (1.0 + k * k), band=f.band)


def grad_helmholtz_inverse(f):
    """d/dx (1 - d^2/dx^2)^{-1} f, multiplier i k / (1 + k^2)."""
    _check_nyquist(f)
    k = f.grid.wavenumbers
    mult = 1j * k / (1.0 + k * k)
    mult[-1] = 0.0
    return apply_multiplier(f, mult, band=f.band)


def lp_norm(f, p):
    """Riemann-sum L^p norm for p in {1, 2, inf}; p = inf is the max over nodes."""
    s = f.samples if isinstance(f, Field) else np.asarray(f)
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(s))) if s.size else 0.0
    dx = f.grid.dx
    if p == 1:
        return float(dx * np.sum(np.abs(s)))
    if p == 2:
        return float(np.sqrt(dx * np.dot(s, s)))
    raise ValueError(f"unsupported exponent p={p}")


def pad_factor(n_factors):
    """Smallest power of two P with P >= (n_factors + 1) / 2."""
    need = (n_factors + 1) / 2.0
    p = 1
    while p < need:
        p *= 2
    return p


def _padded_samples(X, n, m):
    Y = np.zeros(m // 2 + 1, dtype=np.complex128)
    Y[: n // 2] = X[: n // 2]
    return irfft(Y, m) * (m / n)


def product(*fields, pad=None):
    """Alias-free pointwise product of fields, truncated back to the base grid.

    Factors are zero-padded to ``pad * N`` points with ``pad >= (p + 1) / 2``
    for ``p`` factors, so every retained mode equals the exact convolution.
    ``pad=1`` multiplies the node samples directly; aliases are then folded
    back about the Nyquist wavenumber, which is harmless only when the caller
    inspects modes well below ``2 K_nyq - (bandwidth of the product)``.
    """
    if not fields:
        raise ValueError("need at least one factor")
    grid = fields[0].grid
    for g in fields[1:]:
        if g.grid != grid:
            raise ValueError("fields live on different grids")
    n = grid.count
    if pad == 1:
        acc = fields[0].samples.copy()
        for g in fields[1:]:
            acc *= g.samples
        Z = rfft(acc)
        del acc
        Z[-1] = 0.0
        return Field(grid, spectrum=Z, check=False)
    m = n * (pad or pad_factor(len(fields)))
    acc = None
    for g in fields:
        s = _padded_samples(g.spectrum, n, m)
        acc = s if acc is None else acc * s
    Z = rfft(acc)[: n // 2 + 1] * (n / m)
    Z[-1] = 0.0
    return Field(grid, spectrum=Z, check=False)


def alias_safe_pad(grid, band_top, degree, k_needed):
    """1 if a raw ``degree``-fold product cannot alias onto ``|k| <= k_needed``.

    A product of factors band-limited to ``band_top`` has bandwidth
    ``degree * band_top``; folded modes land at ``2 K_nyq - k`` and above.
    Otherwise the dealiasing pad factor is returned.
    """
    if degree * band_top < grid.nyquist or 2.0 * grid.nyquist - degree * band_top > k_needed:
        return 1
    return pad_factor(degree)


def power_product(spec):
    """Dealiased product of powers, ``spec`` a list of (field, exponent) pairs."""
    factors = [f for f, e in spec for _ in range(e)]
    return product(*factors)


# ---------------------------------------------------------------- serialization

_HEADER = struct.Struct("<dq")


def field_to_bytes(f):
    return _HEADER.pack(f.grid.length, f.grid.count) + f.samples.astype("<f8").tobytes()


def field_from_bytes(buf):
    length, count = _HEADER.unpack_from(buf, 0)
    body = np.frombuffer(buf, dtype="<f8", count=count, offset=_HEADER.size)
    if body.shape[0] != count:
        raise ValueError("truncated field payload")
    return Field(Grid(length, count), body.astype(np.float64))


def write_field(path, f):
    with open(path, "wb") as fh:
        fh.write(field_to_bytes(f))


def read_field(path):
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


def write_field_csv(path, f, stride=1):
    x = f.grid.nodes[::stride]
    v = f.samples[::stride]
    with open(path, "w") as fh:
        fh.write("x,value\n")
        for xi, vi in zip(x, v):
            fh.write(f"{xi!r},{vi!r}\n")
