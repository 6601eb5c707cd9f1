"""Norm-inflation initial datum, its sub-terms and the checks made on them.

The datum is a sum over an index set ``N(n)`` of translated copies of the
inverse transform ``chi_check`` of the data cutoff.  Each copy sits at
``-s_l`` with ``s_l = 2^{l+1} gamma``; the high part additionally carries the
carrier ``cos(2^n gamma (x + s_l))`` and the modulation
``cos(2^l gamma (x + s_l))``.

Primitive samples are produced by a strided scheme: node ``m = R c + r`` of
the fine grid is node ``c`` of a coarse grid shifted by ``r dx``.  Every
translated ``chi_check`` is band-limited to ``|xi| <= 1/2``, so its values on a
shifted coarse grid come from one short inverse FFT with an exact phase
factor.  Only one chunk of ``r`` values is live at a time.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from scipy.optimize import minimize_scalar

from .interp import TrigInterpolant
from .littlewood_paley import (
    DATA_CUTOFF,
    BesovParams,
    besov_norm,
    block_norm,
    block_sup,
    j_max,
    lipschitz_norm,
)
from .spectral import (
    BandError,
    Field,
    Grid,
    alias_safe_pad,
    derivative,
    irfft,
    leakage,
    lp_norm,
    product,
)

GAMMA = 17.0 / 24.0
MODES = ("paper_exact", "generalized")


class ResolutionError(BandError):
    """The grid cannot represent the requested datum."""


class DecompositionError(RuntimeError):
    """An exact algebraic split failed its residual check."""


def index_set(n, mode="paper_exact", spacing=8, fractions=(0.25, 0.5)):
    """Multiples of ``spacing`` inside ``[fractions[0] n, fractions[1] n]``, sorted."""
    n = int(n)
    if mode == "paper_exact":
        if n < 16 or n % 16:
            raise ValueError(f"paper_exact mode needs n in 16N, got {n}")
        spacing, fractions = 8, (0.25, 0.5)
    elif mode != "generalized":
        raise ValueError(f"unknown mode {mode!r}")
    if spacing < 1:
        raise ValueError("spacing must be positive")
    lo, hi = fractions[0] * n, fractions[1] * n
    first = max(spacing, spacing * math.ceil(lo / spacing))
    return list(range(first, int(math.floor(hi)) + 1, spacing))


@dataclass(frozen=True)
class InflationParams:
    n: int
    mode: str = "paper_exact"
    gamma: float = GAMMA
    spacing: int = 8
    fractions: tuple = (0.25, 0.5)
    decay_exponent: int = 8
    alpha: float = 1.0 / 3.0

    def __post_init__(self):
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "paper_exact":
            if (
                self.gamma != GAMMA
                or self.alpha != 1.0 / 3.0
                or self.spacing != 8
                or self.fractions != (0.25, 0.5)
            ):
                raise ValueError("paper_exact mode fixes gamma, alpha, spacing and fractions")
            index_set(self.n, "paper_exact")
        else:
            if self.spacing < 2:
                raise ValueError("generalized mode needs spacing >= 2")
            idx = self.index_set
            if not idx:
                raise ValueError(f"empty index set for n={self.n}, spacing={self.spacing}")
            if max(idx) + 1 >= self.n:
                raise ValueError("index set must stay below n - 1")

    @classmethod
    def generalized(cls, n, spacing=5, **kw):
        return cls(n=n, mode="generalized", spacing=spacing, **kw)

    @property
    def index_set(self):
        return index_set(self.n, self.mode, self.spacing, self.fractions)

    @property
    def log_n(self):
        return math.log(self.n)

    @property
    def carrier(self):
        """2^n gamma."""
        return 2.0**self.n * self.gamma

    def modulation(self, ell):
        return 2.0**ell * self.gamma

    def offset(self, ell):
        return 2.0 ** (ell + 1) * self.gamma

    def high_band(self):
        """Declared support of the high part."""
        return 4.0 / 3.0 * 2.0 ** (self.n - 1), 1.5 * 2.0 ** (self.n - 1)

    def high_band_top(self):
        return self.carrier + self.modulation(max(self.index_set)) + DATA_CUTOFF.outer

    def to_dict(self):
        d = asdict(self)
        d["index_set"] = self.index_set
        return d


# ------------------------------------------------------------- grid sizing


def required_count(params, length, rule="blocks"):
    """Smallest power-of-two N on ``length`` resolving the datum.

    ``rule="blocks"``: Nyquist above ``8/3 2^{n-1}``, so the dyadic block
    carrying the high part fits on the grid.  ``rule="band"``: Nyquist above
    the top of the high part's spectrum only.
    """
    need = 8.0 / 3.0 * 2.0 ** (params.n - 1) if rule == "blocks" else params.high_band_top()
    n = 2
    while np.pi * n / length <= need:
        n *= 2
    return n


def check_grid(params, grid, tail_margin=64.0, rule="band"):
    need = required_count(params, grid.length, rule)
    if grid.count < need:
        raise ResolutionError(
            f"n={params.n} needs N >= {need} (2^{int(math.log2(need))}) on L={grid.length}, "
            f"got N={grid.count}"
        )
    reach = max(params.offset(l) for l in params.index_set) + tail_margin
    if 0.5 * grid.length <= reach:
        raise ResolutionError(
            f"half-length {0.5 * grid.length} does not exceed largest offset plus margin ({reach:.1f})"
        )


# ------------------------------------------------------ chi_check primitives


def chi_check_at_zero(cutoff=DATA_CUTOFF):
    return cutoff.integral() / (2.0 * np.pi)


def translated_spectrum(grid, shift, order=0, cutoff=DATA_CUTOFF):
    """rfft-layout spectrum of ``d^order/dx^order chi_check(x + shift)`` on ``grid``.

    The Fourier transform of ``chi_check(. + s)`` is ``exp(i k s) chi(k)``, so
    the lattice coefficients are exact; the field is the periodization.
    """
    k = grid.wavenumbers
    sl = grid.window(0.0, cutoff.outer)
    X = np.zeros(grid.n_modes, dtype=np.complex128)
    kk = k[sl]
    vals = cutoff(kk) * np.exp(1j * kk * shift) * (1j * kk) ** order
    X[sl] = grid.count * grid.sign(sl) * vals / grid.length
    return X


def chi_check_field(grid, shift=0.0, order=0, cutoff=DATA_CUTOFF):
    return Field(grid, spectrum=translated_spectrum(grid, shift, order, cutoff), check=False)


def _coarse_count(grid, floor=256):
    nc = 2
    while np.pi * nc / grid.length <= 2.0:
        nc *= 2
    return min(grid.count, max(nc, floor))


class StridedSampler:
    """Chunks of fine-grid nodes with translated chi_check values on them."""

    def __init__(self, grid, shifts, cutoff=DATA_CUTOFF, batch_points=2**20):
        self.grid = grid
        self.nc = _coarse_count(grid)
        self.R = grid.count // self.nc
        self.coarse = Grid(grid.length, self.nc)
        self.batch = max(1, batch_points // self.nc)
        self.shifts = list(shifts)
        self._spec = [translated_spectrum(self.coarse, s, 0, cutoff) for s in self.shifts]
        self._dspec = [translated_spectrum(self.coarse, s, 1, cutoff) for s in self.shifts]

    def chunks(self):
        """Yield ``(r0, r1, x, chis, dchis)`` with arrays of shape (r1 - r0, nc)."""
        g = self.grid
        k = self.coarse.wavenumbers
        c = np.arange(self.nc)
        for r0 in range(0, self.R, self.batch):
            r1 = min(self.R, r0 + self.batch)
            r = np.arange(r0, r1)
            x = -0.5 * g.length + (self.R * c[None, :] + r[:, None]) * g.dx
            phase = np.exp(1j * k[None, :] * (r[:, None] * g.dx))
            chis = [irfft(X[None, :] * phase, self.nc) for X in self._spec]
            dchis = [irfft(X[None, :] * phase, self.nc) for X in self._dspec]
            yield r0, r1, x, chis, dchis

    def scatter(self, out, r0, r1, chunk):
        out.reshape(self.nc, self.R)[:, r0:r1] = chunk.T


# --------------------------------------------------------------- the datum


def _high_chunk(params, x, chis):
    total = np.zeros_like(x)
    for ell, ch in zip(params.index_set, chis):
        s = params.offset(ell)
        total += np.cos(params.carrier * (x + s)) * np.cos(params.modulation(ell) * (x + s)) * ch
    return total * (2.0**-params.n * params.log_n)


def build_high(params, grid, check=True, method="pointwise"):
    """High-frequency part, band-declared.

    ``method="pointwise"`` evaluates the formula at the nodes, so on a short
    period the truncated tails of the translated bumps leave a small seam.
    ``method="spectral"`` writes the lattice spectrum of the periodized
    function directly (no seam; preferable when ``L`` is only a few hundred).
    """
    check_grid(params, grid)
    if method == "spectral":
        return Field(grid, spectrum=exact_high_spectrum(params, grid), band=params.high_band(), check=check)
    if method != "pointwise":
        raise ValueError(f"unknown method {method!r}")
    sampler = StridedSampler(grid, [params.offset(l) for l in params.index_set])
    out = np.empty(grid.count)
    for r0, r1, x, chis, _ in sampler.chunks():
        sampler.scatter(out, r0, r1, _high_chunk(params, x, chis))
    return Field(grid, out, band=params.high_band(), check=check)


def build_low(params, grid, check=True):
    """Low part: sum of translated chi_check, band-declared on ``|xi| <= 1/2``."""
    check_grid(params, grid)
    X = sum(translated_spectrum(grid, params.offset(l)) for l in params.index_set)
    return Field(grid, spectrum=X, band=(0.0, DATA_CUTOFF.outer), check=check)


def build_u0(params, grid, include_high=True, include_low=True, method="pointwise"):
    """n^{-alpha} (u_H + u_L)."""
    scale = params.n**-params.alpha
    acc = np.zeros(grid.count)
    if include_high:
        acc += build_high(params, grid, check=False, method=method).samples
    if include_low:
        acc += build_low(params, grid, check=False).samples
    acc *= scale
    return Field(grid, acc)


def build_ch_variant(params, grid):
    """n^{-1/2} u_H: same pipeline as the high part, rescaled."""
    h = build_high(params, grid, check=False)
    return Field(grid, h.samples * params.n**-0.5)


def exact_high_spectrum(params, grid, cutoff=DATA_CUTOFF):
    """Closed-form lattice spectrum of the periodized high part.

    ``cos(A y) cos(B y) chi_check(y)`` with ``y = x + s`` has transform
    ``1/4 sum_{+-,+-} exp(i k s) chi(k -+ A -+ B)``.
    """
    X = np.zeros(grid.n_modes, dtype=np.complex128)
    A = params.carrier
    for ell in params.index_set:
        B = params.modulation(ell)
        s = params.offset(ell)
        for w in (A + B, A - B):
            sl = grid.window(w - cutoff.outer, w + cutoff.outer)
            k = grid.wavenumbers[sl]
            X[sl] += 0.25 * cutoff(k - w) * np.exp(1j * k * s) * grid.sign(sl)
    return X * (grid.count / grid.length * 2.0**-params.n * params.log_n)


# ------------------------------------------------------------ observations


def support_report(params, grid):
    """Leakage of the datum and of each single-index factor outside its band."""
    out = {}
    hi = build_high(params, grid, check=False)
    out["high"] = {"band": list(params.high_band()), "leakage": leakage(hi, *params.high_band())}
    del hi
    lo = build_low(params, grid, check=False)
    out["low"] = {"band": [0.0, DATA_CUTOFF.outer], "leakage": leakage(lo, 0.0, DATA_CUTOFF.outer)}
    del lo
    A = params.carrier
    sampler = StridedSampler(grid, [params.offset(l) for l in params.index_set])
    for i, ell in enumerate(params.index_set):
        B, s = params.modulation(ell), params.offset(ell)
        mod = np.empty(grid.count)
        for r0, r1, x, chis, _ in sampler.chunks():
            sampler.scatter(mod, r0, r1, np.cos(B * (x + s)) * chis[i])
        f = Field(grid, mod, check=False)
        band = (B - 0.5, B + 0.5)
        out[f"modulated[{ell}]"] = {"band": list(band), "leakage": leakage(f, *band)}
        del f
        mod = np.empty(grid.count)
        for r0, r1, x, chis, _ in sampler.chunks():
            sampler.scatter(mod, r0, r1, np.cos(A * (x + s)) * np.cos(B * (x + s)) * chis[i])
        f = Field(grid, mod, check=False)
        band = (A - B - 0.5, A + B + 0.5)
        out[f"carried[{ell}]"] = {"band": list(band), "leakage": leakage(f, *band)}
        del f, mod
    return out


def lemma31_constants(params, grid):
    """Size ratios of the high part, the low part and the whole datum for one n."""
    if j_max(grid) < params.n - 1:
        raise ResolutionError(
            f"block {params.n - 1} carrying the high part is unresolved; "
            f"need N >= {required_count(params, grid.length)}"
        )
    logn = params.log_n
    hi = build_high(params, grid, check=False)
    dh = derivative(hi)
    c_high = (2.0**params.n * lp_norm(hi, np.inf) + lp_norm(dh, np.inf)) / logn
    del hi, dh
    c_low = lipschitz_norm(build_low(params, grid, check=False))
    u0 = build_u0(params, grid)
    b1 = besov_norm(u0, BesovParams(1, np.inf, 1))
    del u0
    return {
        "high": c_high,
        "low_lipschitz": c_low,
        "besov": b1 / (params.n**-params.alpha * logn),
        "besov_value": b1,
        "inv_loglog_n": 1.0 / math.log(logn),
    }


def ch_variant_constants(params, grid):
    """Measured constants of the u0 = n^{-1/2} u_H variant."""
    logn = params.log_n
    idx = params.index_set
    u0 = build_ch_variant(params, grid)
    b1 = besov_norm(u0, BesovParams(1, np.inf, 1))
    du = derivative(u0)
    del u0
    pad = alias_safe_pad(grid, params.high_band_top(), 2, 8.0 / 3.0 * 2.0 ** max(idx))
    sq = product(du, du, pad=pad)
    del du
    lower = sum(block_norm(sq, j) for j in idx)
    return {
        "besov": b1 / (params.n**-0.5 * logn),
        "besov_value": b1,
        "lower": lower / logn**2,
        "lower_value": lower,
        "pad": pad,
    }


def lemma32_lower_bound(params, grid, include_high=True):
    """||u0 (u0')^2||_{B^0_{inf,1}(N(n))} / (log n)^2 by direct block summation."""
    idx = params.index_set
    u0 = build_u0(params, grid, include_high=include_high)
    du = derivative(u0)
    pad = alias_safe_pad(grid, params.high_band_top(), 3, 8.0 / 3.0 * 2.0 ** max(idx))
    cube = product(u0, du, du, pad=pad)
    del u0, du
    return sum(block_norm(cube, j) for j in idx) / params.log_n**2


# ----------------------------------------- cubic forcing term split

TERM_NAMES = (
    "full", "I1", "I2", "I3", "I11", "I12", "I13",
    "I111", "I112", "I113", "I114", "I115", "I1111", "I1112",
)

IDENTITIES = {
    "full = I1 + I2 + I3": ("full", ("I1", "I2", "I3")),
    "I1 = (log n)^2 (I11 + I12 - I13)": ("I1", None),
    "I11 = gamma^2 (I111 + ... + I115)": ("I11", None),
    "I111 = I1111 + I1112": ("I111", ("I1111", "I1112")),
}


def _split_chunk(params, x, chis, dchis):
    """All named terms on one chunk, each from its own formula."""
    n, g, logn = params.n, params.gamma, params.log_n
    A = params.carrier
    idx = params.index_set
    L = np.zeros_like(x)
    dL = np.zeros_like(x)
    H = np.zeros_like(x)
    S = np.zeros_like(x)
    D = np.zeros_like(x)
    parts = []
    for ell, ch, dch in zip(idx, chis, dchis):
        B, s = params.modulation(ell), params.offset(ell)
        a = A * (x + s)
        b = B * (x + s)
        ca, sa, cb, sb = np.cos(a), np.sin(a), np.cos(b), np.sin(b)
        c_l = cb * ch
        dc_l = cb * dch - B * sb * ch
        S_l = sa * c_l
        L += ch
        dL += dch
        H += ca * c_l
        S += S_l
        D += ca * dc_l
        parts.append((ch, S_l, np.cos(2.0 * a), np.cos(2.0 * b)))
    H *= 2.0**-n * logn
    dH = logn * (-g * S + 2.0**-n * D)
    scale = n**-params.alpha
    u0 = scale * (H + L)
    du0 = scale * (dH + dL)
    t = {}
    t["full"] = n ** (3.0 * params.alpha) * u0 * du0 * du0
    t["I1"] = L * dH * dH
    t["I2"] = H * (dH + dL) ** 2
    t["I3"] = L * (dL * dL + 2.0 * dH * dL)
    t["I11"] = g * g * L * S * S
    t["I12"] = 2.0 ** (-2 * n) * L * D * D
    t["I13"] = 2.0 * g * 2.0**-n * L * S * D
    sq = [p[0] * p[0] for p in parts]
    t["I111"] = 0.25 * L * sum(p[3] * q for p, q in zip(parts, sq))
    t["I112"] = 0.25 * L * sum(sq)
    t["I113"] = -0.25 * L * sum(p[2] * q for p, q in zip(parts, sq))
    t["I114"] = -0.25 * L * sum(p[2] * p[3] * q for p, q in zip(parts, sq))
    cross = np.zeros_like(x)
    cross2 = np.zeros_like(x)
    for i, p in enumerate(parts):
        for k, q in enumerate(parts):
            if i != k:
                cross += p[1] * q[1]
                cross2 += p[3] * sq[i] * q[0]
    t["I115"] = L * cross
    t["I1111"] = 0.25 * sum(p[3] * q * p[0] for p, q in zip(parts, sq))
    t["I1112"] = 0.25 * cross2
    return t


def summand_sup(params, grid, ell):
    """Sup of ``|cos(2^{l+1} gamma (x + s_l)) chi_check(x + s_l)^3|`` near its peak at -s_l."""
    coarse = Grid(grid.length, _coarse_count(grid))
    s = params.offset(ell)
    chi = TrigInterpolant(chi_check_field(coarse, s))
    w = 2.0 * params.modulation(ell)

    def value(x):
        x = np.atleast_1d(x)
        return np.abs(np.cos(w * (x + s)) * chi(x) ** 3)

    xs = -s + np.linspace(-2.0, 2.0, 4001)
    x0 = xs[int(np.argmax(value(xs)))]
    h = xs[1] - xs[0]
    res = minimize_scalar(lambda t: -float(value(t)[0]), bounds=(x0 - h, x0 + h), method="bounded",
                          options={"xatol": 1e-12})
    return max(float(value(x0)[0]), -float(res.fun))


def _identity_rhs(params, t):
    return {
        "full = I1 + I2 + I3": t["I1"] + t["I2"] + t["I3"],
        "I1 = (log n)^2 (I11 + I12 - I13)": params.log_n**2 * (t["I11"] + t["I12"] - t["I13"]),
        "I11 = gamma^2 (I111 + ... + I115)": params.gamma**2
        * (t["I111"] + t["I112"] + t["I113"] + t["I114"] + t["I115"]),
        "I111 = I1111 + I1112": t["I1111"] + t["I1112"],
    }


@dataclass
class TermDecomposition:
    params: InflationParams
    length: float
    count: int
    linf: dict
    restricted: dict
    blocks: dict
    identity_residuals: dict
    chi0: float
    single_sups: dict
    floor_blocks: dict
    fields: dict | None = dc_field(default=None, repr=False)

    # -- verdict helpers -------------------------------------------------

    def vanishing(self, names=("I3", "I112", "I113", "I114")):
        """name -> restricted norm / L-inf norm."""
        return {
            k: (self.restricted[k] / self.linf[k] if self.linf[k] > 0 else 0.0) for k in names
        }

    def dominance(self):
        rest = sum(self.restricted[k] for k in ("I12", "I13", "I115", "I1112"))
        return self.restricted["I1111"], rest

    def per_block_floor(self):
        """Each block of I1111 against 1/4 chi_check(0)^3, and the unscaled summand against
        chi_check(0)^3 and the constant 1/(128 pi)."""
        c3 = self.chi0**3
        rows = []
        for j in self.params.index_set:
            rows.append(
                {
                    "j": j,
                    "block": self.floor_blocks[j],
                    "floor": 0.25 * c3,
                    "summand_sup": self.single_sups[j],
                    "chi0_cubed": c3,
                    "reference_floor": 1.0 / (128.0 * np.pi),
                    "reference_floor_holds": bool(c3 >= 1.0 / (128.0 * np.pi)),
                }
            )
        return rows

    def ratios(self):
        """Lower-bound ratio in both normalizations (with and without the factor n^{3 alpha})."""
        logn = self.params.log_n
        norm = self.params.n ** (3.0 * self.params.alpha)
        return {
            "cube": self.restricted["full"] / norm / logn**2,
            "scaled_cube": self.restricted["full"] / logn**2,
        }

    def to_dict(self):
        return {
            "n": self.params.n,
            "mode": self.params.mode,
            "params": self.params.to_dict(),
            "grid": {"length_x": self.length, "points_count": self.count},
            "terms": {
                k: {
                    "linf": self.linf[k],
                    "restricted_norm": self.restricted[k],
                    "blocks": {str(j): v for j, v in self.blocks[k].items()},
                }
                for k in TERM_NAMES
            },
            "identity_residuals": self.identity_residuals,
            "ratios": self.ratios(),
            "measured_constants": {
                "chi_check_0": self.chi0,
                "per_block_floor": self.per_block_floor(),
            },
        }


def decompose_lemma32(params, grid, tol=1e-8, keep_fields=None, group=2, batch_points=2**20):
    """Build every term of the forcing split from its formula and measure it.

    Parameters
    ----------
    keep_fields : bool, optional
        Keep every term as a Field (default: only when N <= 2^22).
    group : int
        Number of full-length terms materialized together on large grids.
    """
    check_grid(params, grid)
    idx = params.index_set
    if j_max(grid) < max(idx):
        raise ResolutionError("index set exceeds the grid's largest dyadic block")
    if keep_fields is None:
        keep_fields = grid.count <= 2**22
    sampler = StridedSampler(grid, [params.offset(l) for l in idx], batch_points=batch_points)

    # pass 1: identities and sup norms, nothing stored at full length
    num = {k: 0.0 for k in IDENTITIES}
    den = {k: 0.0 for k in IDENTITIES}
    linf = {k: 0.0 for k in TERM_NAMES}
    stored = {k: np.empty(grid.count) for k in TERM_NAMES} if keep_fields else None
    for r0, r1, x, chis, dchis in sampler.chunks():
        t = _split_chunk(params, x, chis, dchis)
        for k, v in t.items():
            linf[k] = max(linf[k], float(np.max(np.abs(v))))
            if stored is not None:
                sampler.scatter(stored[k], r0, r1, v)
        rhs = _identity_rhs(params, t)
        for name, (lhs, _) in IDENTITIES.items():
            num[name] = max(num[name], float(np.max(np.abs(t[lhs] - rhs[name]))))
            den[name] = max(den[name], float(np.max(np.abs(t[lhs]))))
    residuals = {k: (num[k] / den[k] if den[k] > 0 else 0.0) for k in IDENTITIES}
    for k, r in residuals.items():
        if r > tol:
            raise DecompositionError(f"identity '{k}' off by {r:.3e} (tolerance {tol:.0e})")

    # pass 2: restricted norms, one group of terms materialized at a time
    blocks = {}
    fields = {} if keep_fields else None
    names = list(TERM_NAMES)
    step = len(names) if keep_fields else max(1, group)
    for start in range(0, len(names), step):
        batch = names[start:start + step]
        if stored is not None:
            arrays = {k: stored[k] for k in batch}
        else:
            arrays = {k: np.empty(grid.count) for k in batch}
            for r0, r1, x, chis, dchis in sampler.chunks():
                t = _split_chunk(params, x, chis, dchis)
                for k in batch:
                    sampler.scatter(arrays[k], r0, r1, t[k])
        for k in batch:
            f = Field(grid, arrays.pop(k), check=False)
            blocks[k] = {j: block_norm(f, j) for j in idx}
            if k == "I1111":
                floor_blocks = {j: block_sup(f, j) for j in idx}
            if fields is not None:
                fields[k] = f
            else:
                f.drop_spectrum()
            del f
    restricted = {k: float(sum(blocks[k].values())) for k in TERM_NAMES}
    return TermDecomposition(
        params=params,
        length=grid.length,
        count=grid.count,
        linf=linf,
        restricted=restricted,
        blocks=blocks,
        identity_residuals=residuals,
        chi0=chi_check_at_zero(),
        single_sups={j: summand_sup(params, grid, j) for j in idx},
        floor_blocks=floor_blocks,
        fields=fields,
    )


# ------------------------------------------------------------ tail checks


@dataclass
class TailReport:
    M: int
    constant: float
    constant_doubled: float
    x_at_max: float
    cross_terms: list

    @property
    def stable(self):
        # unchanged under doubling of the period, in either direction
        return abs(self.constant_doubled - self.constant) <= 1e-6 * self.constant


def _tail_constant(M, length, spacing=0.25, cutoff=DATA_CUTOFF):
    count = 1
    while length / count > spacing:
        count *= 2
    grid = Grid(length, count)
    f = irfft(translated_spectrum(grid, 0.0, 0, cutoff), grid.count)
    df = irfft(translated_spectrum(grid, 0.0, 1, cutoff), grid.count)
    x = grid.nodes
    with np.errstate(divide="ignore"):
        logv = np.log(np.abs(f) + np.abs(df)) + M * np.log1p(np.abs(x))
    m = int(np.argmax(logv))
    return float(np.exp(logv[m])), float(x[m])


def cross_term_check(params, M=None, samples=400001):
    """Log-space check of the two-bump decay bound for every pair j > l in the index set."""
    M = params.decay_exponent if M is None else M
    g = params.gamma
    rows = []
    idx = params.index_set
    for a, ell in enumerate(idx):
        for j in idx[a + 1:]:
            d = (2.0 ** (j + 1) - 2.0 ** (ell + 1)) * g
            x = np.concatenate([np.linspace(-2.0 * d, 3.0 * d, samples), np.linspace(-2.0, 2.0, samples)])
            logv = -M * np.log1p(x * x) - M * np.log1p((x - d) ** 2)
            lhs = float(np.max(logv))
            rhs = -2.0 * M * math.log(g * (2.0**j - 2.0**ell))
            rows.append({"l": ell, "j": j, "log_lhs": lhs, "log_rhs": rhs, "holds": lhs <= rhs})
    return rows


def schwartz_tail_check(params, grid, M=None, cross_params=None):
    """Smallest C with ``|chi_check| + |chi_check'| <= C (1 + |x|)^{-M}`` on the domain,
    the same constant on twice the domain, and the cross-term decay bounds."""
    M = params.decay_exponent if M is None else M
    c1, xm = _tail_constant(M, grid.length)
    c2, _ = _tail_constant(M, 2.0 * grid.length)
    cross = cross_term_check(cross_params or params, M)
    return TailReport(M, c1, c2, xm, cross)


# ---------------------------------------------------------------- output


def write_lemma_report(path, decomposition, extra=None):
    rec = decomposition.to_dict()
    if extra:
        rec.update(extra)
    with open(path, "w") as fh:
        json.dump(rec, fh, indent=2, sort_keys=True)
    return rec


def write_spectrum_csv(path, f, lo=0.0, hi=None):
    """Rows ``k, |X_k| / N`` for lo <= k <= hi."""
    grid = f.grid
    sl = grid.window(lo, grid.nyquist if hi is None else hi)
    k = grid.wavenumbers[sl]
    amp = np.abs(f.spectrum[sl]) / grid.count
    with open(path, "w") as fh:
        fh.write("k,amplitude\n")
        for kk, a in zip(k, amp):
            fh.write(f"{kk!r},{a!r}\n")
