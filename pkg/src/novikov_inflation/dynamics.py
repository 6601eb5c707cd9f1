"""Pseudospectral method of lines for the Novikov and Camassa-Holm equations.

Both equations are advanced in nonlocal transport form,

    Novikov:        u_t = -u^2 u_x - 1/2 L(u_x^3) - dL(3/2 u u_x^2 + u^3)
    Camassa-Holm:   u_t = -u u_x - dL(u^2 + 1/2 u_x^2)

with ``L = (1 - d_xx)^{-1}`` and ``dL = d_x L``.  The state is kept as its rfft
spectrum; nonlinear terms are formed on a zero-padded grid and truncated, so
every retained mode of each product is the exact discrete convolution.

The peakon module solves the finite-dimensional reduction with
``u = sum_j p_j exp(-|x - q_j|)``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import erfc, erfcx

from .spectral import Field, Grid, irfft, lp_norm, pad_factor, rfft

EQUATIONS = ("novikov", "ch")


class SolverAbort(RuntimeError):
    """Integration stopped early; ``trajectory`` holds everything up to the last good step."""

    def __init__(self, kind, message, trajectory):
        super().__init__(message)
        self.kind = kind
        self.trajectory = trajectory


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-step classical RK4 settings.

    ``dt`` may be negative for backward runs; ``t_end / dt`` must be a whole
    number of steps.
    """

    dt: float
    t_end: float
    snapshot_stride: int = 1
    cfl_limit: float = 1.0

    def __post_init__(self):
        if self.dt == 0 or not np.isfinite(self.dt):
            raise ValueError("dt must be finite and nonzero")
        ratio = self.t_end / self.dt
        if ratio < 0 or abs(ratio - round(ratio)) > 1e-9 * max(1.0, abs(ratio)):
            raise ValueError(f"t_end={self.t_end} is not a whole number of steps of dt={self.dt}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")

    @property
    def steps(self):
        return int(round(self.t_end / self.dt))


# ------------------------------------------------------------------ RHS


def _padded(X, n, m):
    Y = np.zeros(m // 2 + 1, dtype=np.complex128)
    Y[: n // 2] = X[: n // 2]
    return irfft(Y, m) * (m / n)


def _truncate(a, n, m):
    Z = rfft(a)[: n // 2 + 1] * (n / m)
    Z[-1] = 0.0
    return Z


class _Operators:
    """Cached multipliers for one grid."""

    _cache: dict = {}

    def __new__(cls, grid):
        op = cls._cache.get(grid)
        if op is None:
            op = super().__new__(cls)
            k = grid.wavenumbers
            op.ik = 1j * k
            op.ik[-1] = 0.0
            op.helm = 1.0 / (1.0 + k * k)
            op.dhelm = op.ik * op.helm
            cls._cache = {grid: op}
        return op


def novikov_parts(X, grid):
    """Spectra of the transport term ``u^2 u_x`` and of P1, P2, plus max|u|.

    The right-hand side is ``-transport + P1 + P2``.
    """
    n = grid.count
    m = n * pad_factor(3)
    op = _Operators(grid)
    u = _padded(X, n, m)
    ux = _padded(op.ik * X, n, m)
    umax = float(np.max(np.abs(u)))
    uu = u * u
    transport = _truncate(uu * ux, n, m)
    p1 = -0.5 * op.helm * _truncate(ux * ux * ux, n, m)
    p2 = -op.dhelm * _truncate(u * (1.5 * ux * ux + uu), n, m)
    return transport, p1, p2, umax


def camassa_holm_parts(X, grid):
    n = grid.count
    m = n * pad_factor(2)
    op = _Operators(grid)
    u = _padded(X, n, m)
    ux = _padded(op.ik * X, n, m)
    umax = float(np.max(np.abs(u)))
    transport = _truncate(u * ux, n, m)
    p = -op.dhelm * _truncate(u * u + 0.5 * ux * ux, n, m)
    return transport, p, umax


def _rhs_spectrum(X, grid, equation):
    if equation == "novikov":
        tr, p1, p2, umax = novikov_parts(X, grid)
        return -tr + p1 + p2, umax * umax
    if equation == "ch":
        tr, p, umax = camassa_holm_parts(X, grid)
        return -tr + p, umax
    raise ValueError(f"unknown equation {equation!r}")


def rhs_novikov(u):
    """-u^2 u_x + P1(u) + P2(u) as a Field."""
    Y, _ = _rhs_spectrum(u.spectrum, u.grid, "novikov")
    return Field(u.grid, spectrum=Y, check=False)


def rhs_camassa_holm(u):
    Y, _ = _rhs_spectrum(u.spectrum, u.grid, "ch")
    return Field(u.grid, spectrum=Y, check=False)


def h1_norm_sq(u):
    """Integral of u^2 + u_x^2 (Parseval form of the trapezoid sum)."""
    g = u.grid
    X = u.spectrum
    w = g.mode_weights()
    k = g.wavenumbers.copy()
    k[-1] = 0.0
    return float(g.dx / g.count * np.sum(w * (1.0 + k * k) * (X.real**2 + X.imag**2)))


# ------------------------------------------------------------- trajectory


@dataclass
class Trajectory:
    """Snapshots of one run: states and right-hand sides as rfft spectra."""

    grid: Grid
    equation: str
    times: list = dc_field(default_factory=list)
    states: list = dc_field(default_factory=list)
    rates: list = dc_field(default_factory=list)
    status: str = "ok"

    def __len__(self):
        return len(self.times)

    def field(self, i):
        return Field(self.grid, spectrum=self.states[i], check=False)

    def rate(self, i):
        return Field(self.grid, spectrum=self.rates[i], check=False)

    def spectrum_at(self, t):
        """Cubic Hermite interpolation in time between stored snapshots."""
        ts = self.times
        if not (min(ts[0], ts[-1]) - 1e-12 <= t <= max(ts[0], ts[-1]) + 1e-12):
            raise ValueError(f"t={t} outside the stored range [{ts[0]}, {ts[-1]}]")
        i = int(np.searchsorted(ts, t, side="right")) - 1 if ts[-1] >= ts[0] else None
        if i is None:
            i = int(np.searchsorted(-np.asarray(ts), -t, side="right")) - 1
        i = min(max(i, 0), len(ts) - 2)
        t0, t1 = ts[i], ts[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return (
            h00 * self.states[i]
            + h10 * h * self.rates[i]
            + h01 * self.states[i + 1]
            + h11 * h * self.rates[i + 1]
        )

    def rate_at(self, t):
        """Time derivative of the Hermite interpolant."""
        ts = self.times
        i = min(max(int(np.searchsorted(ts, t, side="right")) - 1, 0), len(ts) - 2)
        t0, t1 = ts[i], ts[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        d00 = (6 * s**2 - 6 * s) / h
        d10 = 3 * s**2 - 4 * s + 1
        d01 = (-6 * s**2 + 6 * s) / h
        d11 = 3 * s**2 - 2 * s
        return (
            d00 * self.states[i]
            + d10 * self.rates[i]
            + d01 * self.states[i + 1]
            + d11 * self.rates[i + 1]
        )

    def save(self, directory, prefix="snap"):
        """Binary snapshots plus ``manifest.json`` listing {t, file, norms}."""
        from .spectral import write_field

        os.makedirs(directory, exist_ok=True)
        entries = []
        for i, t in enumerate(self.times):
            f = self.field(i)
            name = f"{prefix}_{i:05d}.bin"
            write_field(os.path.join(directory, name), f)
            entries.append({"t": t, "file": name, "norms": {"h1_sq": h1_norm_sq(f), "linf": lp_norm(f, np.inf)}})
        manifest = {"equation": self.equation, "status": self.status, "snapshots": entries}
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2)
        return manifest


def integrate(u0, cfg, rhs="novikov"):
    """Classical RK4 from ``u0``; snapshots every ``cfg.snapshot_stride`` steps and at the end.

    Raises :class:`SolverAbort` on a CFL violation or a non-finite state; the
    exception carries the trajectory up to the last good snapshot.
    """
    grid = u0.grid
    dt = cfg.dt
    kmax = grid.nyquist
    X = np.array(u0.spectrum, dtype=np.complex128)
    traj = Trajectory(grid, rhs)
    F, speed = _rhs_spectrum(X, grid, rhs)
    traj.times.append(0.0)
    traj.states.append(X.copy())
    traj.rates.append(F)
    t = 0.0
    for step in range(1, cfg.steps + 1):
        if abs(dt) * speed * kmax >= cfg.cfl_limit:
            traj.status = "cfl"
            raise SolverAbort(
                "cfl", f"CFL number {abs(dt) * speed * kmax:.3f} at t={t:.6g} exceeds {cfg.cfl_limit}", traj
            )
        k1 = F
        k2, _ = _rhs_spectrum(X + 0.5 * dt * k1, grid, rhs)
        k3, _ = _rhs_spectrum(X + 0.5 * dt * k2, grid, rhs)
        k4, _ = _rhs_spectrum(X + dt * k3, grid, rhs)
        Xn = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(Xn)):
            traj.status = "nan"
            raise SolverAbort("nan", f"non-finite state after step {step} (t={t + dt:.6g})", traj)
        X = Xn
        t = step * dt
        F, speed = _rhs_spectrum(X, grid, rhs)
        if step % cfg.snapshot_stride == 0 or step == cfg.steps:
            traj.times.append(t)
            traj.states.append(X.copy())
            traj.rates.append(F)
    return traj


# ---------------------------------------------------------------- peakons


class PeakonCrossing(RuntimeError):
    """Two peakon positions coincided."""


@dataclass
class PeakonState:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=np.float64))
        self.p = np.atleast_1d(np.asarray(self.p, dtype=np.float64))
        if self.q.shape != self.p.shape:
            raise ValueError("positions and momenta differ in length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("non-finite peakon state")
        if np.any(np.diff(self.q) < 0):
            raise ValueError("peakon positions must be sorted")

    @property
    def count(self):
        return self.q.size

    def profile(self, x):
        x = np.asarray(x, dtype=np.float64)
        return sum(p * np.exp(-np.abs(x - q)) for q, p in zip(self.q, self.p)) + 0.0 * x


def peakon_rhs(state, gap=1e-12):
    """(dq/dt, dp/dt) with ``u_x`` at a peak excluding that peak's own kink."""
    q, p = state.q, state.p
    if q.size == 0:
        return np.zeros(0), np.zeros(0)
    d = q[:, None] - q[None, :]
    off = ~np.eye(q.size, dtype=bool)
    if np.any(np.abs(d[off]) < gap):
        raise PeakonCrossing("peakon positions coincide")
    e = np.exp(-np.abs(d)) * p[None, :]
    u = e.sum(axis=1)
    ux = -(np.sign(d) * e).sum(axis=1)
    return u * u, -u * ux * p


@dataclass
class PeakonTrajectory:
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    crossed: bool = False

    def state(self, i):
        return PeakonState(self.q[i], self.p[i])

    def write_csv(self, path):
        n = self.q.shape[1] if self.q.ndim == 2 else 0
        head = ["t"] + [f"q{j + 1}" for j in range(n)] + [f"p{j + 1}" for j in range(n)]
        with open(path, "w") as fh:
            fh.write(",".join(head) + "\n")
            for t, q, p in zip(self.times, self.q, self.p):
                fh.write(",".join(repr(float(v)) for v in (t, *q, *p)) + "\n")


def integrate_peakons(state, times, rtol=1e-12, atol=1e-14, gap=1e-12):
    """DOP853 solution of the peakon system at the requested times."""
    times = np.asarray(times, dtype=np.float64)
    n = state.count
    if n == 0:
        return PeakonTrajectory(times, np.zeros((times.size, 0)), np.zeros((times.size, 0)))

    def f(t, y):
        dq, dp = peakon_rhs(PeakonState(np.sort(y[:n]), y[n:][np.argsort(y[:n])]), gap=0.0)
        order = np.argsort(np.argsort(y[:n]))
        return np.concatenate([dq[order], dp[order]])

    def close(t, y):
        qs = np.sort(y[:n])
        return float(np.min(np.diff(qs))) - gap if n > 1 else 1.0

    close.terminal = True
    sol = solve_ivp(
        f, (times[0], times[-1]), np.concatenate([state.q, state.p]), method="DOP853",
        t_eval=times, rtol=rtol, atol=atol, events=close,
    )
    crossed = sol.status == 1
    y = sol.y.T
    return PeakonTrajectory(sol.t, y[:, :n], y[:, n:], crossed)


def smoothed_peak(x, width):
    """exp(-|x|) convolved with a centred Gaussian of standard deviation ``width``."""
    x = np.asarray(x, dtype=np.float64)
    w = float(width)
    if w == 0:
        return np.exp(-np.abs(x))
    out = np.empty_like(x)
    for sgn in (1.0, -1.0):
        y = sgn * x
        z = (w * w - y) / (np.sqrt(2.0) * w)
        neg = z < 0
        term = np.empty_like(x)
        term[~neg] = 0.5 * np.exp(-0.5 * (y[~neg] / w) ** 2) * erfcx(z[~neg])
        term[neg] = 0.5 * np.exp(0.5 * w * w - y[neg]) * erfc(z[neg])
        if sgn > 0:
            out[...] = term
        else:
            out += term
    return out


def smoothed_peakon_field(grid, state, width):
    """Mollified peakon train sampled on ``grid`` (including the two nearest periodic images)."""
    x = grid.nodes
    acc = np.zeros(grid.count)
    for q, p in zip(state.q, state.p):
        for image in (-grid.length, 0.0, grid.length):
            acc += p * smoothed_peak(x - q - image, width)
    return Field(grid, acc)


def peakon_speed(p, equation="novikov"):
    return p * p if equation == "novikov" else p


def traveling_wave_residual(grid, width, p=1.0, equation="novikov", delta=1e-4, interior=None):
    """Relative mismatch between the solver RHS and a finite-difference time derivative
    of the translated mollified peakon profile.

    ``interior`` restricts the comparison to ``|x| <= interior`` (default L/4).
    """
    c = peakon_speed(p, equation)
    state = PeakonState([0.0], [p])
    u = smoothed_peakon_field(grid, state, width)
    r = rhs_novikov(u) if equation == "novikov" else rhs_camassa_holm(u)
    ahead = smoothed_peakon_field(grid, PeakonState([c * delta], [p]), width).samples
    behind = smoothed_peakon_field(grid, PeakonState([-c * delta], [p]), width).samples
    fd = (ahead - behind) / (2.0 * delta)
    mask = np.abs(grid.nodes) <= (0.25 * grid.length if interior is None else interior)
    return float(np.max(np.abs(r.samples[mask] - fd[mask])) / np.max(np.abs(fd[mask])))


@dataclass
class PeakonComparison:
    times: list
    distances: list
    amplitude: float

    @property
    def max_relative(self):
        if not self.distances:
            return 0.0
        return max(self.distances) / self.amplitude if self.amplitude else max(self.distances)

    def to_dict(self):
        return {
            "times": list(self.times),
            "distances": list(self.distances),
            "amplitude": self.amplitude,
            "max_relative": self.max_relative,
        }


def peakon_vs_pde(state0, width, cfg, grid, equation="novikov"):
    """L-inf distance between the PDE run of the mollified train and the mollified
    ODE solution, at each snapshot time."""
    u0 = smoothed_peakon_field(grid, state0, width)
    traj = integrate(u0, cfg, equation)
    times = np.asarray(traj.times)
    if state0.count == 0:
        return PeakonComparison(list(times), [lp_norm(traj.field(i), np.inf) for i in range(len(traj))], 0.0)
    if equation != "novikov":
        raise ValueError("the peakon ODE implemented here is the Novikov one")
    ode = integrate_peakons(state0, times)
    dist = []
    for i in range(len(ode.times)):
        ref = smoothed_peakon_field(grid, PeakonState(*_sorted(ode.q[i], ode.p[i])), width)
        dist.append(float(np.max(np.abs(traj.field(i).samples - ref.samples))))
    return PeakonComparison(list(ode.times), dist, float(np.max(np.abs(state0.p))))


def _sorted(q, p):
    o = np.argsort(q)
    return q[o], p[o]
