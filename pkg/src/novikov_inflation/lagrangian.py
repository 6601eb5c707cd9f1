"""Characteristics of ``u^2``, transported dyadic blocks and the inflation run.

Along ``d phi/dt = u^2(t, phi)`` a block obeys

    (Delta_j u)(t, phi) = Delta_j u0 + int_0^t R_j(phi) + int_0^t Delta_j P(phi),

with ``R_j = u^2 Delta_j u_x - Delta_j(u^2 u_x)``.  Splitting ``P = E + F`` with
``E = -3/2 dL(u u_x^2)`` isolates the forcing whose initial value ``E0``
predicts the early growth of the restricted norm.
"""
from __future__ import annotations

import csv
import json
import math
import time as _time
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np
from scipy.integrate import cumulative_simpson

from .dynamics import SolverAbort, _Operators, _padded, _truncate, integrate, novikov_parts
from .interp import TrigInterpolant, node_slack, refine_sup, sup_norm
from .littlewood_paley import BesovParams, besov_norm, block_window, j_max, lipschitz_norm
from .spectral import Field, derivative, grad_helmholtz_inverse, irfft, pad_factor, product, rfft


class FlowAbort(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class FlowTrace:
    seeds: np.ndarray
    times: list = dc_field(default_factory=list)
    positions: list = dc_field(default_factory=list)
    jacobians: list = dc_field(default_factory=list)

    @property
    def jacobian_range(self):
        if not self.jacobians or self.jacobians[0] is None:
            return None
        return (
            float(min(np.min(J) for J in self.jacobians)),
            float(max(np.max(J) for J in self.jacobians)),
        )


def _spectral_jacobian(grid, disp):
    """1 + d/dx of the (periodic) displacement phi(x) - x."""
    D = rfft(disp)
    k = grid.wavenumbers
    mult = 1j * k
    mult[-1] = 0.0
    return 1.0 + irfft(D * mult, grid.count)


def integrate_flow(traj, seeds=None, window=(0.25, 4.0)):
    """RK4 for the characteristics over the trajectory's snapshot times.

    Midpoint velocities come from the cubic Hermite interpolant in time; the
    off-grid value of ``u`` is the trigonometric interpolant, squared.
    With ``seeds=None`` every node is a seed and the Jacobian is available.
    """
    grid = traj.grid
    full = seeds is None
    x0 = np.array(grid.nodes if full else np.asarray(seeds, dtype=np.float64), dtype=np.float64)
    trace = FlowTrace(x0.copy())

    def record(t, y):
        trace.times.append(t)
        trace.positions.append(y.copy())
        J = _spectral_jacobian(grid, y - x0) if full else None
        trace.jacobians.append(J)
        if J is not None:
            lo, hi = float(J.min()), float(J.max())
            if lo < window[0] or hi > window[1]:
                raise FlowAbort(f"Jacobian range [{lo:.3f}, {hi:.3f}] left {window} at t={t:.6g}", trace)

    def vel(X, y):
        w = TrigInterpolant(Field(grid, spectrum=X, check=False))(y)
        return w * w

    y = x0.copy()
    record(traj.times[0], y)
    ts = traj.times
    k1 = vel(traj.states[0], y)
    for i in range(len(ts) - 1):
        h = ts[i + 1] - ts[i]
        Xm = traj.spectrum_at(ts[i] + 0.5 * h)
        k2 = vel(Xm, y + 0.5 * h * k1)
        k3 = vel(Xm, y + 0.5 * h * k2)
        k4 = vel(traj.states[i + 1], y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        record(ts[i + 1], y)
        k1 = vel(traj.states[i + 1], y)
    return trace


def _compose_sup(block, disp, grid):
    """Sup over x of |block(x + disp(x))|, refined off the nodes."""
    fb = TrigInterpolant(block)
    fd = TrigInterpolant(Field(grid, disp, check=False))
    values = fb(grid.nodes + disp)
    # the flow stretches by at most a factor 2 inside the accepted Jacobian window
    slack = min(1.0, 4.0 * node_slack(block))
    return refine_sup(values, grid, lambda x: fb(x + fd(x)), slack=slack)


@dataclass
class TransportedBlock:
    j: int
    times: np.ndarray
    composed: list
    initial: np.ndarray
    r_integral: list
    p_integral: list

    def residuals(self):
        """max |lhs - rhs| / ||Delta_j u0||_inf at each time."""
        scale = float(np.max(np.abs(self.initial))) or 1.0
        return [
            float(np.max(np.abs(c - (self.initial + r + p)))) / scale
            for c, r, p in zip(self.composed, self.r_integral, self.p_integral)
        ]


def _block_spec(X, grid, j):
    sl, mult = block_window(grid, j)
    Y = np.zeros(grid.n_modes, dtype=np.complex128)
    Y[sl] = X[sl] * mult
    return Y


def _interp(Y, grid, y):
    return TrigInterpolant(Field(grid, spectrum=Y, check=False))(y)


def _commutator_parts(X, V, grid, j):
    """Spectra of ``Delta_j v_x`` and ``Delta_j(u^2 v_x)``.

    The commutator ``u^2 Delta_j v_x - Delta_j(u^2 v_x)`` is assembled
    pointwise from these: the product in its first term has modes past the
    grid's Nyquist wavenumber, so it is never formed spectrally.
    """
    n = grid.count
    m = n * pad_factor(3)
    op = _Operators(grid)
    u = _padded(X, n, m)
    vx = op.ik * V
    return _block_spec(vx, grid, j), _block_spec(_truncate(u * u * _padded(vx, n, m), n, m), grid, j)


def commutator_nodes(X, V, grid, j):
    """Node values of ``u^2 Delta_j v_x - Delta_j(u^2 v_x)`` (exact at the nodes)."""
    left, right = _commutator_parts(X, V, grid, j)
    u = irfft(X, grid.count)
    return u * u * irfft(left, grid.count) - irfft(right, grid.count)


def commutator_at(X, V, grid, j, y):
    """The same commutator evaluated at arbitrary points ``y``."""
    left, right = _commutator_parts(X, V, grid, j)
    uy = _interp(X, grid, y)
    return uy * uy * _interp(left, grid, y) - _interp(right, grid, y)


def transported_block(traj, flow, j):
    """Both sides of the transport identity for block j at every flow time."""
    if len(flow.times) != len(traj.times) or np.any(np.abs(np.subtract(flow.times, traj.times)) > 1e-12):
        raise ValueError("flow and trajectory times are not aligned")
    grid = traj.grid
    composed, r_vals, p_vals = [], [], []
    for i in range(len(traj.times)):
        X = traj.states[i]
        y = flow.positions[i]
        composed.append(_interp(_block_spec(X, grid, j), grid, y))
        _, p1, p2, _ = novikov_parts(X, grid)
        r_vals.append(commutator_at(X, X, grid, j, y))
        p_vals.append(_interp(_block_spec(p1 + p2, grid, j), grid, y))
    t = np.asarray(traj.times)
    r_int = _cumulative(r_vals, t)
    p_int = _cumulative(p_vals, t)
    return TransportedBlock(j, t, composed, composed[0].copy(), r_int, p_int)


def _cumulative(values, t):
    arr = np.asarray(values)
    if len(t) < 3:
        out = np.zeros_like(arr)
        if len(t) == 2:
            out[1] = 0.5 * (t[1] - t[0]) * (arr[0] + arr[1])
        return list(out)
    return list(cumulative_simpson(arr, x=t, axis=0, initial=0.0))


def composition_check(traj, flow, j, i):
    """(sup |Delta_j u(t_i)| , sup |Delta_j u(t_i) o phi|), both refined off the nodes."""
    grid = traj.grid
    block = Field(grid, spectrum=_block_spec(traj.states[i], grid, j), check=False)
    plain = sup_norm(block)
    comp = _compose_sup(block, flow.positions[i] - flow.seeds, grid)
    return plain, comp


# -------------------------------------------------------------- E0 and co.


def compute_E0(u0):
    """-3/2 dL(u0 (u0')^2), products dealiased."""
    du = derivative(u0)
    return grad_helmholtz_inverse(product(u0, du, du)) * -1.5


def weighted_restricted(X, grid, idx, k=1):
    """sum_{j in idx} 2^{kj} max over nodes |Delta_j f| for spectrum X."""
    return float(sum(2.0 ** (k * j) * np.max(np.abs(irfft(_block_spec(X, grid, j), grid.count))) for j in idx))


def _e_spectrum(X, grid):
    n = grid.count
    m = n * pad_factor(3)
    op = _Operators(grid)
    u = _padded(X, n, m)
    ux = _padded(op.ik * X, n, m)
    return -1.5 * op.dhelm * _truncate(u * ux * ux, n, m)


def _f_spectrum(X, grid):
    n = grid.count
    m = n * pad_factor(3)
    op = _Operators(grid)
    u = _padded(X, n, m)
    ux = _padded(op.ik * X, n, m)
    return -op.helm * _truncate(0.5 * ux**3, n, m) - op.dhelm * _truncate(u**3, n, m)


def jk_spectra(X, grid):
    """Spectra of J and K assembled from their formulas."""
    n = grid.count
    op = _Operators(grid)
    _, p1, p2, _ = novikov_parts(X, grid)
    m3 = n * pad_factor(3)
    u = _padded(X, n, m3)
    ux = _padded(op.ik * X, n, m3)
    P1, P2 = _padded(p1, n, m3), _padded(p2, n, m3)
    dP1, dP2 = _padded(op.ik * p1, n, m3), _padded(op.ik * p2, n, m3)
    uux = u * ux
    J = -1.5 * op.dhelm * _truncate((P1 + P2) * ux * ux + 2.0 * (dP1 + dP2) * uux, n, m3)
    w = op.helm * _truncate(uux * ux, n, m3)
    third = _truncate(u * u * _padded(w, n, m3), n, m3)
    m5 = n * pad_factor(5)
    u5 = _padded(X, n, m5)
    ux5 = _padded(op.ik * X, n, m5)
    K = 1.5 * (
        2.0 * op.dhelm * _truncate(u5**2 * ux5**3, n, m5)
        + op.helm * _truncate(u5**3 * ux5**2, n, m5)
        - third
    )
    return J, K


def e_equation_residual(traj, i):
    """Relative mismatch of (d/dt E + u^2 E_x) against J + K at snapshot i."""
    grid = traj.grid
    n = grid.count
    m = n * pad_factor(3)
    op = _Operators(grid)
    X, V = traj.states[i], traj.rates[i]
    u = _padded(X, n, m)
    ux = _padded(op.ik * X, n, m)
    ut = _padded(V, n, m)
    uxt = _padded(op.ik * V, n, m)
    Et = -1.5 * op.dhelm * _truncate(ut * ux * ux + 2.0 * u * ux * uxt, n, m)
    E = _e_spectrum(X, grid)
    adv = _truncate(u * u * _padded(op.ik * E, n, m), n, m)
    J, K = jk_spectra(X, grid)
    lhs = irfft(Et + adv, n)
    rhs = irfft(J + K, n)
    scale = float(np.max(np.abs(lhs))) or 1.0
    return float(np.max(np.abs(lhs - rhs))) / scale


def e0_comparability(E0, idx):
    """sum 2^j ||Delta_j E0|| divided by sum ||Delta_j dE0/dx||; Bernstein puts it in [3/8, 4/3]."""
    grid = E0.grid
    X = E0.spectrum
    num = weighted_restricted(X, grid, idx)
    den = weighted_restricted(_Operators(grid).ik * X, grid, idx, k=0)
    return num / den if den else math.nan


def r1_sum(X, grid, idx=None):
    """sum_j 2^j ||R^1_j||_inf at one state, over all blocks or over ``idx``."""
    n = grid.count
    m = n * pad_factor(3)
    op = _Operators(grid)
    T = _truncate(_padded(X, n, m) ** 2 * _padded(op.ik * X, n, m), n, m)
    u = irfft(X, n)
    uu = u * u
    blocks = range(-1, j_max(grid) + 1) if idx is None else idx
    total = 0.0
    for j in blocks:
        rj = uu * irfft(_block_spec(op.ik * X, grid, j), n) - irfft(_block_spec(T, grid, j), n)
        total += 2.0**j * float(np.max(np.abs(rj)))
    return total


def commutator_tracking(u, amplitudes=(0.5, 1.0, 2.0)):
    """Rows (a, lhs, rhs, lhs/rhs) with lhs = R^1 sum of a*u, rhs = ||a u||_{C^{0,1}} ||a u||^2_{B^1}."""
    rows = []
    b = besov_norm(u, BesovParams(1, np.inf, 1))
    lip = lipschitz_norm(u)
    for a in amplitudes:
        lhs = r1_sum(u.spectrum * a, u.grid)
        rhs = a**3 * lip * b * b
        rows.append((a, lhs, rhs, lhs / rhs if rhs else math.nan))
    return rows


# ------------------------------------------------------------- corrections


@dataclass
class CorrectionSeries:
    times: list = dc_field(default_factory=list)
    r1_all: list = dc_field(default_factory=list)
    r1_restricted: list = dc_field(default_factory=list)
    f_restricted: list = dc_field(default_factory=list)
    e_drift: list = dc_field(default_factory=list)
    e_drift_jk: list = dc_field(default_factory=list)
    jk_residual: list = dc_field(default_factory=list)


def correction_terms(traj, flow, idx, every=1, all_blocks=True):
    """Correction magnitudes at every ``every``-th snapshot.

    ``r1_all`` sums ``2^j ||R^1_j||`` over all blocks, ``r1_restricted`` over
    ``idx`` only.  The E-drift is measured directly and along the J + K route.
    """
    grid = traj.grid
    n = grid.count
    t = np.asarray(traj.times)
    E0 = _e_spectrum(traj.states[0], grid)
    E0_blocks = {j: irfft(_block_spec(E0, grid, j), n) for j in idx}
    # integrands of the J + K route at every snapshot (needed for quadrature)
    integrand = {j: [] for j in idx}
    for i in range(len(t)):
        X = traj.states[i]
        E = _e_spectrum(X, grid)
        J, K = jk_spectra(X, grid)
        for j in idx:
            y = flow.positions[i]
            integrand[j].append(commutator_at(X, E, grid, j, y) + _interp(_block_spec(J + K, grid, j), grid, y))
    jk_int = {j: _cumulative(integrand[j], t) for j in idx}
    out = CorrectionSeries()
    for i in range(0, len(t), every):
        X = traj.states[i]
        r_res = r1_sum(X, grid, idx)
        r_all = r1_sum(X, grid) if all_blocks else float("nan")
        F = _f_spectrum(X, grid)
        E = _e_spectrum(X, grid)
        drift = 0.0
        drift_jk = 0.0
        for j in idx:
            composed = _interp(_block_spec(E, grid, j), grid, flow.positions[i])
            drift += 2.0**j * float(np.max(np.abs(composed - E0_blocks[j])))
            drift_jk += 2.0**j * float(np.max(np.abs(jk_int[j][i])))
        out.times.append(float(t[i]))
        out.r1_all.append(r_all)
        out.r1_restricted.append(r_res)
        out.f_restricted.append(weighted_restricted(F, grid, idx))
        out.e_drift.append(drift)
        out.e_drift_jk.append(drift_jk)
        out.jk_residual.append(e_equation_residual(traj, i))
    return out


# ------------------------------------------------------------ experiment


@dataclass
class InflationReport:
    n: int
    index_set: list
    times: list
    besov_full: list
    restricted_composed: list
    restricted_plain: list
    e0_restricted: float
    prediction: list
    growth: list
    r1_all: list
    r1_restricted: list
    f_restricted: list
    e_drift: list
    e_drift_jk: list
    jk_residual: list
    integrated: dict
    jacobian_min: float
    jacobian_max: float
    lipschitz_ratio: list
    status: str = "ok"
    log_n: float = 0.0

    def growth_ratios(self, t_max):
        """growth / prediction for 0 < t <= t_max."""
        return [
            (t, g / p)
            for t, g, p in zip(self.times, self.growth, self.prediction)
            if 0 < t <= t_max * (1 + 1e-12) and p > 0
        ]

    def correction_margins(self, t_max, restricted=True):
        """prediction / (time-integrated correction) for 0 < t <= t_max.

        Every correction enters the lower bound as an integral over [0, t], so
        that is what is compared with ``t * sum 2^j ||Delta_j E0||``.  With
        ``restricted=False`` the commutator column uses the sum over all blocks.
        """
        keys = {"r1": "r1_restricted" if restricted else "r1_all", "f": "f_restricted", "e_drift": "e_drift"}
        rows = []
        for i, t in enumerate(self.times):
            if 0 < t <= t_max * (1 + 1e-12):
                row = {"t": t}
                for k, src in keys.items():
                    v = self.integrated[src][i]
                    row[k] = self.prediction[i] / v if v > 0 else math.inf
                rows.append(row)
        return rows

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_csv(self, path):
        cols = [
            "t", "besov_full", "restricted_composed", "prediction", "growth",
            "r1_all", "r1_restricted", "f_restricted", "e_drift",
            "int_r1_all", "int_r1_restricted", "int_f_restricted", "int_e_drift",
        ]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i, t in enumerate(self.times):
                w.writerow([repr(float(v)) for v in (
                    t, self.besov_full[i], self.restricted_composed[i], self.prediction[i], self.growth[i],
                    self.r1_all[i], self.r1_restricted[i], self.f_restricted[i], self.e_drift[i],
                    *(self.integrated[k][i] for k in ("r1_all", "r1_restricted", "f_restricted", "e_drift")),
                )])


def inflation_experiment(params, grid, cfg, u0=None, report_every=1, all_blocks=True, log=None):
    """Evolve the inflation datum and assemble the report.

    ``cfg.t_end`` should not exceed ``1 / log n``.  On a solver or flow abort
    the report covers the stored prefix and carries the abort status.
    """
    from .inflation_data import build_u0

    say = log or (lambda *a: None)
    idx = params.index_set
    if u0 is None:
        u0 = build_u0(params, grid, method="spectral")
    status = "ok"
    t0 = _time.time()
    try:
        traj = integrate(u0, cfg, "novikov")
    except SolverAbort as exc:
        traj, status = exc.trajectory, f"solver:{exc.kind}"
    say(f"solver done ({len(traj.times)} snapshots, {_time.time() - t0:.1f}s)")
    try:
        flow = integrate_flow(traj)
    except FlowAbort as exc:
        flow, status = exc.trace, "flow:jacobian"
        keep = len(flow.times)
        traj.times, traj.states, traj.rates = traj.times[:keep], traj.states[:keep], traj.rates[:keep]
    say(f"flow done ({_time.time() - t0:.1f}s)")
    E0 = _e_spectrum(traj.states[0], grid)
    e0r = weighted_restricted(E0, grid, idx)
    corr = correction_terms(traj, flow, idx, every=report_every, all_blocks=all_blocks)
    say(f"corrections done ({_time.time() - t0:.1f}s)")
    lip0 = lipschitz_norm(traj.field(0))
    times, full, comp, plain, lip = [], [], [], [], []
    for i in range(0, len(traj.times), report_every):
        X = traj.states[i]
        f = traj.field(i)
        times.append(float(traj.times[i]))
        full.append(besov_norm(f, BesovParams(1, np.inf, 1)))
        plain.append(weighted_restricted(X, grid, idx))
        comp.append(
            float(sum(
                2.0**j * np.max(np.abs(TrigInterpolant(Field(grid, spectrum=_block_spec(X, grid, j), check=False))(flow.positions[i])))
                for j in idx
            ))
        )
        lip.append(lipschitz_norm(f) / lip0 if lip0 else 0.0)
    jr = flow.jacobian_range or (float("nan"), float("nan"))
    return InflationReport(
        n=params.n,
        index_set=list(idx),
        times=times,
        besov_full=full,
        restricted_composed=comp,
        restricted_plain=plain,
        e0_restricted=e0r,
        prediction=[t * e0r for t in times],
        growth=[c - comp[0] for c in comp],
        r1_all=corr.r1_all,
        r1_restricted=corr.r1_restricted,
        f_restricted=corr.f_restricted,
        e_drift=corr.e_drift,
        e_drift_jk=corr.e_drift_jk,
        jk_residual=corr.jk_residual,
        integrated={
            key: [float(v) for v in _cumulative(getattr(corr, key), np.asarray(times))]
            for key in ("r1_all", "r1_restricted", "f_restricted", "e_drift")
        },
        jacobian_min=jr[0],
        jacobian_max=jr[1],
        lipschitz_ratio=lip,
        status=status,
        log_n=params.log_n,
    )
