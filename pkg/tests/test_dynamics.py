import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid

from novikov_inflation.dynamics import (
    PeakonCrossing,
    PeakonState,
    SolverAbort,
    SolverConfig,
    h1_norm_sq,
    integrate,
    integrate_peakons,
    peakon_rhs,
    rhs_camassa_holm,
    rhs_novikov,
    smoothed_peak,
    smoothed_peakon_field,
    traveling_wave_residual,
)
from novikov_inflation.spectral import Field, Grid, read_field

G = Grid(16 * np.pi, 256)  # dk = 1/8


def smooth_u0(grid=G, a=0.4):
    x = grid.nodes
    return Field(grid, a * np.cos(x / 8) + 0.5 * a * np.sin(3 * x / 8 + 0.3), check=False)


def run(dt, t_end=1.0, eq="novikov", u0=None):
    return integrate(u0 or smooth_u0(), SolverConfig(dt, t_end), eq)


# ------------------------------------------------------------ config


def test_config_rejects_fractional_step_count():
    with pytest.raises(ValueError):
        SolverConfig(0.3, 1.0)


def test_config_rejects_zero_dt_and_bad_stride():
    with pytest.raises(ValueError):
        SolverConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        SolverConfig(0.1, 1.0, snapshot_stride=0)


def test_config_backward_steps():
    assert SolverConfig(-0.1, -1.0).steps == 10


# ------------------------------------------------------------ right-hand sides


@given(st.floats(-3, 3))
def test_constants_are_steady(c):
    u = Field(G, np.full(G.count, c))
    assert np.max(np.abs(rhs_novikov(u).samples)) < 1e-12 * max(1.0, abs(c) ** 3)
    assert np.max(np.abs(rhs_camassa_holm(u).samples)) < 1e-12 * max(1.0, c * c)


def test_novikov_rhs_is_odd_in_u():
    u = smooth_u0()
    neg = Field(G, -u.samples, check=False)
    # u -> -u maps cubic terms to their negatives
    np.testing.assert_allclose(rhs_novikov(neg).samples, -rhs_novikov(u).samples, atol=1e-14)


# ------------------------------------------------------------ time stepping


@pytest.mark.parametrize("eq", ["novikov", "ch"])
def test_h1_is_conserved(eq):
    tr = run(0.01, 1.0, eq)
    h = [h1_norm_sq(tr.field(i)) for i in range(len(tr))]
    assert max(abs(v - h[0]) for v in h) / h[0] < 1e-9


def test_rk4_fourth_order():
    ref = run(0.00625).states[-1]
    errs = [np.max(np.abs(run(dt).states[-1] - ref)) for dt in (0.1, 0.05)]
    assert 10.0 <= errs[0] / errs[1] <= 24.0


def test_backward_run_returns_to_start():
    u0 = smooth_u0()
    fwd = integrate(u0, SolverConfig(0.01, 0.5))
    back = integrate(fwd.field(len(fwd) - 1), SolverConfig(-0.01, -0.5))
    assert np.max(np.abs(back.states[-1] - u0.spectrum)) < 1e-10 * np.max(np.abs(u0.spectrum))


def test_snapshot_stride_keeps_the_end():
    tr = integrate(smooth_u0(), SolverConfig(0.1, 1.0, snapshot_stride=3))
    assert tr.times == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])


def test_hermite_interpolation_hits_snapshots():
    tr = run(0.05, 0.5)
    for i in (0, 3, len(tr) - 1):
        np.testing.assert_allclose(tr.spectrum_at(tr.times[i]), tr.states[i], atol=1e-13)
    with pytest.raises(ValueError):
        tr.spectrum_at(0.7)


def test_hermite_interpolation_between_snapshots():
    coarse = integrate(smooth_u0(), SolverConfig(0.01, 0.4, snapshot_stride=10))
    fine = run(0.01, 0.4)
    mid = fine.states[15]
    assert np.max(np.abs(coarse.spectrum_at(0.15) - mid)) < 1e-5 * np.max(np.abs(mid))


def test_cfl_violation_aborts_with_partial_trajectory():
    with pytest.raises(SolverAbort) as info:
        integrate(smooth_u0(a=3.0), SolverConfig(1.0, 5.0))
    assert info.value.kind == "cfl"
    assert len(info.value.trajectory) == 1
    assert info.value.trajectory.status == "cfl"


def test_save_writes_manifest(tmp_path):
    tr = run(0.1, 0.2)
    man = tr.save(tmp_path)
    with open(tmp_path / "manifest.json") as fh:
        assert json.load(fh) == man
    assert len(man["snapshots"]) == 3
    back = read_field(tmp_path / man["snapshots"][-1]["file"])
    np.testing.assert_array_equal(back.samples, tr.field(2).samples)


# ------------------------------------------------------------ peakons


def test_single_peakon_speed_is_momentum_squared():
    tr = integrate_peakons(PeakonState([0.0], [1.3]), np.linspace(0, 2, 5))
    np.testing.assert_allclose(tr.q[:, 0], 1.69 * tr.times, rtol=1e-10)
    np.testing.assert_allclose(tr.p[:, 0], 1.3)


def test_two_peakon_energy_is_conserved():
    s = PeakonState([-3.0, 0.0], [1.5, 0.6])
    tr = integrate_peakons(s, np.linspace(0, 4, 9))

    def energy(q, p):
        return float(np.sum(p[:, None] * p[None, :] * np.exp(-np.abs(q[:, None] - q[None, :]))))

    e = [energy(tr.q[i], tr.p[i]) for i in range(len(tr.times))]
    assert max(abs(v - e[0]) for v in e) < 1e-9 * e[0]
    assert not tr.crossed


def test_peakon_rhs_rejects_coincident_positions():
    with pytest.raises(PeakonCrossing):
        peakon_rhs(PeakonState([0.0, 0.0], [1.0, 1.0]))


def test_state_validation():
    with pytest.raises(ValueError):
        PeakonState([1.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        PeakonState([0.0], [1.0, 2.0])


def test_smoothed_peak_limits():
    x = np.linspace(-20, 20, 4001)
    np.testing.assert_array_equal(smoothed_peak(x, 0.0), np.exp(-np.abs(x)))
    np.testing.assert_allclose(smoothed_peak(x, 1e-3), np.exp(-np.abs(x)), atol=1e-3)
    # convolution with a probability density keeps the mass 2
    assert trapezoid(smoothed_peak(x, 0.3), x) == pytest.approx(2.0, rel=1e-6)


def test_smoothed_field_includes_periodic_images():
    g = Grid(20.0, 512)
    f = smoothed_peakon_field(g, PeakonState([9.0], [1.0]), 0.1)
    # the peak sits one unit from the right edge, so the left edge sees it too
    assert f.samples[0] == pytest.approx(np.exp(-1.0), rel=2e-2)


def test_traveling_wave_residual_scales_with_width():
    # the mollified peakon is not an exact travelling wave; the mismatch is O(width)
    g = Grid(64.0, 2**14)
    r1 = traveling_wave_residual(g, 0.1)
    r2 = traveling_wave_residual(g, 0.05)
    assert 1.6 <= r1 / r2 <= 2.4
