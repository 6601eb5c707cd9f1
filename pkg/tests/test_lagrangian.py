import math

import numpy as np
import pytest

from novikov_inflation import lagrangian as lg
from novikov_inflation.dynamics import SolverConfig, integrate, novikov_parts
from novikov_inflation.inflation_data import InflationParams, build_u0
from novikov_inflation.lagrangian import (
    InflationReport,
    commutator_at,
    commutator_nodes,
    commutator_tracking,
    composition_check,
    compute_E0,
    correction_terms,
    e0_comparability,
    e_equation_residual,
    inflation_experiment,
    integrate_flow,
    r1_sum,
    transported_block,
)
from novikov_inflation.spectral import Field, Grid


def smooth_field(count=512, amp=0.4, seed=1):
    g = Grid(16 * np.pi, count)
    k = g.wavenumbers
    r = np.random.default_rng(seed)
    X = np.zeros(g.n_modes, complex)
    m = (k > 0) & (k < 12)
    X[m] = (r.normal(size=m.sum()) + 1j * r.normal(size=m.sum())) * np.exp(-k[m] / 4)
    u = Field(g, spectrum=X, check=False)
    return u * (amp / np.abs(u.samples).max())


@pytest.fixture(scope="module")
def smooth_run():
    traj = integrate(smooth_field(), SolverConfig(0.01, 1.0))
    return traj, integrate_flow(traj)


# ------------------------------------------------------------ flow


def test_flow_is_identity_at_start(smooth_run):
    traj, flow = smooth_run
    np.testing.assert_array_equal(flow.positions[0], flow.seeds)
    np.testing.assert_allclose(flow.jacobians[0], 1.0, atol=1e-12)


def test_jacobian_stays_in_window(smooth_run):
    lo, hi = smooth_run[1].jacobian_range
    assert 0.25 < lo < 1.0 < hi < 4.0


def test_flow_of_constant_field_is_translation():
    g = Grid(2 * np.pi, 64)
    u = Field(g, np.full(g.count, 0.5))
    traj = integrate(u, SolverConfig(0.1, 1.0))
    flow = integrate_flow(traj)
    np.testing.assert_allclose(flow.positions[-1] - flow.seeds, 0.25, atol=1e-12)


def test_tight_window_aborts(smooth_run):
    traj, _ = smooth_run
    with pytest.raises(lg.FlowAbort) as info:
        integrate_flow(traj, window=(0.99, 1.01))
    assert len(info.value.trace.times) >= 1


# ------------------------------------------------------------ transport identity


@pytest.mark.parametrize("j", [0, 2, 3])
def test_transported_block_identity(smooth_run, j):
    traj, flow = smooth_run
    tb = transported_block(traj, flow, j)
    assert max(tb.residuals()) < 1e-8


@pytest.mark.parametrize("j", [0, 2, 3])
def test_composition_keeps_sup(smooth_run, j):
    plain, comp = composition_check(*smooth_run, j, 50)
    assert comp == pytest.approx(plain, rel=1e-9)


def test_commutator_nodes_match_pointwise(smooth_run):
    traj, _ = smooth_run
    X, V = traj.states[10], traj.rates[10]
    g = traj.grid
    np.testing.assert_allclose(
        commutator_at(X, V, g, 2, g.nodes), commutator_nodes(X, V, g, 2), atol=1e-11
    )


# ------------------------------------------------------------ E equation


def test_nonlocal_split_adds_up():
    u = smooth_field()
    _, p1, p2, _ = novikov_parts(u.spectrum, u.grid)
    E = lg._e_spectrum(u.spectrum, u.grid)
    F = lg._f_spectrum(u.spectrum, u.grid)
    assert np.abs(p1 + p2 - E - F).max() < 1e-14 * np.abs(p1 + p2).max()


def test_compute_E0_matches_spectrum():
    u = smooth_field()
    np.testing.assert_allclose(compute_E0(u).spectrum, lg._e_spectrum(u.spectrum, u.grid), atol=1e-14)


def test_e_equation_converges_with_resolution():
    res = []
    for n in (512, 2048):
        traj = integrate(smooth_field(n), SolverConfig(0.01, 0.2))
        res.append(e_equation_residual(traj, len(traj) - 1))
    assert res[1] < 1e-10
    assert res[1] < 1e-4 * res[0]


# ------------------------------------------------------------ corrections


def test_corrections_vanish_for_constant_field():
    g = Grid(2 * np.pi, 64)
    traj = integrate(Field(g, np.full(g.count, 0.3)), SolverConfig(0.1, 0.5))
    c = correction_terms(traj, integrate_flow(traj), [1, 2])
    for series in (c.r1_all, c.r1_restricted, c.f_restricted, c.e_drift):
        assert max(series) < 1e-13


def test_e_drift_matches_integrated_jk(smooth_run):
    c = correction_terms(*smooth_run, [2, 3], every=25)
    assert c.times == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(c.e_drift, c.e_drift_jk, rtol=1e-3, atol=1e-12)
    assert all(a <= b + 1e-12 for a, b in zip(c.r1_restricted, c.r1_all))


def test_r1_restricted_is_partial_sum():
    u = smooth_field()
    parts = [r1_sum(u.spectrum, u.grid, [j]) for j in (1, 2, 3)]
    assert r1_sum(u.spectrum, u.grid, [1, 2, 3]) == pytest.approx(sum(parts), rel=1e-14)


def test_commutator_bound_ratio_is_amplitude_free():
    rows = commutator_tracking(smooth_field())
    ratios = [r[3] for r in rows]
    # lhs and rhs are both cubic in the amplitude
    assert max(ratios) == pytest.approx(min(ratios), rel=1e-10)
    assert 0 < ratios[0] < 10


def test_e0_comparability_bernstein_window():
    p = InflationParams.generalized(10)
    g = Grid(1024, 2**19)
    E0 = compute_E0(build_u0(p, g, method="spectral"))
    assert 3 / 8 <= e0_comparability(E0, p.index_set) <= 4 / 3


# ------------------------------------------------------------ report


def test_report_round_trip(tmp_path):
    p = InflationParams.generalized(10)
    g = Grid(256, 2**17)
    T = 0.05
    rep = inflation_experiment(p, g, SolverConfig(T / 5, T))
    assert rep.status == "ok"
    assert rep.log_n == pytest.approx(math.log(10))
    back = InflationReport.from_dict(rep.to_dict())
    assert back.to_dict() == rep.to_dict()
    rep.write_json(tmp_path / "r.json")
    rep.write_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().count("\n") == len(rep.times) + 1
    for _, ratio in rep.growth_ratios(T):
        assert 0.7 <= ratio <= 1.3
