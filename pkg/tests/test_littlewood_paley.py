import numpy as np
import pytest
from hypothesis import given, strategies as st

from novikov_inflation.littlewood_paley import (
    DATA_CUTOFF,
    LP_CUTOFF,
    BesovParams,
    CutoffProfile,
    annulus,
    bernstein_check,
    besov_norm,
    block_norm,
    block_sup,
    block_window,
    build_cutoff,
    commutator,
    commutator_bound,
    commutator_sum,
    compact_block,
    dyadic_block,
    dyadic_blocks,
    j_max,
    lipschitz_norm,
    partition_of_unity_deviation,
    phi,
    resolved_wavenumber,
    restricted_norm,
)
from novikov_inflation.spectral import BandError, Field, Grid, leakage

G = Grid(64 * np.pi, 2048)  # dk = 1/32, Nyquist = 32


def band_field(grid, rng, lo, hi, amp=1.0):
    k = grid.wavenumbers
    m = (k >= lo) & (k <= hi)
    X = np.zeros(grid.n_modes, dtype=complex)
    X[m] = rng.normal(size=m.sum()) + 1j * rng.normal(size=m.sum())
    f = Field(grid, spectrum=X, check=False)
    return Field(grid, f.samples * (amp / np.max(np.abs(f.samples))))


def test_profiles():
    assert build_cutoff("lp") is LP_CUTOFF
    assert build_cutoff("data") is DATA_CUTOFF
    with pytest.raises(ValueError):
        build_cutoff("other")
    with pytest.raises(ValueError):
        CutoffProfile(1.0, 0.5)
    assert DATA_CUTOFF.integral() == 0.75


def test_cutoff_integral_matches_quadrature():
    xi = np.linspace(-2, 2, 400001)
    assert np.trapezoid(LP_CUTOFF(xi), xi) == pytest.approx(LP_CUTOFF.integral(), abs=1e-9)


def test_phi_plateau_and_support():
    xi = np.linspace(4 / 3, 1.5, 1001)
    assert np.max(np.abs(phi(xi) - 1)) < 1e-14
    assert np.all(phi(np.array([0.0, 0.7, 2.7, 5.0])) == 0.0)


def test_annulus_and_window():
    assert annulus(-1) == (0.0, 4 / 3)
    assert annulus(3) == (6.0, 8 * 8 / 3)
    assert j_max(G) == 3  # annulus(4) reaches 42.7 > 32
    with pytest.raises(ValueError):
        block_window(G, 4)
    with pytest.raises(ValueError):
        block_window(G, -2)


def test_partition_of_unity():
    assert partition_of_unity_deviation(G) < 1e-14


@given(st.integers(0, 2**32 - 1))
def test_blocks_reconstruct_resolved_fields(seed):
    rng = np.random.default_rng(seed)
    f = band_field(G, rng, 0, resolved_wavenumber(G))
    back = dyadic_blocks(f).reconstruct()
    assert np.max(np.abs(back.samples - f.samples)) < 1e-12


def test_block_support(rng):
    f = band_field(G, rng, 0, 30)
    for j in range(-1, j_max(G) + 1):
        b = dyadic_block(f, j)
        lo, hi = annulus(j)
        assert leakage(b, lo, hi) == 0.0


def test_zero_block_costs_nothing(rng):
    f = band_field(G, rng, 10, 12)
    assert block_norm(f, -1) < 1e-15 * block_norm(f, 3)
    assert block_norm(Field.zeros(G), 2) == 0.0


def test_compact_block_is_same_polynomial(rng):
    big = Grid(64 * np.pi, 16384)
    f = band_field(big, rng, 1, 5)
    full = dyadic_block(f, 1)
    small = compact_block(f, 1)
    assert small.grid.count < big.count
    x = rng.uniform(-big.length / 2, big.length / 2, 50)
    from novikov_inflation.interp import TrigInterpolant

    assert np.allclose(TrigInterpolant(small)(x), TrigInterpolant(full)(x), atol=1e-12)
    assert block_sup(f, 1) >= block_norm(f, 1) - 1e-15


def test_besov_norms_of_single_block():
    # cos(x) sits in blocks -1 and 0 only
    f = Field.from_function(G, np.cos)
    b0 = block_norm(f, 0)
    bm = block_norm(f, -1)
    assert besov_norm(f, BesovParams(1, np.inf, 1)) == pytest.approx(0.5 * bm + b0)
    assert besov_norm(f, BesovParams(0, np.inf, np.inf)) == pytest.approx(max(bm, b0))
    assert restricted_norm(f, 1, [0]) == pytest.approx(b0)
    with pytest.raises(ValueError):
        restricted_norm(f, 2, [0])
    with pytest.raises(ValueError):
        BesovParams(1, 3, 1)


def test_plateau_block_is_exact():
    # k = 11.5 lies in the plateau of block 3 (4/3 * 8 = 10.7 .. 1.5 * 8 = 12)
    f = Field.from_function(G, lambda x: np.cos(11.5 * x))
    assert np.allclose(dyadic_block(f, 3).samples, f.samples, atol=1e-12)
    assert lipschitz_norm(f) == pytest.approx(12.5, rel=1e-6)


@pytest.mark.parametrize("shape", ["ball", "annulus"])
def test_bernstein_bounded(rng, shape):
    lam = 8.0
    lo = 0 if shape == "ball" else 0.75 * lam * 1.01
    hi = (4 / 3 if shape == "ball" else 8 / 3) * lam * 0.99
    f = band_field(G, rng, lo, hi)
    rep = bernstein_check(f, shape, lam, k=1)
    assert not rep.violates(3.0)
    assert (rep.lower_ratio is None) == (shape == "ball")


def test_bernstein_rejects_out_of_band(rng):
    f = band_field(G, rng, 0, 20)
    with pytest.raises(BandError):
        bernstein_check(f, "ball", 4.0, 1)


def test_commutator_of_constant_vanishes(rng):
    v = Field.constant(G, 2.0)
    f = band_field(G, rng, 0, 8)
    for j in range(-1, j_max(G) + 1):
        assert np.max(np.abs(commutator(v, f, j).samples)) < 1e-12
    assert commutator_sum(v, f) < 1e-11


def test_commutator_bound_holds(rng):
    v = band_field(G, rng, 0, 4, 0.5)
    f = band_field(G, rng, 0, 8)
    assert commutator_sum(v, f) <= 3.0 * commutator_bound(v, f)
