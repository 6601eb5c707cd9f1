import numpy as np
import pytest
from hypothesis import given, strategies as st

from novikov_inflation.spectral import (
    BandError,
    Field,
    Grid,
    alias_safe_pad,
    derivative,
    field_from_bytes,
    field_to_bytes,
    grad_helmholtz_inverse,
    helmholtz_inverse,
    leakage,
    lp_norm,
    pad_factor,
    product,
    read_field,
    write_field,
)

G = Grid(2 * np.pi, 64)


def test_grid_rejects_bad_counts():
    with pytest.raises(ValueError):
        Grid(1.0, 48)
    with pytest.raises(ValueError):
        Grid(-1.0, 64)


def test_grid_geometry():
    g = Grid(8.0, 16)
    assert g.dx == 0.5
    assert g.nodes[0] == -4.0
    assert g.nyquist == pytest.approx(2 * np.pi)
    assert g.n_modes == 9


def test_derivative_of_sine():
    f = Field.from_function(G, lambda x: np.sin(3 * x))
    assert np.allclose(derivative(f).samples, 3 * np.cos(3 * G.nodes), atol=1e-13)


def test_helmholtz_multipliers():
    f = Field.from_function(G, lambda x: np.cos(2 * x))
    assert np.allclose(helmholtz_inverse(f).samples, np.cos(2 * G.nodes) / 5, atol=1e-14)
    assert np.allclose(grad_helmholtz_inverse(f).samples, -2 * np.sin(2 * G.nodes) / 5, atol=1e-14)


def test_derivative_refuses_unresolved_field():
    f = Field(G, (-1.0) ** np.arange(G.count))
    with pytest.raises(BandError):
        derivative(f)


def test_declared_band_is_checked():
    with pytest.raises(BandError):
        Field.from_function(G, lambda x: np.cos(5 * x), band=(0, 3))
    Field.from_function(G, lambda x: np.cos(2 * x), band=(0, 3))


def test_leakage_counts_outside_mass():
    f = Field.from_function(G, lambda x: np.cos(2 * x) + np.cos(6 * x))
    assert leakage(f, 0, 3) == pytest.approx(0.5)


@pytest.mark.parametrize("factors, pad", [(1, 1), (2, 2), (3, 2), (4, 4), (5, 4)])
def test_pad_factor(factors, pad):
    assert pad_factor(factors) == pad


def test_cubic_product_is_alias_free():
    g = Grid(2 * np.pi, 64)
    f = Field.from_function(g, lambda x: np.cos(12 * x))
    p = product(f, f, f)
    # (cos 12x)^3 = (3 cos 12x + cos 36x) / 4; mode 36 is past Nyquist and dropped
    assert np.allclose(p.samples, 0.75 * np.cos(12 * g.nodes), atol=1e-13)


def test_raw_product_folds_past_nyquist():
    g = Grid(2 * np.pi, 64)
    f = Field.from_function(g, lambda x: np.cos(12 * x))
    raw = product(f, f, f, pad=1)
    # mode 36 folds onto 2 * 32 - 36 = 28, leaving mode 12 intact
    assert abs(raw.spectrum[28]) == pytest.approx(g.count / 8)
    assert abs(raw.spectrum[12]) == pytest.approx(0.75 * g.count / 2)
    assert alias_safe_pad(g, 12, 3, 20) == 1
    assert alias_safe_pad(g, 12, 3, 30) == 2
    assert alias_safe_pad(g, 8, 3, 30) == 1


@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_lp_norm_ordering(vals):
    g = Grid(1.0, 8)
    f = Field(g, np.array(vals))
    # unit length: L1 <= L2 <= Linf
    assert lp_norm(f, 1) <= lp_norm(f, 2) + 1e-12
    assert lp_norm(f, 2) <= lp_norm(f, np.inf) + 1e-12


def test_field_bytes_round_trip(tmp_path, rng):
    f = Field(G, rng.normal(size=G.count))
    g = field_from_bytes(field_to_bytes(f))
    assert g.grid == f.grid and np.array_equal(g.samples, f.samples)
    write_field(tmp_path / "f.bin", f)
    assert np.array_equal(read_field(tmp_path / "f.bin").samples, f.samples)
