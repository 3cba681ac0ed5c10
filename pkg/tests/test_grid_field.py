"""Grid conventions, field containers, analyzers, and canvas resizing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oamtalbot.grid_field import (
    ANALYZERS,
    Grid2D,
    IntensityImage,
    JonesField,
    ScalarField,
    gaussian_envelope,
    intensity,
    make_grid,
    project,
    resize_canvas,
    strip_phase,
    total_power,
)


def test_make_grid_pitches_and_center():
    grid = make_grid(64, 32, 6.4e-3, 1.6e-3)
    assert grid.dx == pytest.approx(1.0e-4)
    assert grid.dy == pytest.approx(5.0e-5)
    assert grid.center == (0.0, 0.0)
    assert grid.extent_x == pytest.approx(6.4e-3)
    assert grid.extent_y == pytest.approx(1.6e-3)


def test_even_grid_center_sample_sits_on_origin():
    grid = make_grid(16, 16, 1.0, 1.0)
    assert grid.x_coords()[8] == 0.0
    assert grid.y_coords()[8] == 0.0


@given(
    nx=st.integers(2, 32),
    ny=st.integers(2, 32),
    dx=st.floats(1e-6, 1e-2),
    dy=st.floats(1e-6, 1e-2),
    data=st.data(),
)
@settings(max_examples=50, deadline=None)
def test_index_coord_roundtrip(nx, ny, dx, dy, data):
    grid = Grid2D(nx=nx, ny=ny, dx=dx, dy=dy, center=(1.25e-3, -0.5e-3))
    i = data.draw(st.integers(0, nx - 1))
    j = data.draw(st.integers(0, ny - 1))
    assert grid.coord_to_index(*grid.index_to_coord(i, j)) == (i, j)


def test_coord_to_index_picks_nearest_sample():
    grid = make_grid(8, 8, 8.0, 8.0)
    # 0.4 of a pitch away from sample 5 still maps to sample 5
    assert grid.coord_to_index(1.0 + 0.4, 0.0) == (5, 4)
    with pytest.raises(ValueError):
        grid.coord_to_index(100.0, 0.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid2D(nx=1, ny=4, dx=1.0, dy=1.0)
    with pytest.raises(ValueError):
        Grid2D(nx=4, ny=4, dx=0.0, dy=1.0)
    with pytest.raises(ValueError):
        Grid2D(nx=4, ny=4, dx=1.0, dy=1.0, center=(np.inf, 0.0))
    with pytest.raises(ValueError):
        make_grid(4, 4, -1.0, 1.0)


def test_field_arrays_are_readonly_copies():
    grid = make_grid(4, 4, 1.0, 1.0)
    src = np.ones(grid.shape, dtype=complex)
    field = ScalarField(grid=grid, amplitudes=src, wavelength=1.0)
    src[0, 0] = 99.0
    assert field.amplitudes[0, 0] == 1.0
    with pytest.raises(ValueError):
        field.amplitudes[0, 0] = 5.0


def test_field_validation():
    grid = make_grid(4, 4, 1.0, 1.0)
    with pytest.raises(ValueError):
        ScalarField(grid=grid, amplitudes=np.ones((3, 4)), wavelength=1.0)
    with pytest.raises(ValueError):
        ScalarField(grid=grid, amplitudes=np.full(grid.shape, np.nan), wavelength=1.0)
    with pytest.raises(ValueError):
        ScalarField(grid=grid, amplitudes=np.ones(grid.shape), wavelength=-1.0)
    with pytest.raises(ValueError):
        IntensityImage(grid=grid, values=np.full(grid.shape, -1.0))


def test_gaussian_envelope_profile():
    grid = make_grid(64, 64, 64.0, 64.0)
    env = gaussian_envelope(grid, w0=8.0)
    vals = np.abs(env.amplitudes)
    assert vals[32, 32] == 1.0
    # sample at x = w0 sits exactly 8 pitches from center: amplitude 1/e
    assert vals[40, 32] == pytest.approx(np.exp(-1.0), rel=1e-12)
    with pytest.raises(ValueError):
        gaussian_envelope(grid, w0=0.0)


def test_intensity_sums_polarization_components():
    grid = make_grid(4, 4, 1.0, 1.0)
    field = JonesField(
        grid=grid,
        r_component=np.full(grid.shape, 3.0j),
        l_component=np.full(grid.shape, 4.0),
        wavelength=1.0,
    )
    assert np.allclose(intensity(field).values, 25.0)


def test_analyzer_states_are_unit_norm_and_paired_orthogonal():
    for name, (r, l) in ANALYZERS.items():
        assert abs(r) ** 2 + abs(l) ** 2 == pytest.approx(1.0, abs=1e-15), name
    for a, b in (("R", "L"), ("H", "V"), ("D", "A")):
        ra, la = ANALYZERS[a]
        rb, lb = ANALYZERS[b]
        assert np.conj(ra) * rb + np.conj(la) * lb == pytest.approx(0.0, abs=1e-15)


@given(seed=st.integers(0, 2**32 - 1), pair=st.sampled_from([("R", "L"), ("H", "V"), ("D", "A")]))
@settings(max_examples=25, deadline=None)
def test_orthogonal_projections_are_complete(seed, pair):
    # |<a|psi>|^2 + |<a_perp|psi>|^2 must reproduce the total intensity
    rng = np.random.default_rng(seed)
    grid = make_grid(8, 8, 1.0, 1.0)
    field = JonesField(
        grid=grid,
        r_component=rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape),
        l_component=rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape),
        wavelength=1.0,
    )
    total = intensity(field).values
    split = intensity(project(field, pair[0])).values + intensity(project(field, pair[1])).values
    assert np.max(np.abs(split - total)) < 1e-12 * np.max(total)


def test_project_accepts_custom_unit_vector_only():
    grid = make_grid(4, 4, 1.0, 1.0)
    field = JonesField(
        grid=grid,
        r_component=np.ones(grid.shape),
        l_component=np.zeros(grid.shape),
        wavelength=1.0,
    )
    out = project(field, (1.0, 0.0))
    assert np.allclose(out.amplitudes, 1.0)
    with pytest.raises(ValueError):
        project(field, (1.0, 1.0))  # norm sqrt(2)
    with pytest.raises(ValueError):
        project(field, "Q")


def test_strip_phase_keeps_magnitude_only(rng):
    grid = make_grid(8, 8, 1.0, 1.0)
    amp = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    field = ScalarField(grid=grid, amplitudes=amp, wavelength=1.0)
    stripped = strip_phase(field)
    assert np.allclose(stripped.amplitudes.imag, 0.0)
    assert np.allclose(np.abs(stripped.amplitudes), np.abs(amp))


def test_resize_canvas_pad_then_crop_is_identity(rng):
    grid = make_grid(16, 12, 0.16, 0.12)
    amp = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    field = ScalarField(grid=grid, amplitudes=amp, wavelength=1.0)
    padded = resize_canvas(field, 32, 24)
    assert padded.grid.dx == grid.dx and padded.grid.dy == grid.dy
    assert total_power(padded) == pytest.approx(total_power(field), rel=1e-14)
    back = resize_canvas(padded, 16, 12)
    assert np.array_equal(back.amplitudes, field.amplitudes)
    with pytest.raises(ValueError):
        resize_canvas(field, 1, 12)


def test_total_power_scales_with_pitch():
    small = make_grid(8, 8, 1.0, 1.0)
    large = make_grid(8, 8, 2.0, 2.0)
    ones = np.ones((8, 8))
    p_small = total_power(ScalarField(grid=small, amplitudes=ones, wavelength=1.0))
    p_large = total_power(ScalarField(grid=large, amplitudes=ones, wavelength=1.0))
    assert p_large == pytest.approx(4.0 * p_small)
