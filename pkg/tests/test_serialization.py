"""PGM and raw-field file round-trips, sidecars, and atomic writes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oamtalbot.exceptions import CalibrationError
from oamtalbot.grid_field import Grid2D, IntensityImage, JonesField, ScalarField, make_grid
from oamtalbot.pgmio import (
    PGM_MAXVAL,
    atomic_write_bytes,
    read_field_raw,
    read_pgm,
    sidecar_path,
    write_field_raw,
    write_pgm,
)


def _image(values, dx=1e-5, dy=None):
    values = np.asarray(values, dtype=float)
    nx, ny = values.shape
    grid = Grid2D(nx=nx, ny=ny, dx=dx, dy=dy if dy is not None else dx)
    return IntensityImage(grid=grid, values=values)


def test_pgm_roundtrip_within_half_quantization_step(tmp_path, rng):
    img = _image(rng.random((16, 12)) * 3.7)
    path = tmp_path / "frame.pgm"
    write_pgm(img, path, wavelength=810.8e-9, z=0.25)
    back, meta = read_pgm(path)
    scale = meta["scale"]
    assert scale == pytest.approx(np.max(img.values) / PGM_MAXVAL)
    assert np.max(np.abs(back.values - img.values)) <= 0.5 * scale * (1 + 1e-12)
    assert back.grid.dx == pytest.approx(img.grid.dx)
    assert meta["wavelength_m"] == pytest.approx(810.8e-9)
    assert meta["z_m"] == pytest.approx(0.25)


def test_pgm_maximum_maps_to_full_scale(tmp_path):
    img = _image([[0.0, 1.0], [2.0, 4.0]])
    path = tmp_path / "f.pgm"
    write_pgm(img, path)
    payload = path.read_bytes()
    raster = np.frombuffer(payload[payload.index(b"65535\n") + 6 :], dtype=">u2")
    assert raster.max() == PGM_MAXVAL


def test_pgm_anisotropic_pitch_roundtrips(tmp_path):
    img = _image(np.arange(12.0).reshape(4, 3), dx=1e-5, dy=2e-5)
    path = tmp_path / "aniso.pgm"
    write_pgm(img, path)
    back, meta = read_pgm(path)
    assert meta["pitch_y_m"] == pytest.approx(2e-5)
    assert back.grid.dy == pytest.approx(2e-5)


def test_pgm_all_zero_image(tmp_path):
    img = _image(np.zeros((4, 4)))
    path = tmp_path / "zero.pgm"
    write_pgm(img, path)
    back, meta = read_pgm(path)
    assert meta["scale"] == 0.0
    assert np.all(back.values == 0.0)


def test_pgm_missing_sidecar(tmp_path):
    img = _image(np.ones((4, 4)))
    path = tmp_path / "f.pgm"
    write_pgm(img, path)
    sidecar_path(path).unlink()
    with pytest.raises(CalibrationError):
        read_pgm(path)
    back, meta = read_pgm(path, require_sidecar=False)
    assert meta == {}
    assert back.grid.dx == 1.0  # pixel units


def test_pgm_header_comments_are_skipped(tmp_path):
    raster = np.arange(6, dtype=">u2").tobytes()
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n3 2\n65535\n" + raster)
    back, _ = read_pgm(path, require_sidecar=False)
    assert back.grid.shape == (3, 2)


@pytest.mark.parametrize(
    "payload",
    [
        b"P2\n2 2\n65535\n" + bytes(8),  # wrong magic
        b"P5\n2 2\n255\n" + bytes(8),  # wrong maxval
        b"P5\n2 2\n65535\n" + bytes(3),  # truncated raster
        b"P5\n2 2",  # truncated header
        b"P5\nx 2\n65535\n" + bytes(8),  # junk in header
    ],
)
def test_pgm_malformed_input_raises(tmp_path, payload):
    path = tmp_path / "bad.pgm"
    path.write_bytes(payload)
    with pytest.raises(ValueError):
        read_pgm(path, require_sidecar=False)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_pgm_roundtrip_property(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    img = _image(rng.random((6, 5)) * rng.uniform(0.1, 100.0))
    tmp = tmp_path_factory.mktemp("pgm")
    path = tmp / "r.pgm"
    write_pgm(img, path)
    back, meta = read_pgm(path)
    assert np.max(np.abs(back.values - img.values)) <= 0.5 * meta["scale"] * (1 + 1e-12)


def test_raw_scalar_roundtrip_is_exact(tmp_path, rng):
    grid = make_grid(8, 6, 8e-5, 6e-5)
    amp = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    field = ScalarField(grid=grid, amplitudes=amp, wavelength=633e-9)
    path = tmp_path / "s.raw"
    write_field_raw(field, path, z=1.5)
    back = read_field_raw(path)
    assert isinstance(back, ScalarField)
    assert np.array_equal(back.amplitudes, field.amplitudes)
    assert back.wavelength == pytest.approx(633e-9)
    assert back.grid.shape == grid.shape


def test_raw_jones_roundtrip_is_exact(tmp_path, rng):
    grid = make_grid(5, 7, 5e-5, 7e-5)
    field = JonesField(
        grid=grid,
        r_component=rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape),
        l_component=rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape),
        wavelength=810.8e-9,
    )
    path = tmp_path / "j.raw"
    write_field_raw(field, path)
    back = read_field_raw(path)
    assert isinstance(back, JonesField)
    assert np.array_equal(back.r_component, field.r_component)
    assert np.array_equal(back.l_component, field.l_component)
    assert back.grid.dy == pytest.approx(1e-5)


def test_raw_requires_sidecar(tmp_path):
    grid = make_grid(4, 4, 1.0, 1.0)
    field = ScalarField(grid=grid, amplitudes=np.ones(grid.shape), wavelength=1.0)
    path = tmp_path / "s.raw"
    write_field_raw(field, path)
    sidecar_path(path).unlink()
    with pytest.raises(CalibrationError):
        read_field_raw(path)


def test_raw_size_mismatch_raises(tmp_path):
    grid = make_grid(4, 4, 1.0, 1.0)
    field = ScalarField(grid=grid, amplitudes=np.ones(grid.shape), wavelength=1.0)
    path = tmp_path / "s.raw"
    write_field_raw(field, path)
    path.write_bytes(path.read_bytes()[:-8])  # drop one float
    with pytest.raises(ValueError):
        read_field_raw(path)


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    path = tmp_path / "out.bin"
    atomic_write_bytes(path, b"first")
    atomic_write_bytes(path, b"second")
    assert path.read_bytes() == b"second"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["out.bin"]
