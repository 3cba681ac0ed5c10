"""Sampled transverse planes and the elementary field operations on them.

Coordinate convention: sample ``(i, j)`` of an ``(nx, ny)`` grid sits at

    x = (i - nx/2) * dx + cx,    y = (j - ny/2) * dy + cy,

so even sample counts place the grid center exactly on the sample at index
``(nx//2, ny//2)``.  Field arrays are indexed ``[ix, iy]``.

All container types are immutable value objects: their arrays are copied on
construction and marked read-only, and every operation returns a new object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid2D",
    "ScalarField",
    "JonesField",
    "IntensityImage",
    "make_grid",
    "gaussian_envelope",
    "intensity",
    "project",
    "strip_phase",
    "resize_canvas",
    "total_power",
    "ANALYZERS",
]


def _readonly(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Uniformly sampled rectangle in the transverse plane.

    Parameters
    ----------
    nx, ny : int
        Sample counts along x and y; at least 2 each.
    dx, dy : float
        Sample pitches in meters; strictly positive.
    center : (float, float)
        Physical coordinate of the grid center in meters.
    """

    nx: int
    ny: int
    dx: float
    dy: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid needs at least 2 samples per axis, got {self.nx}x{self.ny}")
        if not (self.dx > 0.0 and self.dy > 0.0):
            raise ValueError(f"grid pitch must be positive, got dx={self.dx}, dy={self.dy}")
        cx, cy = self.center
        if not (np.isfinite(cx) and np.isfinite(cy)):
            raise ValueError(f"grid center must be finite, got {self.center}")
        object.__setattr__(self, "center", (float(cx), float(cy)))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def extent_x(self) -> float:
        return self.nx * self.dx

    @property
    def extent_y(self) -> float:
        return self.ny * self.dy

    def x_coords(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx / 2) * self.dx + self.center[0]

    def y_coords(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny / 2) * self.dy + self.center[1]

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays X[ix, 0], Y[0, iy]."""
        return self.x_coords()[:, None], self.y_coords()[None, :]

    def index_to_coord(self, i: int, j: int) -> tuple[float, float]:
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"index ({i}, {j}) outside grid {self.nx}x{self.ny}")
        return (
            (i - self.nx / 2) * self.dx + self.center[0],
            (j - self.ny / 2) * self.dy + self.center[1],
        )

    def coord_to_index(self, x: float, y: float) -> tuple[int, int]:
        """Nearest sample index for a physical coordinate inside the grid."""
        i = int(round((x - self.center[0]) / self.dx + self.nx / 2))
        j = int(round((y - self.center[1]) / self.dy + self.ny / 2))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"coordinate ({x}, {y}) maps outside the grid")
        return i, j

    def same_geometry(self, other: "Grid2D", rtol: float = 1e-12) -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and np.isclose(self.dx, other.dx, rtol=rtol, atol=0.0)
            and np.isclose(self.dy, other.dy, rtol=rtol, atol=0.0)
            and np.allclose(self.center, other.center, rtol=rtol, atol=1e-15)
        )


def _check_grid_array(grid: Grid2D, values: np.ndarray, what: str) -> None:
    if values.shape != grid.shape:
        raise ValueError(f"{what} shape {values.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} contains non-finite samples")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Complex scalar amplitude sampled on a grid, with its vacuum wavelength."""

    grid: Grid2D
    amplitudes: np.ndarray
    wavelength: float

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _readonly(self.amplitudes, np.complex128))
        _check_grid_array(self.grid, self.amplitudes, "amplitudes")
        if not (self.wavelength > 0.0 and np.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")


@dataclass(frozen=True, eq=False)
class JonesField:
    """Two-component field in the circular polarization basis (R, L)."""

    grid: Grid2D
    r_component: np.ndarray
    l_component: np.ndarray
    wavelength: float

    def __post_init__(self):
        object.__setattr__(self, "r_component", _readonly(self.r_component, np.complex128))
        object.__setattr__(self, "l_component", _readonly(self.l_component, np.complex128))
        _check_grid_array(self.grid, self.r_component, "r_component")
        _check_grid_array(self.grid, self.l_component, "l_component")
        if not (self.wavelength > 0.0 and np.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")


@dataclass(frozen=True, eq=False)
class IntensityImage:
    """Non-negative intensity samples in arbitrary linear units."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values, np.float64))
        _check_grid_array(self.grid, self.values, "values")
        if np.any(self.values < 0.0):
            raise ValueError("intensity values must be non-negative")


def make_grid(nx: int, ny: int, extent_x: float, extent_y: float) -> Grid2D:
    """Grid of ``nx`` x ``ny`` samples covering the given physical extents, centered on the origin."""
    if not (extent_x > 0.0 and extent_y > 0.0):
        raise ValueError(f"extents must be positive, got {extent_x}, {extent_y}")
    return Grid2D(nx=nx, ny=ny, dx=extent_x / nx, dy=extent_y / ny, center=(0.0, 0.0))


def gaussian_envelope(grid: Grid2D, w0: float, wavelength: float = 1.0) -> ScalarField:
    """Unit-peak Gaussian amplitude exp(-r^2 / w0^2) centered on the grid origin.

    ``w0`` is the 1/e amplitude radius.  The wavelength tag defaults to a
    placeholder of 1.0 m; pass the physical value when the envelope will be
    propagated.
    """
    if not (w0 > 0.0):
        raise ValueError(f"waist must be positive, got {w0}")
    x, y = grid.meshgrid()
    amp = np.exp(-(x**2 + y**2) / w0**2)
    return ScalarField(grid=grid, amplitudes=amp, wavelength=wavelength)


def intensity(field: ScalarField | JonesField) -> IntensityImage:
    """Pointwise |E|^2, summed over polarization components for a Jones field."""
    if isinstance(field, ScalarField):
        values = np.abs(field.amplitudes) ** 2
    elif isinstance(field, JonesField):
        values = np.abs(field.r_component) ** 2 + np.abs(field.l_component) ** 2
    else:
        raise ValueError(f"unsupported field type {type(field).__name__}")
    return IntensityImage(grid=field.grid, values=values)


ANALYZERS = {
    "R": (1.0 + 0.0j, 0.0 + 0.0j),
    "L": (0.0 + 0.0j, 1.0 + 0.0j),
    "H": (1.0 / np.sqrt(2.0) + 0.0j, 1.0 / np.sqrt(2.0) + 0.0j),
    "V": (1.0 / np.sqrt(2.0) + 0.0j, -1.0 / np.sqrt(2.0) + 0.0j),
    "D": (1.0 / np.sqrt(2.0) + 0.0j, 1.0j / np.sqrt(2.0)),
    "A": (1.0 / np.sqrt(2.0) + 0.0j, -1.0j / np.sqrt(2.0)),
}


def _analyzer_vector(analyzer) -> np.ndarray:
    if isinstance(analyzer, str):
        try:
            vec = np.array(ANALYZERS[analyzer.upper()], dtype=np.complex128)
        except KeyError:
            raise ValueError(f"unknown analyzer {analyzer!r}; known: {sorted(ANALYZERS)}") from None
        return vec
    vec = np.asarray(analyzer, dtype=np.complex128)
    if vec.shape != (2,):
        raise ValueError(f"analyzer must be a 2-vector, got shape {vec.shape}")
    norm = np.sqrt(np.abs(vec[0]) ** 2 + np.abs(vec[1]) ** 2)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"analyzer vector must be unit norm to 1e-12, got norm {norm!r}")
    return vec


def project(field: JonesField, analyzer) -> ScalarField:
    """Scalar amplitude passed by a polarization analyzer.

    ``analyzer`` is either a named state ("R", "L", "H", "V", "D", "A") or a
    unit-norm Jones 2-vector in the circular basis; the projected amplitude is
    the inner product <analyzer|field> per sample.
    """
    vec = _analyzer_vector(analyzer)
    amp = np.conj(vec[0]) * field.r_component + np.conj(vec[1]) * field.l_component
    return ScalarField(grid=field.grid, amplitudes=amp, wavelength=field.wavelength)


def strip_phase(field: ScalarField) -> ScalarField:
    """Replace each sample with its magnitude, discarding all phase structure."""
    return ScalarField(
        grid=field.grid,
        amplitudes=np.abs(field.amplitudes).astype(np.complex128),
        wavelength=field.wavelength,
    )


def _embed_centered(values: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """Pad or crop a 2D array to (nx, ny) about its center, zero-filling new samples."""
    out = np.zeros((nx, ny), dtype=values.dtype)
    ox, oy = values.shape
    # source/destination windows for each axis
    if nx >= ox:
        dst_x = slice((nx - ox) // 2, (nx - ox) // 2 + ox)
        src_x = slice(0, ox)
    else:
        dst_x = slice(0, nx)
        src_x = slice((ox - nx) // 2, (ox - nx) // 2 + nx)
    if ny >= oy:
        dst_y = slice((ny - oy) // 2, (ny - oy) // 2 + oy)
        src_y = slice(0, oy)
    else:
        dst_y = slice(0, ny)
        src_y = slice((oy - ny) // 2, (oy - ny) // 2 + ny)
    out[dst_x, dst_y] = values[src_x, src_y]
    return out


def resize_canvas(field: ScalarField, nx: int, ny: int) -> ScalarField:
    """Center-pad (with zeros) or center-crop a field to a new sample count.

    The pitch is unchanged.  For even-to-even resizes the retained samples keep
    their physical coordinates, so padding then cropping back is the identity.
    """
    if nx < 2 or ny < 2:
        raise ValueError(f"resized canvas needs at least 2 samples per axis, got {nx}x{ny}")
    grid = Grid2D(nx=nx, ny=ny, dx=field.grid.dx, dy=field.grid.dy, center=field.grid.center)
    return ScalarField(
        grid=grid,
        amplitudes=_embed_centered(np.asarray(field.amplitudes), nx, ny),
        wavelength=field.wavelength,
    )


def total_power(field: ScalarField | JonesField) -> float:
    """Integrated intensity, sum(|E|^2) * dx * dy."""
    img = intensity(field)
    return float(np.sum(img.values) * field.grid.dx * field.grid.dy)
