"""Spin-orbit state preparation with crossed polarization-gradient prism pairs.

A pair of birefringent prism wedges applies a position-dependent SU(2) rotation
exp(i (pi/a) (u - u0) sigma_u) about one transverse axis.  Alternating x- and
y-gradient pairs N times on a circularly polarized input carves a square
lattice of optical vortices into the orthogonal circular component.  In the
N -> infinity limit the sequence converges to the ideal spin-orbit rotation
exp(i (pi/d) (x sigma_x + y sigma_y)) with d = a / N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateLoopError
from .grid_field import Grid2D, IntensityImage, JonesField, ScalarField

__all__ = [
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "LovParams",
    "MaterialParams",
    "SpinOrbitParams",
    "pauli_rotation",
    "apply_lov_sequence",
    "lattice_intensity_closed_form",
    "lattice_spacing_from_materials",
    "spin_orbit_reference",
    "trotter_error",
    "phase_winding",
]

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)

_PAULI = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}


@dataclass(frozen=True)
class LovParams:
    """Geometry of the alternating prism-pair sequence.

    ``spacing`` is the polarization-gradient period a of a single pair (equal to
    the resulting vortex lattice spacing), ``n_pairs`` the number of x-y pair
    applications, and ``origin`` the point where both gradients vanish.
    """

    spacing: float
    n_pairs: int
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.spacing > 0.0 and np.isfinite(self.spacing)):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.n_pairs < 0:
            raise ValueError(f"n_pairs must be >= 0, got {self.n_pairs}")
        if len(self.origin) != 2 or not all(np.isfinite(v) for v in self.origin):
            raise ValueError(f"origin must be a finite (x, y) pair, got {self.origin!r}")


@dataclass(frozen=True)
class MaterialParams:
    """Wedge material and geometry determining the gradient period."""

    birefringence: float
    incline: float
    wavelength: float

    def __post_init__(self):
        if self.birefringence == 0.0 or not np.isfinite(self.birefringence):
            raise ValueError(f"birefringence must be nonzero, got {self.birefringence}")
        if not (0.0 < self.incline < np.pi / 2):
            raise ValueError(f"incline must lie in (0, pi/2), got {self.incline}")
        if not (self.wavelength > 0.0):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")


@dataclass(frozen=True)
class SpinOrbitParams:
    """Ideal spin-orbit coupled reference state: OAM charge and rotation distance."""

    oam: int
    rotation_distance: float

    def __post_init__(self):
        if self.oam != int(self.oam):
            raise ValueError(f"oam must be an integer, got {self.oam}")
        if not (self.rotation_distance > 0.0):
            raise ValueError(f"rotation_distance must be positive, got {self.rotation_distance}")


def pauli_rotation(axis: str, angle: float) -> np.ndarray:
    """SU(2) element cos(angle) I + i sin(angle) sigma_axis for axis in {x, y, z}."""
    try:
        sigma = _PAULI[axis]
    except KeyError:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}") from None
    return np.cos(angle) * np.eye(2, dtype=np.complex128) + 1.0j * np.sin(angle) * sigma


def apply_lov_sequence(field: JonesField, params: LovParams) -> JonesField:
    """Apply N alternating gradient pairs (U_x U_y)^N to a Jones field.

    Each pair applies the y-gradient rotation first, then the x-gradient one:
    U_u = exp(i (pi/a)(u - u0) sigma_u).  ``n_pairs`` = 0 is the identity.  The
    per-sample matrices are unitary, so total power is conserved exactly.
    """
    if params.n_pairs == 0:
        return field
    x, y = field.grid.meshgrid()
    tx = np.pi * (x - params.origin[0]) / params.spacing
    ty = np.pi * (y - params.origin[1]) / params.spacing
    cx, sx = np.cos(tx), np.sin(tx)
    cy, sy = np.cos(ty), np.sin(ty)
    r = np.array(field.r_component)
    l = np.array(field.l_component)
    for _ in range(params.n_pairs):
        # U_y = cos I + i sin sigma_y acts as a real rotation in the (R, L) plane
        r, l = cy * r + sy * l, cy * l - sy * r
        # U_x = cos I + i sin sigma_x swaps components with a quarter phase
        r, l = cx * r + 1.0j * sx * l, cx * l + 1.0j * sx * r
    return JonesField(
        grid=field.grid, r_component=r, l_component=l, wavelength=field.wavelength
    )


def lattice_intensity_closed_form(
    grid: Grid2D,
    spacing: float,
    envelope: ScalarField,
    origin: tuple[float, float] = (0.0, 0.0),
) -> IntensityImage:
    """Analytic intensity of the orthogonal circular component after two pairs.

    For n_pairs = 2 the projected vortex-lattice intensity has the closed form

        |alpha|^2 cos^2(pi x/a) cos^2(pi y/a)
                * (2 - cos(2 pi (x+y)/a) - cos(2 pi (x-y)/a))

    with x, y measured from the gradient origin and alpha the envelope.
    """
    if not (spacing > 0.0):
        raise ValueError(f"spacing must be positive, got {spacing}")
    if not envelope.grid.same_geometry(grid):
        raise ValueError("envelope grid does not match the requested grid")
    x, y = grid.meshgrid()
    x = x - origin[0]
    y = y - origin[1]
    a = spacing
    values = (
        np.abs(envelope.amplitudes) ** 2
        * np.cos(np.pi * x / a) ** 2
        * np.cos(np.pi * y / a) ** 2
        * (2.0 - np.cos(2.0 * np.pi * (x + y) / a) - np.cos(2.0 * np.pi * (x - y) / a))
    )
    # clip the tiny negative excursions left by rounding in the product above
    return IntensityImage(grid=grid, values=np.maximum(values, 0.0))


def lattice_spacing_from_materials(material: MaterialParams) -> float:
    """Gradient period a = wavelength / (birefringence * tan(incline))."""
    return material.wavelength / (material.birefringence * np.tan(material.incline))


def spin_orbit_reference(
    grid: Grid2D, params: SpinOrbitParams, envelope: ScalarField
) -> JonesField:
    """Ideal spin-orbit coupled state the pair sequence converges to.

    The two circular components are weighted cos(pi r/d) and
    i exp(i l phi) sin(pi r/d), times the envelope; at r = 0 the orbital
    component vanishes identically.
    """
    if not envelope.grid.same_geometry(grid):
        raise ValueError("envelope grid does not match the requested grid")
    x, y = grid.meshgrid()
    r = np.hypot(x, y)
    phi = np.arctan2(y, x)
    arg = np.pi * r / params.rotation_distance
    alpha = envelope.amplitudes
    return JonesField(
        grid=grid,
        r_component=alpha * np.cos(arg),
        l_component=alpha * 1.0j * np.exp(1.0j * params.oam * phi) * np.sin(arg),
        wavelength=envelope.wavelength,
    )


def trotter_error(
    grid: Grid2D,
    rotation_distance: float,
    n_pairs: int,
    envelope: ScalarField,
    max_radius: float | None = None,
) -> float:
    """Worst-case deviation of the pair sequence from the ideal rotation.

    Applies (U_x U_y)^N with gradient period a = N * d to a uniform R input and
    compares per sample, over r <= max_radius (default: r <= d), against the
    closed-form ideal state with l = +1.  Both states are weighted by the
    envelope; the result is the maximum Euclidean norm of the difference.
    """
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be >= 1, got {n_pairs}")
    if not (rotation_distance > 0.0):
        raise ValueError(f"rotation_distance must be positive, got {rotation_distance}")
    if max_radius is None:
        max_radius = rotation_distance
    base = JonesField(
        grid=grid,
        r_component=np.ones(grid.shape),
        l_component=np.zeros(grid.shape),
        wavelength=envelope.wavelength,
    )
    approx = apply_lov_sequence(
        base, LovParams(spacing=n_pairs * rotation_distance, n_pairs=n_pairs)
    )
    exact = spin_orbit_reference(
        grid,
        SpinOrbitParams(oam=1, rotation_distance=rotation_distance),
        envelope=ScalarField(
            grid=grid, amplitudes=np.ones(grid.shape), wavelength=envelope.wavelength
        ),
    )
    alpha = np.abs(envelope.amplitudes)
    dr = alpha * (approx.r_component - exact.r_component)
    dl = alpha * (approx.l_component - exact.l_component)
    err = np.sqrt(np.abs(dr) ** 2 + np.abs(dl) ** 2)
    x, y = grid.meshgrid()
    mask = np.hypot(x, y) <= max_radius
    if not np.any(mask):
        raise ValueError("no grid samples inside max_radius")
    return float(np.max(err[mask]))


def _bilinear_complex(values: np.ndarray, grid: Grid2D, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of complex samples at physical coordinates."""
    fi = (xs - grid.center[0]) / grid.dx + grid.nx / 2
    fj = (ys - grid.center[1]) / grid.dy + grid.ny / 2
    if np.any(fi < 0) or np.any(fi > grid.nx - 1) or np.any(fj < 0) or np.any(fj > grid.ny - 1):
        raise ValueError("interpolation point outside the grid")
    i0 = np.clip(np.floor(fi).astype(int), 0, grid.nx - 2)
    j0 = np.clip(np.floor(fj).astype(int), 0, grid.ny - 2)
    wx = fi - i0
    wy = fj - j0
    return (
        values[i0, j0] * (1 - wx) * (1 - wy)
        + values[i0 + 1, j0] * wx * (1 - wy)
        + values[i0, j0 + 1] * (1 - wx) * wy
        + values[i0 + 1, j0 + 1] * wx * wy
    )


def phase_winding(
    field: ScalarField,
    center: tuple[float, float],
    radius: float,
    n_points: int = 256,
) -> int:
    """Topological charge of the field phase around a closed circular loop.

    Samples the field on a circle by bilinear interpolation, accumulates the
    per-step phase increments wrapped into (-pi, pi], and returns the nearest
    integer to total / (2 pi).  Loop points whose amplitude falls below
    1e-9 of the field maximum make the winding ill-defined.
    """
    min_pitch = min(field.grid.dx, field.grid.dy)
    if radius < 3.0 * min_pitch:
        raise ValueError(f"loop radius {radius} must span at least 3 sample pitches")
    n_points = max(64, int(n_points))
    theta = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    xs = center[0] + radius * np.cos(theta)
    ys = center[1] + radius * np.sin(theta)
    samples = _bilinear_complex(np.asarray(field.amplitudes), field.grid, xs, ys)
    floor = 1e-9 * np.max(np.abs(field.amplitudes))
    if np.any(np.abs(samples) <= floor):
        raise DegenerateLoopError(
            f"loop at {center} r={radius} passes through near-zero amplitude"
        )
    phases = np.angle(samples)
    steps = np.diff(np.concatenate([phases, phases[:1]]))
    steps = np.where(steps <= -np.pi, steps + 2.0 * np.pi, steps)
    steps = np.where(steps > np.pi, steps - 2.0 * np.pi, steps)
    return int(round(float(np.sum(steps)) / (2.0 * np.pi)))
