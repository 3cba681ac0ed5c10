"""Shared builders for the test suite."""

import numpy as np
import pytest

from oamtalbot.grid_field import JonesField, gaussian_envelope, make_grid, project
from oamtalbot.spinorbit import LovParams, apply_lov_sequence

WAVELENGTH = 810.8e-9


def lov_lattice(nx, a_px, a=1.0e-3, w0=None, analyzer="L", n_pairs=2):
    """Projected N-pair lattice on an nx^2 grid with a_px samples per period.

    ``w0`` = None means a flat (constant) envelope.
    """
    dx = a / a_px
    grid = make_grid(nx, nx, nx * dx, nx * dx)
    if w0 is None:
        amp = np.ones(grid.shape, dtype=complex)
    else:
        amp = gaussian_envelope(grid, w0, wavelength=WAVELENGTH).amplitudes
    base = JonesField(
        grid=grid,
        r_component=amp,
        l_component=np.zeros(grid.shape),
        wavelength=WAVELENGTH,
    )
    state = apply_lov_sequence(base, LovParams(spacing=a, n_pairs=n_pairs))
    return project(state, analyzer)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
