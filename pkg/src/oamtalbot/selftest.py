"""Desk-scale invariant suites behind the ``selftest`` command.

Each suite exercises one module contract on grids of at most 512 samples per
axis and reports a pass/fail with a one-line numeric detail.  The full set
runs in well under a minute; it is the post-install smoke check and the
negative control for the propagation test hook.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from . import propagation
from .analysis import (
    background_subtract,
    border_mask,
    estimate_lattice_spacing,
    estimate_shift,
    gaussian_filter,
    snr,
    threshold_mask,
)
from .grid_field import (
    IntensityImage,
    JonesField,
    ScalarField,
    gaussian_envelope,
    intensity,
    make_grid,
    project,
    total_power,
)
from .pgmio import read_field_raw, read_pgm, write_field_raw, write_pgm
from .propagation import PropagationPlan, propagate, talbot_length
from .spinorbit import (
    LovParams,
    apply_lov_sequence,
    lattice_intensity_closed_form,
    phase_winding,
    trotter_error,
)

__all__ = ["run_selftests", "SUITE_NAMES"]

_WAVELENGTH = 810.8e-9


def _flat_jones(grid, wavelength=_WAVELENGTH) -> JonesField:
    return JonesField(
        grid=grid,
        r_component=np.ones(grid.shape, dtype=np.complex128),
        l_component=np.zeros(grid.shape, dtype=np.complex128),
        wavelength=wavelength,
    )


def _lattice_field(nx: int, spacing_px: int, w0_spacings: float | None) -> ScalarField:
    spacing = 1.0e-3
    dx = spacing / spacing_px
    grid = make_grid(nx, nx, nx * dx, nx * dx)
    if w0_spacings is None:
        base = _flat_jones(grid)
    else:
        env = gaussian_envelope(grid, w0_spacings * spacing, wavelength=_WAVELENGTH)
        base = JonesField(
            grid=grid,
            r_component=env.amplitudes,
            l_component=np.zeros(grid.shape),
            wavelength=_WAVELENGTH,
        )
    return project(apply_lov_sequence(base, LovParams(spacing=spacing, n_pairs=2)), "L")


def _suite_closed_form(rng, workers):
    field = _lattice_field(256, 16, None)
    spacing = 1.0e-3
    grid = field.grid
    flat = ScalarField(grid=grid, amplitudes=np.ones(grid.shape, complex), wavelength=_WAVELENGTH)
    predicted = lattice_intensity_closed_form(grid, spacing, flat)
    measured = intensity(field)
    dev = float(np.max(np.abs(measured.values - predicted.values)) / np.max(predicted.values))
    return dev < 1e-12, f"max rel dev {dev:.2e} (bound 1e-12)"


def _suite_unitarity(rng, workers):
    grid = make_grid(128, 128, 4.0e-3, 4.0e-3)
    env = gaussian_envelope(grid, 0.5e-3, wavelength=_WAVELENGTH)
    plan = PropagationPlan(grid=grid, wavelength=_WAVELENGTH, pad_factor=2, band_limit=False, workers=workers)
    p0 = total_power(env)
    p1 = total_power(propagate(env, 0.2, plan))
    dev = abs(p1 / p0 - 1.0)
    return dev < 1e-9, f"power ratio off by {dev:.2e} (bound 1e-9)"


def _suite_revival(rng, workers):
    field = _lattice_field(128, 16, None)
    plan = PropagationPlan(
        grid=field.grid, wavelength=_WAVELENGTH, pad_factor=1, band_limit=False, workers=workers
    )
    zt = talbot_length(1.0e-3, _WAVELENGTH)
    i0 = intensity(field).values
    i1 = intensity(propagate(field, zt, plan)).values
    dev = float(np.max(np.abs(i1 - i0)) / np.max(i0))
    return dev < 1e-9, f"revival max rel dev {dev:.2e} (bound 1e-9)"


def _suite_semigroup(rng, workers):
    grid = make_grid(128, 128, 4.0e-3, 4.0e-3)
    env = gaussian_envelope(grid, 0.4e-3, wavelength=_WAVELENGTH)
    plan = PropagationPlan(grid=grid, wavelength=_WAVELENGTH, pad_factor=2, band_limit=False, workers=workers)
    once = propagate(env, 0.3, plan)
    twice = propagate(propagate(env, 0.18, plan), 0.12, plan)
    dev = float(np.max(np.abs(once.amplitudes - twice.amplitudes)) / np.max(np.abs(once.amplitudes)))
    return dev < 1e-8, f"split-step max rel dev {dev:.2e} (bound 1e-8)"


def _suite_winding(rng, workers):
    field = _lattice_field(256, 32, 3.0)
    spacing = 1.0e-3
    windings = []
    for mx in (-1, 0, 1):
        for my in (-1, 0, 1):
            windings.append(phase_winding(field, (mx * spacing, my * spacing), 0.25 * spacing))
    ok = all(w == windings[0] and abs(w) == 1 for w in windings)
    return ok, f"windings {sorted(set(windings))} at 9 ring centers"


def _suite_roundtrip(rng, workers):
    field = _lattice_field(64, 16, 2.0)
    img = intensity(field)
    with tempfile.TemporaryDirectory() as tmp:
        pgm = Path(tmp) / "frame.pgm"
        write_pgm(img, pgm, wavelength=field.wavelength, z=0.0)
        back, meta = read_pgm(pgm)
        scale = float(meta["scale"])
        pgm_dev = float(np.max(np.abs(back.values - img.values)))
        raw = Path(tmp) / "state.raw"
        write_field_raw(field, raw)
        exact = read_field_raw(raw)
        raw_dev = float(np.max(np.abs(exact.amplitudes - field.amplitudes)))
    ok = pgm_dev <= 0.5 * scale + 1e-300 and raw_dev == 0.0
    return ok, f"pgm quantization {pgm_dev:.2e} (half-step {0.5 * scale:.2e}), raw dev {raw_dev:.1e}"


def _suite_estimators(rng, workers):
    spacing = 1.0e-3
    field = _lattice_field(256, 16, 4.0)
    img = intensity(field)
    est = estimate_lattice_spacing(img)
    spacing_rel = abs(est.spacing - spacing) / spacing

    rolled = IntensityImage(grid=img.grid, values=np.roll(img.values, (5, -3), axis=(0, 1)))
    sx, sy = estimate_shift(img, rolled)
    shift_err = max(abs(sx - 5 * img.grid.dx), abs(sy + 3 * img.grid.dy)) / img.grid.dx

    n = 128
    g = make_grid(n, n, n * 1e-5, n * 1e-5)
    yy, xx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    disk = np.hypot(xx - n / 2, yy - n / 2) < 20
    clean = np.where(disk, 60.0, 10.0)
    frame = np.clip(clean + rng.normal(0.0, 5.0, clean.shape), 0.0, None)
    noisy = IntensityImage(grid=g, values=frame)
    s_raw = snr(noisy, threshold_mask(gaussian_filter(noisy, sigma=1.0)), border_mask(noisy))
    flat_bg = IntensityImage(grid=g, values=np.full((n, n), 10.0))
    post = gaussian_filter(background_subtract(noisy, flat_bg), sigma=1.0)
    s_post = snr(post, threshold_mask(post), border_mask(post))
    snr_rel = abs(s_raw - 12.0) / 12.0

    ok = spacing_rel < 0.02 and shift_err < 0.1 and snr_rel < 0.05 and s_post > s_raw
    return ok, (
        f"spacing rel {spacing_rel:.2e}, shift err {shift_err:.2e} px, "
        f"snr rel {snr_rel:.2e}, post/raw {s_post / s_raw:.1f}x"
    )


def _suite_trotter(rng, workers):
    spacing = 1.0e-3
    grid = make_grid(128, 128, 4.0e-3, 4.0e-3)
    env = gaussian_envelope(grid, 1.5e-3, wavelength=_WAVELENGTH)
    errors = [
        trotter_error(grid, spacing, n, env, max_radius=0.25 * spacing) for n in (1, 4, 16)
    ]
    monotone = all(b <= a * (1.0 + 1e-12) for a, b in zip(errors, errors[1:]))
    converged = errors[-1] <= errors[0] / 5.0
    return monotone and converged, (
        f"errors N=1:{errors[0]:.3e} N=4:{errors[1]:.3e} N=16:{errors[2]:.3e}"
    )


_SUITES = (
    ("closed-form", _suite_closed_form),
    ("unitarity", _suite_unitarity),
    ("revival", _suite_revival),
    ("semigroup", _suite_semigroup),
    ("winding", _suite_winding),
    ("roundtrip", _suite_roundtrip),
    ("estimators", _suite_estimators),
    ("trotter", _suite_trotter),
)

SUITE_NAMES = tuple(name for name, _ in _SUITES)


def run_selftests(
    seed: int = 0,
    workers: int | None = None,
    corruption: str | None = None,
) -> list[tuple[str, bool, str]]:
    """Run every suite and return (name, passed, detail) triples.

    ``corruption`` forwards to the propagation test hook for the negative
    control; it is restored afterwards no matter what.
    """
    results = []
    previous = propagation._TRANSFER_CORRUPTION
    propagation._TRANSFER_CORRUPTION = corruption
    try:
        for name, suite in _SUITES:
            rng = np.random.default_rng(seed)
            try:
                ok, detail = suite(rng, workers)
            except Exception as err:  # a crashed suite is a failed suite
                ok, detail = False, f"raised {type(err).__name__}: {err}"
            results.append((name, bool(ok), detail))
    finally:
        propagation._TRANSFER_CORRUPTION = previous
    return results
