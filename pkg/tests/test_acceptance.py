"""Acceptance gate: one test per shipped guarantee, each printing its measured value.

Run with ``pytest -v tests/test_acceptance.py`` to get a pass/fail line per
criterion.  Tolerances and runtime budgets here are the product contract;
loosening them is a release decision, not a test fix.
"""

import time

import numpy as np

from conftest import WAVELENGTH, lov_lattice
from oamtalbot.analysis import (
    background_subtract,
    border_mask,
    chirality_metric,
    estimate_lattice_spacing,
    estimate_shift,
    gaussian_filter,
    snr,
    threshold_mask,
)
from oamtalbot.grid_field import (
    IntensityImage,
    ScalarField,
    gaussian_envelope,
    intensity,
    make_grid,
    strip_phase,
)
from oamtalbot.propagation import (
    PropagationPlan,
    fraunhofer_distance,
    propagate,
    propagate_direct,
    rayleigh_range,
    talbot_length,
)
from oamtalbot.spinorbit import lattice_intensity_closed_form, phase_winding, trotter_error


def _ncc_central_quarter(a: np.ndarray, b: np.ndarray) -> float:
    n = a.shape[0]
    q = slice(n // 4, 3 * n // 4)
    av = a[q, q] - np.mean(a[q, q])
    bv = b[q, q] - np.mean(b[q, q])
    return float(np.sum(av * bv) / np.sqrt(np.sum(av * av) * np.sum(bv * bv)))


def test_criterion_01_closed_form_equality():
    t0 = time.perf_counter()
    a = 1.0e-3
    field = lov_lattice(512, 32, a=a)  # flat envelope, analyzer L
    flat = ScalarField(
        grid=field.grid, amplitudes=np.ones(field.grid.shape, dtype=complex), wavelength=WAVELENGTH
    )
    reference = lattice_intensity_closed_form(field.grid, a, flat)
    dev = float(np.max(np.abs(intensity(field).values - reference.values)) / np.max(reference.values))
    elapsed = time.perf_counter() - t0
    print(f"criterion 1: max relative deviation {dev:.3e} (< 1e-12), runtime {elapsed:.2f}s (< 5s)")
    assert dev < 1e-12, f"operator pipeline deviates from closed form by {dev:.3e}"
    assert elapsed < 5.0, f"runtime {elapsed:.2f}s exceeds the 5s budget"


def test_criterion_02_talbot_self_imaging():
    t0 = time.perf_counter()
    a = 1.0e-3
    field = lov_lattice(512, 16, a=a)  # 32 x 32 periods
    plan = PropagationPlan(grid=field.grid, wavelength=WAVELENGTH, pad_factor=2)
    z_t = talbot_length(a, WAVELENGTH)
    i0 = intensity(field).values
    i_revival = intensity(propagate(field, z_t, plan)).values
    i_half = intensity(propagate(field, z_t / 2, plan)).values
    ncc_revival = _ncc_central_quarter(i0, i_revival)
    half_px = 8  # a/2 at 16 px per period
    ncc_half = _ncc_central_quarter(np.roll(i0, (half_px, half_px), axis=(0, 1)), i_half)
    elapsed = time.perf_counter() - t0
    print(
        f"criterion 2: NCC(I0, I(z_T)) {ncc_revival:.5f}, "
        f"NCC(shifted I0, I(z_T/2)) {ncc_half:.5f} (both >= 0.99), runtime {elapsed:.2f}s (< 30s)"
    )
    assert ncc_revival >= 0.99, f"revival NCC {ncc_revival:.5f} below 0.99"
    assert ncc_half >= 0.99, f"half-distance shifted NCC {ncc_half:.5f} below 0.99"
    assert elapsed < 30.0, f"runtime {elapsed:.2f}s exceeds the 30s budget"


def test_criterion_03_characteristic_distances():
    z_t = talbot_length(2.547e-3, WAVELENGTH)
    z_f = fraunhofer_distance(4.1e-3, WAVELENGTH)
    print(f"criterion 3: talbot length {z_t:.4f} m (16.0 +- 0.1), fraunhofer {z_f:.2f} m (166 +- 1)")
    assert abs(z_t - 16.0) <= 0.1
    assert abs(z_f - 166.0) <= 1.0


def test_criterion_04_gaussian_waist_oracle():
    w0 = 0.5e-3
    z_r = rayleigh_range(w0, WAVELENGTH)
    grid = make_grid(512, 512, 16e-3, 16e-3)
    envelope = gaussian_envelope(grid, w0, wavelength=WAVELENGTH)
    plan = PropagationPlan(grid=grid, wavelength=WAVELENGTH, pad_factor=2, band_limit=False)

    def second_moment_waist(img: IntensityImage) -> float:
        x = img.grid.x_coords()
        marginal = img.values.sum(axis=1)
        mean_x = float((x * marginal).sum() / marginal.sum())
        return 2.0 * float(np.sqrt(((x - mean_x) ** 2 * marginal).sum() / marginal.sum()))

    results = []
    for mult, bound in ((1.0, 0.005), (2.0, 0.01)):
        img = intensity(propagate(envelope, mult * z_r, plan))
        expected = w0 * np.sqrt(1.0 + mult**2)
        rel = abs(second_moment_waist(img) - expected) / expected
        results.append((mult, rel, bound))
    print(
        "criterion 4: "
        + ", ".join(f"waist at {m:g} z_R off by {r:.2e} (< {b})" for m, r, b in results)
    )
    for mult, rel, bound in results:
        assert rel < bound, f"waist at {mult} z_R off by {rel:.3e}, bound {bound}"


def test_criterion_05_spectral_matches_direct_quadrature():
    t0 = time.perf_counter()
    a = 1.0e-3
    dx = a / 16
    field = lov_lattice(64, 16, a=a, w0=7 * dx)
    plan = PropagationPlan(grid=field.grid, wavelength=WAVELENGTH, pad_factor=4, band_limit=False)
    z_t = talbot_length(a, WAVELENGTH)
    q = slice(16, 48)
    devs = []
    for z in (z_t / 8, z_t / 2):
        spectral = propagate(field, z, plan).amplitudes[q, q]
        direct = propagate_direct(field, z).amplitudes[q, q]
        devs.append(float(np.max(np.abs(spectral - direct)) / np.max(np.abs(direct))))
    elapsed = time.perf_counter() - t0
    print(
        f"criterion 5: max relative deviation {devs[0]:.3e} at z_T/8, {devs[1]:.3e} at z_T/2 "
        f"(< 1e-6), runtime {elapsed:.2f}s (< 60s)"
    )
    for dev in devs:
        assert dev < 1e-6, f"spectral vs direct deviation {dev:.3e} exceeds 1e-6"
    assert elapsed < 60.0, f"runtime {elapsed:.2f}s exceeds the 60s budget"


def test_criterion_06_winding_at_every_interior_site():
    a = 1.0e-3
    field = lov_lattice(256, 32, a=a, w0=3e-3)
    windings = [
        phase_winding(field, (mx * a, my * a), 0.25 * a)
        for mx in (-2, -1, 0, 1, 2)
        for my in (-2, -1, 0, 1, 2)
    ]
    print(f"criterion 6: windings over 25 interior sites {sorted(set(windings))} (|w| = 1, one sign)")
    assert all(abs(w) == 1 for w in windings), f"non-unit winding present: {sorted(set(windings))}"
    assert len(set(windings)) == 1, f"winding sign varies across sites: {sorted(set(windings))}"


def test_criterion_07_chirality_flips_between_fractional_planes():
    a = 1.0e-3
    field = lov_lattice(512, 32, a=a, w0=3e-3)
    control = strip_phase(field)
    plan = PropagationPlan(grid=field.grid, wavelength=WAVELENGTH, pad_factor=2)
    z_t = talbot_length(a, WAVELENGTH)
    sites = [(a / 4 + mx * a, my * a) for mx in (-1, 0, 1) for my in (-1, 0, 1)]
    radius = a / 5
    oam = {}
    ctrl = {}
    for z in (z_t / 8, 7 * z_t / 8):
        oam[z] = chirality_metric(intensity(propagate(field, z, plan)), sites, radius)
        ctrl[z] = chirality_metric(intensity(propagate(control, z, plan)), sites, radius)
    early, late = oam[z_t / 8], oam[7 * z_t / 8]
    print(
        f"criterion 7: chirality {early:+.4f} at z_T/8 vs {late:+.4f} at 7z_T/8 (opposite signs), "
        f"controls {ctrl[z_t / 8]:+.2e} / {ctrl[7 * z_t / 8]:+.2e} (< 10% of OAM magnitude)"
    )
    assert early * late < 0.0, f"chirality does not flip sign: {early:+.4f} vs {late:+.4f}"
    for z in (z_t / 8, 7 * z_t / 8):
        assert abs(ctrl[z]) < 0.1 * abs(oam[z]), (
            f"phase-stripped control {ctrl[z]:+.3e} not below 10% of {oam[z]:+.3e}"
        )


def test_criterion_08_spacing_and_shift_at_experiment_geometry():
    a = 0.577e-3
    field = lov_lattice(512, 16, a=a, w0=3 * a)
    image_0 = intensity(field)
    estimate = estimate_lattice_spacing(image_0)
    rel = (estimate.spacing - a) / a
    plan = PropagationPlan(grid=field.grid, wavelength=WAVELENGTH, pad_factor=2)
    z_t = talbot_length(a, WAVELENGTH)
    image_half = intensity(propagate(field, z_t / 2, plan))
    sx, sy = estimate_shift(image_0, image_half)

    def fold_error_px(shift: float) -> float:
        # a shift of a/2 is indistinguishable from a/2 + k a on a lattice
        return min(abs(shift - (a / 2 + k * a)) for k in (-2, -1, 0, 1)) / field.grid.dx

    ex, ey = fold_error_px(sx), fold_error_px(sy)
    print(
        f"criterion 8: spacing {estimate.spacing * 1e3:.4f} mm ({rel:+.2%}, within 2%), "
        f"half-distance shift off a/2 by ({ex:.2f}, {ey:.2f}) px (< 1 px)"
    )
    assert abs(rel) < 0.02, f"spacing off by {rel:+.2%}"
    assert ex < 1.0 and ey < 1.0, f"shift error ({ex:.2f}, {ey:.2f}) px exceeds one pixel"


def test_criterion_09_snr_estimator_and_postprocessing():
    rng = np.random.default_rng(42)
    n = 256
    grid = make_grid(n, n, n * 1e-5, n * 1e-5)
    yy, xx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    disk = np.hypot(xx - n / 2, yy - n / 2) < 40
    mu, sigma, floor = 60.0, 5.0, 10.0
    frame = np.clip(np.where(disk, mu, floor) + rng.normal(0.0, sigma, (n, n)), 0.0, None)
    noisy = IntensityImage(grid=grid, values=frame)
    snr_raw = snr(noisy, threshold_mask(gaussian_filter(noisy, sigma=1.0)), border_mask(noisy))
    background = IntensityImage(grid=grid, values=np.full((n, n), floor))
    post = gaussian_filter(background_subtract(noisy, background), sigma=1.0)
    snr_post = snr(post, threshold_mask(post), border_mask(post))
    rel = (snr_raw - mu / sigma) / (mu / sigma)
    print(
        f"criterion 9: raw SNR {snr_raw:.2f} vs mu/sigma {mu / sigma:.1f} ({rel:+.2%}, within 5%); "
        f"post-processed {snr_post:.2f} (> raw)"
    )
    assert abs(rel) < 0.05, f"raw SNR off the mu/sigma construction by {rel:+.2%}"
    assert snr_post > snr_raw, f"post-processing lowered SNR: {snr_post:.2f} <= {snr_raw:.2f}"


def test_criterion_10_trotter_convergence():
    d = 1.0e-3
    grid = make_grid(256, 256, 4e-3, 4e-3)
    envelope = gaussian_envelope(grid, 1e6, wavelength=WAVELENGTH)  # effectively flat
    steps = (1, 2, 4, 8, 16, 32, 64)
    errors = [trotter_error(grid, d, n, envelope, max_radius=d / 4) for n in steps]
    ratio = errors[0] / errors[-1]
    print(
        "criterion 10: errors "
        + ", ".join(f"N={n}: {e:.3e}" for n, e in zip(steps, errors))
        + f"; N=1/N=64 ratio {ratio:.1f}x (>= 10x)"
    )
    for before, after in zip(errors, errors[1:]):
        assert after <= before, f"error increased along {steps}: {errors}"
    assert errors[-1] <= errors[0] / 10.0, f"N=64 error only {ratio:.1f}x below N=1"
