"""Command-line front end: prepare, propagate, carpet, analyze, selftest.

Every run reads one INI config, writes its outputs atomically into one
directory, and finishes with a ``manifest.ini`` listing the echoed config,
per-stage timings, and a SHA-256 digest per emitted file.  Exit codes: 0
success, 1 selftest failures, 2 configuration problems, 3 numerical failures,
4 I/O failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    RegionMask,
    background_subtract,
    border_mask,
    chirality_metric,
    estimate_lattice_spacing,
    estimate_shift,
    gaussian_filter,
    ncc,
    snr,
    threshold_mask,
)
from .config import RunConfig, parse_config
from .exceptions import ConfigError, NumericsError
from .grid_field import (
    ANALYZERS,
    Grid2D,
    IntensityImage,
    JonesField,
    ScalarField,
    gaussian_envelope,
    intensity,
    make_grid,
    project,
    strip_phase,
)
from .manifest import file_digest, write_manifest
from .pgmio import atomic_write_text, read_pgm, sidecar_path, write_field_raw, write_pgm
from .propagation import CarpetSpec, PropagationPlan, carpet, propagate, thin_lens
from .selftest import run_selftests
from .spinorbit import LovParams, apply_lov_sequence

__all__ = ["main", "build_parser"]

_REPORT_FIELDS = (
    "a_hat_m",
    "a_err_m",
    "snr_raw",
    "snr_post",
    "chirality",
    "shift_x_m",
    "shift_y_m",
    "ncc",
)


class _Run:
    """Output-directory bookkeeping shared by all commands."""

    def __init__(self, out_dir: Path, workers: int | None):
        self.out_dir = out_dir
        self.workers = workers
        self.timings: dict[str, float] = {}
        self.outputs: dict[str, str] = {}
        out_dir.mkdir(parents=True, exist_ok=True)

    def track(self, path: Path) -> None:
        self.outputs[path.name] = file_digest(path)

    def write_image(self, image: IntensityImage, name: str, wavelength: float, z: float, figures: bool, title: str) -> None:
        pgm = self.out_dir / f"{name}.pgm"
        write_pgm(image, pgm, wavelength=wavelength, z=z)
        self.track(pgm)
        self.track(sidecar_path(pgm))
        if figures:
            from .figures import render_intensity

            png = self.out_dir / f"{name}.png"
            render_intensity(image, png, title=title)
            self.track(png)

    def finish(self, command: str, config: RunConfig | None, reports=None) -> None:
        write_manifest(
            self.out_dir / "manifest.ini",
            command=command,
            version=__version__,
            config=config,
            timings=self.timings,
            outputs=self.outputs,
            reports=reports,
        )


class _Stage:
    """Context manager recording a stage duration into the run timings."""

    def __init__(self, run: _Run, name: str):
        self.run = run
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.run.timings[f"{self.name}_s"] = time.perf_counter() - self.t0
        return False


def _build_state(config: RunConfig) -> tuple[Grid2D, JonesField, ScalarField]:
    """Grid, full Jones state after the pair sequence, and the filtered scalar field."""
    config.require("grid", "source", "lov")
    grid = config.grid.make()
    src = config.source
    envelope = gaussian_envelope(grid, src.waist, wavelength=src.wavelength)
    vr, vl = ANALYZERS[src.polarization]
    base = JonesField(
        grid=grid,
        r_component=vr * envelope.amplitudes,
        l_component=vl * envelope.amplitudes,
        wavelength=src.wavelength,
    )
    state = apply_lov_sequence(
        base,
        LovParams(spacing=config.lov.spacing, n_pairs=config.lov.pairs, origin=config.lov.origin),
    )
    filtered = project(state, config.filter.analyzer)
    if config.filter.strip_phase:
        filtered = strip_phase(filtered)
    return grid, state, filtered


def _plan(config: RunConfig, grid: Grid2D, workers: int | None) -> PropagationPlan:
    prop = config.propagate
    return PropagationPlan(
        grid=grid,
        wavelength=config.source.wavelength,
        pad_factor=prop.pad_factor if prop is not None else 2,
        band_limit=prop.band_limit if prop is not None else True,
        workers=workers,
    )


def cmd_prepare(config: RunConfig, run: _Run) -> int:
    with _Stage(run, "prepare"):
        _, state, filtered = _build_state(config)
        image = intensity(filtered)
    with _Stage(run, "write"):
        run.write_image(
            image,
            "intensity",
            config.source.wavelength,
            0.0,
            config.outputs.figures,
            f"prepared {config.filter.analyzer}-filtered intensity, z = 0",
        )
        if config.outputs.raw:
            raw = run.out_dir / "state.raw"
            write_field_raw(state, raw, z=0.0)
            run.track(raw)
            run.track(sidecar_path(raw))
    run.finish("prepare", config)
    return 0


def cmd_propagate(config: RunConfig, run: _Run) -> int:
    config.require("propagate")
    if config.propagate.planes is None and config.propagate.chain is None:
        raise ConfigError("propagate.planes: give either planes or chain")
    with _Stage(run, "prepare"):
        grid, _, filtered = _build_state(config)
        plan = _plan(config, grid, run.workers)
    wavelength = config.source.wavelength
    with _Stage(run, "propagate"):
        if config.propagate.planes is not None:
            for i, z in enumerate(config.propagate.planes):
                out = intensity(propagate(filtered, z, plan))
                run.write_image(
                    out,
                    f"plane_{i:02d}",
                    wavelength,
                    z,
                    config.outputs.figures,
                    f"intensity at z = {z:.6g} m",
                )
        else:
            field = filtered
            z_total = 0.0
            for kind, value in config.propagate.chain:
                if kind == "propagate":
                    field = propagate(field, float(value), plan)
                    z_total += float(value)
                elif kind == "lens":
                    field = thin_lens(field, float(value))
                else:
                    run.write_image(
                        intensity(field),
                        f"snapshot_{value}",
                        wavelength,
                        z_total,
                        config.outputs.figures,
                        f"snapshot {value} after {z_total:.6g} m",
                    )
    run.finish("propagate", config)
    return 0


def cmd_carpet(config: RunConfig, run: _Run) -> int:
    config.require("carpet")
    with _Stage(run, "prepare"):
        grid, _, filtered = _build_state(config)
        plan = _plan(config, grid, run.workers)
    slice_coords = grid.x_coords() if config.carpet.axis == "x" else grid.y_coords()
    if not slice_coords[0] <= config.carpet.offset <= slice_coords[-1]:
        raise ConfigError(
            f"carpet.offset: {config.carpet.offset} outside the grid "
            f"[{slice_coords[0]:.6g}, {slice_coords[-1]:.6g}]"
        )
    spec = CarpetSpec(
        axis=config.carpet.axis,
        offset=config.carpet.offset,
        z_samples=config.carpet.z_samples(),
    )
    with _Stage(run, "carpet"):
        rows = carpet(filtered, spec, plan)
    with _Stage(run, "write"):
        coords = grid.y_coords() if spec.axis == "x" else grid.x_coords()
        z = np.asarray(spec.z_samples)
        csv_path = run.out_dir / "carpet.csv"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["z_m"] + [f"{c:.9e}" for c in coords])
        for zi, row in zip(z, rows):
            writer.writerow([f"{zi:.9e}"] + [f"{v:.10e}" for v in row])
        atomic_write_text(csv_path, buf.getvalue())
        run.track(csv_path)

        if z.size > 1:
            # a raster needs a z axis; a single-sample carpet lives in the CSV only
            carpet_grid = Grid2D(
                nx=coords.size,
                ny=int(z.size),
                dx=grid.dy if spec.axis == "x" else grid.dx,
                dy=float(z[1] - z[0]),
                center=(float(grid.center[1] if spec.axis == "x" else grid.center[0]), float(0.5 * (z[0] + z[-1]))),
            )
            carpet_img = IntensityImage(grid=carpet_grid, values=rows.T)
            pgm = run.out_dir / "carpet.pgm"
            write_pgm(carpet_img, pgm, wavelength=config.source.wavelength, z=float("nan"))
            run.track(pgm)
            run.track(sidecar_path(pgm))
        if config.outputs.figures and z.size > 1:
            from .figures import render_carpet

            png = run.out_dir / "carpet.png"
            other = "y" if spec.axis == "x" else "x"
            render_carpet(
                rows,
                z,
                coords,
                png,
                transverse_label=f"{other} (mm)",
                title=f"carpet at {spec.axis} = {spec.offset:.6g} m",
            )
            run.track(png)
    run.finish("carpet", config)
    return 0


def _chirality_sites(grid: Grid2D, spacing: float, radius: float) -> list[tuple[float, float]]:
    """Edge-midpoint sublattice (spacing/4 + m a, n a) keeping each disk inside the grid.

    Sites on the y = 0 rows of the x-offset sublattice: a pattern that is
    mirror-even in y scores zero there exactly, while a handed lattice does
    not, and the sublattice never pairs a site with its inversion partner
    (whose moment would cancel it).  At most 3x3 sites around the center.
    """
    x = grid.x_coords()
    y = grid.y_coords()
    sites = []
    for mx in (-1, 0, 1):
        for my in (-1, 0, 1):
            sx = spacing / 4.0 + mx * spacing
            sy = my * spacing
            if x[0] <= sx - radius and sx + radius <= x[-1] and y[0] <= sy - radius and sy + radius <= y[-1]:
                sites.append((sx, sy))
    return sites


def _analyze_image(
    name: str, image: IntensityImage, config: RunConfig, background: IntensityImage | None
) -> dict[str, str]:
    an = config.analysis
    block: dict[str, str] = {}
    spacing_value: float | None = None
    if an.spacing:
        try:
            est = estimate_lattice_spacing(image)
            spacing_value = est.spacing
            block["a_hat_m"] = f"{est.spacing:.10e}"
            block["a_err_m"] = f"{est.uncertainty:.10e}"
        except NumericsError as err:
            block["note"] = f"spacing: {err}"
    if an.snr:
        try:
            filtered = gaussian_filter(image, sigma=an.sigma)
            signal = threshold_mask(filtered, fraction=an.signal_fraction)
            border = border_mask(image, fraction=an.border_fraction)
            block["snr_raw"] = f"{snr(image, signal, border):.6f}"
            base = background_subtract(image, background) if background is not None else image
            post = gaussian_filter(base, sigma=an.sigma)
            post_signal = threshold_mask(post, fraction=an.signal_fraction)
            block["snr_post"] = f"{snr(post, post_signal, border_mask(post, fraction=an.border_fraction)):.6f}"
        except NumericsError as err:
            block.setdefault("note", f"snr: {err}")
    if an.chirality and spacing_value is not None:
        radius = an.chirality_radius if isinstance(an.chirality_radius, float) else spacing_value / 5.0
        try:
            sites = _chirality_sites(image.grid, spacing_value, radius)
            if sites:
                block["chirality"] = f"{chirality_metric(image, sites, radius):.6f}"
            else:
                block.setdefault("note", "chirality: no site fits inside the grid")
        except (NumericsError, ValueError) as err:
            block.setdefault("note", f"chirality: {err}")
    return block


def cmd_analyze(config: RunConfig, run: _Run, inputs: list[str]) -> int:
    an = config.analysis
    images: list[tuple[str, IntensityImage, bool]] = []
    with _Stage(run, "read"):
        for raw_path in inputs:
            try:
                image, meta = read_pgm(raw_path, require_sidecar=False)
            except ValueError as err:
                raise OSError(f"{raw_path}: {err}") from err
            name = Path(raw_path).stem
            images.append((name, image, "pitch_m" in meta))
        background = None
        if an.background is not None:
            try:
                background, _ = read_pgm(an.background, require_sidecar=False)
            except ValueError as err:
                raise OSError(f"{an.background}: {err}") from err
    reports: dict[str, dict[str, str]] = {}
    with _Stage(run, "analyze"):
        for name, image, calibrated in images:
            block = _analyze_image(name, image, config, background)
            if not calibrated:
                block["calibrated"] = "false"
                block["note"] = (block.get("note", "") + "; " if "note" in block else "") + (
                    "uncalibrated: no sidecar pitch, lengths are in samples"
                )
            reports[name] = block
        if an.pairs == "consecutive":
            pair_list = [(i + 1, i + 2) for i in range(len(images) - 1)]
        else:
            pair_list = list(an.pairs)
        for i, j in pair_list:
            if not (1 <= i <= len(images) and 1 <= j <= len(images)):
                raise ConfigError(
                    f"analysis.pairs: pair {i}:{j} outside the {len(images)} given images"
                )
            name_a, img_a = images[i - 1][:2]
            name_b, img_b = images[j - 1][:2]
            block: dict[str, str] = {}
            try:
                sx, sy = estimate_shift(img_a, img_b)
                block["shift_x_m"] = f"{sx:.10e}"
                block["shift_y_m"] = f"{sy:.10e}"
            except (NumericsError, ValueError) as err:
                block["note"] = f"shift: {err}"
            window = RegionMask(values=np.ones(img_a.values.shape, dtype=bool), role="signal")
            try:
                block["ncc"] = f"{ncc(img_a, img_b, window):.6f}"
            except (NumericsError, ValueError) as err:
                block.setdefault("note", f"ncc: {err}")
            reports[f"{name_a}__vs__{name_b}"] = block
    with _Stage(run, "write"):
        csv_path = run.out_dir / "report.csv"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("name",) + _REPORT_FIELDS + ("note",))
        for name, block in reports.items():
            writer.writerow([name] + [block.get(k, "") for k in _REPORT_FIELDS + ("note",)])
        atomic_write_text(csv_path, buf.getvalue())
        run.track(csv_path)
        if config.outputs.figures:
            from .figures import render_intensity

            for name, image, _ in images:
                png = run.out_dir / f"report_{name}.png"
                render_intensity(image, png, title=name)
                run.track(png)
    run.finish("analyze", config, reports=reports)
    return 0


def cmd_selftest(run: _Run, seed: int, corruption: str | None) -> int:
    t0 = time.perf_counter()
    results = run_selftests(seed=seed, workers=run.workers, corruption=corruption)
    elapsed = time.perf_counter() - t0
    for name, ok, detail in results:
        print(f"{name:12s} {'PASS' if ok else 'FAIL'}  {detail}")
    failed = sum(1 for _, ok, _ in results if not ok)
    print(f"{len(results) - failed}/{len(results)} suites passed in {elapsed:.1f}s")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oamtalbot",
        description="Vortex-lattice wave-optics simulator and analysis toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI run file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [outputs] directory)")
    common.add_argument("--seed", type=int, default=0, metavar="U64", help="seed for synthetic-noise generators")
    common.add_argument("--threads", type=int, default=0, metavar="N", help="FFT worker threads (0 = auto)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="build the filtered z = 0 state and write it")
    sub.add_parser("propagate", parents=[common], help="image the state at configured planes or through a chain")
    sub.add_parser("carpet", parents=[common], help="slice intensity against propagation distance")
    analyze = sub.add_parser("analyze", parents=[common], help="measure spacing/shift/SNR/chirality on PGM frames")
    analyze.add_argument("images", nargs="+", metavar="PGM", help="input frames (sidecars required)")
    selftest = sub.add_parser("selftest", parents=[common], help="run the desk-scale invariant suites")
    selftest.add_argument("--corrupt", default=None, help=argparse.SUPPRESS)
    return parser


def _load_config(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("config: --config PATH is required for this command")
    return parse_config(args.config)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 0:
        print(f"error: --threads must be >= 0, got {args.threads}", file=sys.stderr)
        return 2
    workers = args.threads if args.threads > 0 else os.cpu_count()
    try:
        if args.command == "selftest":
            out_dir = Path(args.out) if args.out else Path(".")
            run = _Run(out_dir, workers)
            return cmd_selftest(run, args.seed, args.corrupt)
        if args.command == "analyze" and args.config is None:
            config = RunConfig()
        else:
            config = _load_config(args)
        out_dir = Path(args.out) if args.out else Path(config.outputs.directory)
        run = _Run(out_dir, workers)
        if args.command == "prepare":
            return cmd_prepare(config, run)
        if args.command == "propagate":
            return cmd_propagate(config, run)
        if args.command == "carpet":
            return cmd_carpet(config, run)
        if args.command == "analyze":
            return cmd_analyze(config, run, args.images)
        raise AssertionError(f"unhandled command {args.command!r}")
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NumericsError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
