"""File round-trips for intensity images and complex fields.

Intensity images travel as binary 16-bit PGM (P5, maxval 65535, big-endian
samples) normalized to the image maximum, with a plain-text sidecar
``<name>.meta.txt`` of ``key = value`` lines carrying the physical calibration:
pitch_m, scale (intensity units per count), wavelength_m, z_m.  Complex fields
dump as raw little-endian float64 with re/im (and for two-component fields
R then L per sample) interleaved in row-major order, with the same sidecar
schema plus nx and ny.

All writers are atomic: content lands in a temporary file that is renamed into
place.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import CalibrationError
from .grid_field import Grid2D, IntensityImage, JonesField, ScalarField

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "sidecar_path",
    "write_pgm",
    "read_pgm",
    "write_field_raw",
    "read_field_raw",
]

PGM_MAXVAL = 65535


def atomic_write_bytes(path: Path | str, payload: bytes) -> None:
    """Write bytes via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path | str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def sidecar_path(path: Path | str) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.txt")


def _format_meta(entries: dict[str, object]) -> str:
    lines = [f"{key} = {value!r}" if isinstance(value, str) else f"{key} = {value}" for key, value in entries.items()]
    return "\n".join(lines) + "\n"


def _parse_meta(text: str) -> dict[str, float]:
    meta: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"sidecar line {lineno} is not 'key = value': {raw!r}")
        key, _, value = line.partition("=")
        meta[key.strip()] = float(value.strip())
    return meta


def write_pgm(
    image: IntensityImage,
    path: Path | str,
    wavelength: float | None = None,
    z: float | None = None,
) -> None:
    """Write an intensity image as 16-bit binary PGM plus its calibration sidecar.

    Values are scaled so the image maximum maps to 65535; the sidecar records
    ``scale`` with physical = counts * scale.  An all-zero image stores scale 0.
    Raster rows run along y (height = ny), columns along x (width = nx).
    """
    path = Path(path)
    values = np.asarray(image.values, dtype=float)
    vmax = float(np.max(values))
    scale = vmax / PGM_MAXVAL if vmax > 0.0 else 0.0
    if scale > 0.0:
        counts = np.rint(values / scale).astype(np.uint16)
    else:
        counts = np.zeros(values.shape, dtype=np.uint16)
    header = f"P5\n{image.grid.nx} {image.grid.ny}\n{PGM_MAXVAL}\n".encode("ascii")
    raster = counts.T.astype(">u2").tobytes()  # rows = y, big-endian samples
    atomic_write_bytes(path, header + raster)
    meta = {
        "pitch_m": image.grid.dx,
        "scale": scale,
        "wavelength_m": wavelength if wavelength is not None else float("nan"),
        "z_m": z if z is not None else float("nan"),
    }
    if image.grid.dy != image.grid.dx:
        meta["pitch_y_m"] = image.grid.dy
    atomic_write_text(sidecar_path(path), _format_meta(meta))


def _read_pgm_header(payload: bytes) -> tuple[int, int, int, int]:
    """Parse a P5 header, returning (width, height, maxval, data offset)."""
    if not payload.startswith(b"P5"):
        raise ValueError("not a binary PGM (P5) file")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        if pos >= len(payload):
            raise ValueError("truncated PGM header")
        ch = payload[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            pos = payload.index(b"\n", pos) + 1
        elif ch.isdigit():
            end = pos
            while end < len(payload) and payload[end : end + 1].isdigit():
                end += 1
            fields.append(int(payload[pos:end]))
            pos = end
        else:
            raise ValueError(f"unexpected byte {ch!r} in PGM header")
    if not payload[pos : pos + 1].isspace():
        raise ValueError("PGM header must end with a whitespace byte")
    return fields[0], fields[1], fields[2], pos + 1


def read_pgm(path: Path | str, require_sidecar: bool = True) -> tuple[IntensityImage, dict]:
    """Read a 16-bit PGM and its sidecar back into physical units.

    Returns the image and the sidecar dictionary.  Without a sidecar the pixel
    pitch is unknown; ``require_sidecar=False`` substitutes a unit pitch (pixel
    coordinates) and an empty dictionary, otherwise a missing or pitch-less
    sidecar raises CalibrationError.
    """
    path = Path(path)
    payload = path.read_bytes()
    width, height, maxval, offset = _read_pgm_header(payload)
    if maxval != PGM_MAXVAL:
        raise ValueError(f"expected maxval {PGM_MAXVAL}, got {maxval}")
    expected = width * height * 2
    data = payload[offset : offset + expected]
    if len(data) != expected:
        raise ValueError(f"PGM raster has {len(data)} bytes, expected {expected}")
    counts = np.frombuffer(data, dtype=">u2").reshape(height, width).T.astype(float)

    side = sidecar_path(path)
    meta: dict[str, float] = {}
    if side.exists():
        meta = _parse_meta(side.read_text(encoding="utf-8"))
    if "pitch_m" not in meta:
        if require_sidecar:
            raise CalibrationError(f"no pitch calibration found for {path.name}")
        pitch_x = pitch_y = 1.0
        scale = 1.0
    else:
        pitch_x = float(meta["pitch_m"])
        pitch_y = float(meta.get("pitch_y_m", pitch_x))
        scale = float(meta.get("scale", 1.0))
    values = counts * (scale if scale > 0.0 else 1.0)
    grid = Grid2D(nx=width, ny=height, dx=pitch_x, dy=pitch_y)
    return IntensityImage(grid=grid, values=values), meta


def write_field_raw(field: ScalarField | JonesField, path: Path | str, z: float | None = None) -> None:
    """Dump a complex field as raw little-endian float64 with a sidecar.

    Scalar fields store (re, im) per sample; two-component fields store
    (re_R, im_R, re_L, im_L).  Samples are row-major in array index order.
    """
    path = Path(path)
    if isinstance(field, ScalarField):
        stack = np.asarray(field.amplitudes)[..., None]
    elif isinstance(field, JonesField):
        stack = np.stack([field.r_component, field.l_component], axis=-1)
    else:
        raise ValueError(f"unsupported field type {type(field).__name__}")
    interleaved = np.empty(stack.shape + (2,), dtype="<f8")
    interleaved[..., 0] = stack.real
    interleaved[..., 1] = stack.imag
    atomic_write_bytes(path, interleaved.tobytes())
    meta = {
        "pitch_m": field.grid.dx,
        "scale": 1.0,
        "wavelength_m": field.wavelength,
        "z_m": z if z is not None else float("nan"),
        "nx": field.grid.nx,
        "ny": field.grid.ny,
    }
    if field.grid.dy != field.grid.dx:
        meta["pitch_y_m"] = field.grid.dy
    atomic_write_text(sidecar_path(path), _format_meta(meta))


def read_field_raw(path: Path | str) -> ScalarField | JonesField:
    """Read a raw complex field dump; the component count is inferred from the size."""
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise CalibrationError(f"no sidecar found for {path.name}")
    meta = _parse_meta(side.read_text(encoding="utf-8"))
    for key in ("pitch_m", "nx", "ny"):
        if key not in meta:
            raise CalibrationError(f"sidecar for {path.name} lacks {key}")
    nx = int(meta["nx"])
    ny = int(meta["ny"])
    payload = np.frombuffer(path.read_bytes(), dtype="<f8")
    per_sample = payload.size / (nx * ny)
    if per_sample == 2.0:
        data = payload.reshape(nx, ny, 2)
        amp = data[..., 0] + 1.0j * data[..., 1]
        grid = Grid2D(nx=nx, ny=ny, dx=meta["pitch_m"], dy=meta.get("pitch_y_m", meta["pitch_m"]))
        wavelength = meta.get("wavelength_m", 1.0)
        return ScalarField(grid=grid, amplitudes=amp, wavelength=wavelength)
    if per_sample == 4.0:
        data = payload.reshape(nx, ny, 2, 2)
        grid = Grid2D(nx=nx, ny=ny, dx=meta["pitch_m"], dy=meta.get("pitch_y_m", meta["pitch_m"]))
        wavelength = meta.get("wavelength_m", 1.0)
        return JonesField(
            grid=grid,
            r_component=data[..., 0, 0] + 1.0j * data[..., 0, 1],
            l_component=data[..., 1, 0] + 1.0j * data[..., 1, 1],
            wavelength=wavelength,
        )
    raise ValueError(f"raw field size does not match {nx}x{ny} with 1 or 2 components")
