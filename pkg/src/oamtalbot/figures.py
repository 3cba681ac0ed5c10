"""Matplotlib renderings of intensity frames and carpets.

Everything draws through the Agg backend into PNG files next to the delimited
outputs.  Writes are atomic (temp + rename) and carry no varying metadata, so
identical data produces identical bytes.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid_field import IntensityImage

__all__ = ["render_intensity", "render_carpet"]

_CMAP = "inferno"
_DPI = 150


def _save_atomic(fig, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fig.savefig(fh, format="png", dpi=_DPI, metadata={"Software": None})
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)


def render_intensity(image: IntensityImage, path: Path | str, title: str | None = None) -> None:
    """Render one intensity frame to PNG with physical axes in millimeters."""
    grid = image.grid
    x = grid.x_coords() * 1e3
    y = grid.y_coords() * 1e3
    fig, ax = plt.subplots(figsize=(5.2, 4.4), constrained_layout=True)
    mesh = ax.imshow(
        np.asarray(image.values).T,
        origin="lower",
        extent=(x[0], x[-1], y[0], y[-1]),
        cmap=_CMAP,
        aspect="equal",
        interpolation="nearest",
    )
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    if title:
        ax.set_title(title)
    fig.colorbar(mesh, ax=ax, label="intensity (arb. units)")
    _save_atomic(fig, path)


def render_carpet(
    values: np.ndarray,
    z_samples: np.ndarray,
    coords: np.ndarray,
    path: Path | str,
    transverse_label: str = "y (mm)",
    title: str | None = None,
) -> None:
    """Render a carpet (rows = z) to PNG: transverse coordinate versus distance."""
    values = np.asarray(values, dtype=float)
    z = np.asarray(z_samples, dtype=float)
    c = np.asarray(coords, dtype=float) * 1e3
    if values.shape != (z.size, c.size):
        raise ValueError(f"carpet shape {values.shape} does not match {z.size} z x {c.size} samples")
    z_lo, z_hi = (z[0], z[-1]) if z.size > 1 else (z[0] - 0.5, z[0] + 0.5)
    fig, ax = plt.subplots(figsize=(6.0, 4.2), constrained_layout=True)
    mesh = ax.imshow(
        values,
        origin="lower",
        extent=(c[0], c[-1], z_lo, z_hi),
        cmap=_CMAP,
        aspect="auto",
        interpolation="nearest",
    )
    ax.set_xlabel(transverse_label)
    ax.set_ylabel("z (m)")
    if title:
        ax.set_title(title)
    fig.colorbar(mesh, ax=ax, label="intensity (arb. units)")
    _save_atomic(fig, path)
