"""INI run-configuration parsing and validation.

A run file is sectioned key=value text, UTF-8, with all lengths in meters and
angles in radians; scientific notation is accepted anywhere a number is.  Each
command requires a subset of the sections; parsing validates every present
section strictly and reports problems as ``section.key: reason``.

Sections:
    [grid]      nx, ny, extent
    [source]    wavelength, waist (inf = flat), polarization
    [lov]       pairs, spacing | (birefringence, incline), origin_x, origin_y
    [filter]    analyzer, strip_phase
    [propagate] pad_factor, band_limit, planes | chain
    [carpet]    axis, offset, z_start, z_stop, samples
    [outputs]   directory, figures, raw
    [analysis]  spacing, snr, chirality, sigma, signal_fraction,
                border_fraction, background, pairs, chirality_radius
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .grid_field import ANALYZERS, Grid2D, make_grid
from .spinorbit import MaterialParams, lattice_spacing_from_materials

__all__ = [
    "GridConfig",
    "SourceConfig",
    "LovConfig",
    "FilterConfig",
    "PropagateConfig",
    "CarpetConfig",
    "OutputsConfig",
    "AnalysisConfig",
    "RunConfig",
    "parse_config",
    "config_from_parser",
    "config_echo",
]

_KNOWN_SECTIONS = (
    "grid",
    "source",
    "lov",
    "filter",
    "propagate",
    "carpet",
    "outputs",
    "analysis",
)


@dataclass(frozen=True)
class GridConfig:
    nx: int
    ny: int
    extent: float

    def make(self) -> Grid2D:
        return make_grid(self.nx, self.ny, self.extent, self.extent * self.ny / self.nx)


@dataclass(frozen=True)
class SourceConfig:
    wavelength: float
    waist: float
    polarization: str


@dataclass(frozen=True)
class LovConfig:
    pairs: int
    spacing: float
    origin: tuple[float, float]


@dataclass(frozen=True)
class FilterConfig:
    analyzer: str = "L"
    strip_phase: bool = False


@dataclass(frozen=True)
class PropagateConfig:
    pad_factor: int = 2
    band_limit: bool = True
    planes: tuple[float, ...] | None = None
    chain: tuple[tuple[str, object], ...] | None = None


@dataclass(frozen=True)
class CarpetConfig:
    axis: str
    offset: float
    z_start: float
    z_stop: float
    samples: int

    def z_samples(self) -> tuple[float, ...]:
        return tuple(float(z) for z in np.linspace(self.z_start, self.z_stop, self.samples))


@dataclass(frozen=True)
class OutputsConfig:
    directory: str = "out"
    figures: bool = True
    raw: bool = True


@dataclass(frozen=True)
class AnalysisConfig:
    spacing: bool = True
    snr: bool = True
    chirality: bool = False
    sigma: float | str = "adaptive"
    signal_fraction: float = 0.5
    border_fraction: float = 0.05
    background: str | None = None
    pairs: str | tuple[tuple[int, int], ...] = "consecutive"
    chirality_radius: float | str = "auto"


@dataclass(frozen=True)
class RunConfig:
    """Validated run file; sections absent from the file are None (or defaults)."""

    grid: GridConfig | None = None
    source: SourceConfig | None = None
    lov: LovConfig | None = None
    filter: FilterConfig = field(default_factory=FilterConfig)
    propagate: PropagateConfig | None = None
    carpet: CarpetConfig | None = None
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    echo: tuple[tuple[str, tuple[tuple[str, str], ...]], ...] = ()

    def require(self, *sections: str) -> None:
        for name in sections:
            if getattr(self, name) is None:
                raise ConfigError(f"{name}: section [{name}] is required for this command")


class _SectionReader:
    """Typed key access over one raw section, tracking unknown keys."""

    def __init__(self, name: str, raw: dict[str, str]):
        self.name = name
        self.raw = dict(raw)
        self.seen: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.raw

    def _take(self, key: str):
        self.seen.add(key)
        return self.raw[key]

    def error(self, key: str, reason: str) -> ConfigError:
        return ConfigError(f"{self.name}.{key}: {reason}")

    def string(self, key: str, default: str | None = None, choices=None) -> str | None:
        if key not in self.raw:
            if default is not None or choices is None:
                return default
            raise self.error(key, "is required")
        value = self._take(key).strip()
        if choices is not None and value not in choices:
            raise self.error(key, f"must be one of {sorted(choices)}, got {value!r}")
        return value

    def number(
        self,
        key: str,
        default: float | None = None,
        required: bool = False,
        minimum: float | None = None,
        strict_min: float | None = None,
        allow_inf: bool = False,
    ) -> float | None:
        if key not in self.raw:
            if required:
                raise self.error(key, "is required")
            return default
        text = self._take(key).strip()
        try:
            value = float(text)
        except ValueError:
            raise self.error(key, f"must be a number, got {text!r}") from None
        if np.isnan(value) or (not allow_inf and np.isinf(value)):
            raise self.error(key, f"must be finite, got {text}")
        if minimum is not None and value < minimum:
            raise self.error(key, f"must be >= {minimum}, got {value}")
        if strict_min is not None and value <= strict_min:
            raise self.error(key, f"must be > {strict_min}, got {value}")
        return value

    def integer(self, key: str, default: int | None = None, required: bool = False, minimum: int | None = None) -> int | None:
        if key not in self.raw:
            if required:
                raise self.error(key, "is required")
            return default
        text = self._take(key).strip()
        try:
            value = int(text)
        except ValueError:
            raise self.error(key, f"must be an integer, got {text!r}") from None
        if minimum is not None and value < minimum:
            raise self.error(key, f"must be >= {minimum}, got {value}")
        return value

    def boolean(self, key: str, default: bool) -> bool:
        if key not in self.raw:
            return default
        text = self._take(key).strip().lower()
        if text in ("true", "yes", "on", "1"):
            return True
        if text in ("false", "no", "off", "0"):
            return False
        raise self.error(key, f"must be a boolean (true/false), got {text!r}")

    def finish(self) -> None:
        unknown = sorted(set(self.raw) - self.seen)
        if unknown:
            raise ConfigError(f"{self.name}.{unknown[0]}: unknown key")


def _parse_grid(sec: _SectionReader) -> GridConfig:
    nx = sec.integer("nx", required=True, minimum=2)
    ny = sec.integer("ny", default=nx, minimum=2)
    extent = sec.number("extent", required=True, strict_min=0.0)
    sec.finish()
    return GridConfig(nx=nx, ny=ny, extent=extent)


def _parse_source(sec: _SectionReader) -> SourceConfig:
    wavelength = sec.number("wavelength", required=True, strict_min=0.0)
    waist = sec.number("waist", required=True, strict_min=0.0, allow_inf=True)
    polarization = sec.string("polarization", default="R", choices=set(ANALYZERS))
    sec.finish()
    return SourceConfig(wavelength=wavelength, waist=waist, polarization=polarization)


def _parse_lov(sec: _SectionReader, source: SourceConfig | None) -> LovConfig:
    pairs = sec.integer("pairs", required=True, minimum=0)
    has_spacing = sec.has("spacing")
    has_material = sec.has("birefringence") or sec.has("incline")
    if has_spacing and has_material:
        raise sec.error("spacing", "give either spacing or birefringence+incline, not both")
    if has_spacing:
        spacing = sec.number("spacing", required=True, strict_min=0.0)
    elif has_material:
        birefringence = sec.number("birefringence", required=True)
        incline = sec.number("incline", required=True)
        if source is None:
            raise sec.error("birefringence", "needs [source] wavelength to derive the spacing")
        try:
            material = MaterialParams(
                birefringence=birefringence, incline=incline, wavelength=source.wavelength
            )
        except ValueError as err:
            raise sec.error("incline", str(err)) from None
        spacing = lattice_spacing_from_materials(material)
    else:
        raise sec.error("spacing", "give either spacing or birefringence+incline")
    origin = (sec.number("origin_x", default=0.0), sec.number("origin_y", default=0.0))
    sec.finish()
    return LovConfig(pairs=pairs, spacing=spacing, origin=origin)


def _parse_filter(sec: _SectionReader) -> FilterConfig:
    analyzer = sec.string("analyzer", default="L", choices=set(ANALYZERS))
    strip = sec.boolean("strip_phase", default=False)
    sec.finish()
    return FilterConfig(analyzer=analyzer, strip_phase=strip)


def _parse_chain(sec: _SectionReader, text: str) -> tuple[tuple[str, object], ...]:
    elements: list[tuple[str, object]] = []
    snapshots = 0
    for i, part in enumerate(p.strip() for p in text.split(";")):
        if not part:
            continue
        words = part.split()
        kind = words[0].lower()
        if kind == "propagate" and len(words) == 2:
            try:
                z = float(words[1])
            except ValueError:
                raise sec.error("chain", f"element {i + 1}: bad distance {words[1]!r}") from None
            if not (z >= 0.0 and np.isfinite(z)):
                raise sec.error("chain", f"element {i + 1}: distance must be >= 0, got {z}")
            elements.append(("propagate", z))
        elif kind == "lens" and len(words) == 2:
            try:
                f = float(words[1])
            except ValueError:
                raise sec.error("chain", f"element {i + 1}: bad focal length {words[1]!r}") from None
            if f == 0.0 or not np.isfinite(f):
                raise sec.error("chain", f"element {i + 1}: focal length must be nonzero")
            elements.append(("lens", f))
        elif kind == "snapshot" and len(words) == 2:
            name = words[1]
            if not name.replace("-", "").replace("_", "").isalnum():
                raise sec.error("chain", f"element {i + 1}: snapshot name must be alphanumeric/-/_")
            elements.append(("snapshot", name))
            snapshots += 1
        else:
            raise sec.error(
                "chain",
                f"element {i + 1}: expected 'propagate <z>', 'lens <f>' or 'snapshot <name>', got {part!r}",
            )
    if snapshots == 0:
        raise sec.error("chain", "needs at least one snapshot element")
    return tuple(elements)


def _parse_propagate(sec: _SectionReader) -> PropagateConfig:
    pad_factor = sec.integer("pad_factor", default=2, minimum=1)
    band_limit = sec.boolean("band_limit", default=True)
    planes: tuple[float, ...] | None = None
    chain: tuple[tuple[str, object], ...] | None = None
    if sec.has("planes") and sec.has("chain"):
        raise sec.error("planes", "give either planes or chain, not both")
    if sec.has("planes"):
        parts = [p.strip() for p in sec.string("planes").split(",") if p.strip()]
        if not parts:
            raise sec.error("planes", "at least one distance is required")
        values = []
        for p in parts:
            try:
                z = float(p)
            except ValueError:
                raise sec.error("planes", f"bad distance {p!r}") from None
            if not (z >= 0.0 and np.isfinite(z)):
                raise sec.error("planes", f"distances must be >= 0, got {z}")
            values.append(z)
        planes = tuple(values)
    elif sec.has("chain"):
        chain = _parse_chain(sec, sec.string("chain"))
    sec.finish()
    return PropagateConfig(pad_factor=pad_factor, band_limit=band_limit, planes=planes, chain=chain)


def _parse_carpet(sec: _SectionReader) -> CarpetConfig:
    axis = sec.string("axis", choices={"x", "y"})
    offset = sec.number("offset", default=0.0)
    z_start = sec.number("z_start", default=0.0, minimum=0.0)
    z_stop = sec.number("z_stop", required=True, strict_min=0.0)
    samples = sec.integer("samples", required=True, minimum=1)
    if samples > 1 and not z_stop > z_start:
        raise sec.error("z_stop", f"must be > z_start ({z_start}), got {z_stop}")
    sec.finish()
    return CarpetConfig(axis=axis, offset=offset, z_start=z_start, z_stop=z_stop, samples=samples)


def _parse_outputs(sec: _SectionReader) -> OutputsConfig:
    directory = sec.string("directory", default="out")
    figures = sec.boolean("figures", default=True)
    raw = sec.boolean("raw", default=True)
    sec.finish()
    return OutputsConfig(directory=directory, figures=figures, raw=raw)


def _parse_pairs(sec: _SectionReader, text: str):
    if text.strip() == "consecutive":
        return "consecutive"
    pairs = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 2:
            raise sec.error("pairs", f"expected 'i:j' entries or 'consecutive', got {part!r}")
        try:
            i, j = int(bits[0]), int(bits[1])
        except ValueError:
            raise sec.error("pairs", f"bad pair indices {part!r}") from None
        if i < 1 or j < 1:
            raise sec.error("pairs", f"pair indices are 1-based, got {part!r}")
        pairs.append((i, j))
    if not pairs:
        raise sec.error("pairs", "no pairs given")
    return tuple(pairs)


def _parse_analysis(sec: _SectionReader) -> AnalysisConfig:
    spacing = sec.boolean("spacing", default=True)
    do_snr = sec.boolean("snr", default=True)
    chirality = sec.boolean("chirality", default=False)
    if sec.has("sigma"):
        text = sec.string("sigma")
        if text == "adaptive":
            sigma: float | str = "adaptive"
        else:
            try:
                sigma = float(text)
            except ValueError:
                raise sec.error("sigma", f"must be a number or 'adaptive', got {text!r}") from None
            if not sigma > 0.0:
                raise sec.error("sigma", f"must be positive, got {sigma}")
    else:
        sigma = "adaptive"
    signal_fraction = sec.number("signal_fraction", default=0.5)
    if not 0.0 < signal_fraction < 1.0:
        raise sec.error("signal_fraction", f"must lie in (0, 1), got {signal_fraction}")
    border_fraction = sec.number("border_fraction", default=0.05)
    if not 0.0 < border_fraction < 0.5:
        raise sec.error("border_fraction", f"must lie in (0, 0.5), got {border_fraction}")
    background = sec.string("background", default=None)
    pairs = _parse_pairs(sec, sec.string("pairs")) if sec.has("pairs") else "consecutive"
    if sec.has("chirality_radius"):
        text = sec.string("chirality_radius")
        if text == "auto":
            radius: float | str = "auto"
        else:
            try:
                radius = float(text)
            except ValueError:
                raise sec.error("chirality_radius", f"must be a number or 'auto', got {text!r}") from None
            if not radius > 0.0:
                raise sec.error("chirality_radius", f"must be positive, got {radius}")
    else:
        radius = "auto"
    sec.finish()
    return AnalysisConfig(
        spacing=spacing,
        snr=do_snr,
        chirality=chirality,
        sigma=sigma,
        signal_fraction=signal_fraction,
        border_fraction=border_fraction,
        background=background,
        pairs=pairs,
        chirality_radius=radius,
    )


def config_from_parser(cp: configparser.ConfigParser) -> RunConfig:
    """Validate an already-loaded INI parser into a RunConfig."""
    sections = {}
    for name in cp.sections():
        if name not in _KNOWN_SECTIONS:
            raise ConfigError(f"{name}: unknown section [{name}]")
        sections[name] = dict(cp.items(name))

    def reader(name: str) -> _SectionReader | None:
        return _SectionReader(name, sections[name]) if name in sections else None

    source = _parse_source(reader("source")) if "source" in sections else None
    grid = _parse_grid(reader("grid")) if "grid" in sections else None
    lov = _parse_lov(reader("lov"), source) if "lov" in sections else None
    flt = _parse_filter(reader("filter")) if "filter" in sections else FilterConfig()
    prop = _parse_propagate(reader("propagate")) if "propagate" in sections else None
    carp = _parse_carpet(reader("carpet")) if "carpet" in sections else None
    outputs = _parse_outputs(reader("outputs")) if "outputs" in sections else OutputsConfig()
    analysis = _parse_analysis(reader("analysis")) if "analysis" in sections else AnalysisConfig()
    echo = tuple(
        (name, tuple(sorted(sections[name].items()))) for name in _KNOWN_SECTIONS if name in sections
    )
    return RunConfig(
        grid=grid,
        source=source,
        lov=lov,
        filter=flt,
        propagate=prop,
        carpet=carp,
        outputs=outputs,
        analysis=analysis,
        echo=echo,
    )


def parse_config(path: Path | str) -> RunConfig:
    """Read and validate a run file; problems raise ConfigError naming section.key."""
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"config: cannot read {path}: {err}") from err
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as err:
        raise ConfigError(f"config: {err}") from err
    return config_from_parser(cp)


def config_echo(config: RunConfig) -> dict[str, dict[str, str]]:
    """Raw section/key/value mapping as read, for embedding in a manifest."""
    return {name: dict(items) for name, items in config.echo}
