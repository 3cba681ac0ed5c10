"""Run manifests: what a command produced, from what configuration.

A manifest is itself INI text with four kinds of sections: [run] (command and
software version), [config:<section>] (verbatim echo of the run file, prefixed
so it round-trips through the same validator), [timings] (per-stage seconds),
and [outputs] (one key per emitted file with its SHA-256 digest).  Analysis
runs append [report:<name>] sections of key=value results.
"""

from __future__ import annotations

import configparser
import hashlib
from pathlib import Path

from .config import RunConfig, config_echo, config_from_parser
from .exceptions import ConfigError
from .pgmio import atomic_write_text

__all__ = [
    "file_digest",
    "write_manifest",
    "read_manifest",
    "config_from_manifest",
]

_CONFIG_PREFIX = "config:"


def file_digest(path: Path | str) -> str:
    """SHA-256 hex digest of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    return cp


def write_manifest(
    path: Path | str,
    command: str,
    version: str,
    config: RunConfig | None,
    timings: dict[str, float],
    outputs: dict[str, str],
    reports: dict[str, dict[str, str]] | None = None,
) -> None:
    """Write the manifest atomically.  ``outputs`` maps file name -> digest."""
    cp = _new_parser()
    cp["run"] = {"command": command, "version": version}
    if config is not None:
        for section, items in config_echo(config).items():
            cp[_CONFIG_PREFIX + section] = items
    cp["timings"] = {key: f"{value:.6f}" for key, value in timings.items()}
    cp["outputs"] = dict(outputs)
    for name, block in (reports or {}).items():
        cp[f"report:{name}"] = dict(block)
    lines: list[str] = []
    for section in cp.sections():
        lines.append(f"[{section}]")
        for key, value in cp.items(section):
            lines.append(f"{key} = {value}")
        lines.append("")
    atomic_write_text(path, "\n".join(lines))


def read_manifest(path: Path | str) -> configparser.ConfigParser:
    """Load a manifest file back into a parser."""
    cp = _new_parser()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"manifest: cannot read {path}: {err}") from err
    cp.read_string(text, source=str(path))
    return cp


def config_from_manifest(path: Path | str) -> RunConfig:
    """Re-validate the [config:*] echo of a manifest into a RunConfig.

    The result compares equal to the RunConfig parsed from the original run
    file, which is the round-trip contract the manifest exists to keep.
    """
    cp = read_manifest(path)
    echo = _new_parser()
    for section in cp.sections():
        if section.startswith(_CONFIG_PREFIX):
            echo[section[len(_CONFIG_PREFIX) :]] = dict(cp.items(section))
    return config_from_parser(echo)
