"""Flat ``key = value`` configuration files and '#'-commented CSV tables."""
from __future__ import annotations

import io
import math
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .mechanics import MembraneGeometry, ThermalEnvironment
from .optics import CavityConfig, OpticalSlab


class ConfigError(ValueError):
    """Malformed or incomplete configuration / data file."""


class Config:
    """Parsed configuration; values stay strings until asked for."""

    def __init__(self, values: dict[str, str], source: str = "<config>"):
        self.values = dict(values)
        self.source = source

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "Config":
        values: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key or not value:
                raise ConfigError(f"{source}:{lineno}: empty key or value in {raw.strip()!r}")
            if key in values:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            values[key] = value
        return cls(values, source)

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        return cls.parse(text, str(path))

    def __contains__(self, key: str) -> bool:
        return key in self.values

    def number(self, key: str, default: float | None = None) -> float:
        if key not in self.values:
            if default is None:
                raise ConfigError(f"{self.source}: missing key {key!r}")
            return default
        try:
            value = float(self.values[key])
        except ValueError:
            raise ConfigError(f"{self.source}: key {key!r} is not a number: {self.values[key]!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"{self.source}: key {key!r} must be finite")
        return value

    def geometry(self) -> MembraneGeometry:
        try:
            return MembraneGeometry(
                radius=self.number("membrane.radius_m"),
                thickness=self.number("membrane.thickness_m"),
                density=self.number("membrane.density_kg_m3"),
                stress=self.number("membrane.stress_pa"),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from None

    def slab(self) -> OpticalSlab:
        try:
            return OpticalSlab(
                n_real=self.number("slab.n_real"),
                thickness=self.number("slab.thickness_m"),
                n_imag=self.number("slab.n_imag", 0.0),
                sigma_opt=self.number("slab.sigma_opt_m", 0.0),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from None

    def cavity(self) -> CavityConfig:
        length = self.number("cavity.length_m")
        wavelength = self.number("cavity.wavelength_m")
        has_f = "cavity.empty_finesse" in self
        has_r = "cavity.mirror_R" in self
        if has_f == has_r:
            raise ConfigError(f"{self.source}: give exactly one of 'cavity.empty_finesse' or 'cavity.mirror_R'")
        try:
            if has_f:
                return CavityConfig.from_finesse(length, wavelength, self.number("cavity.empty_finesse"))
            return CavityConfig(length, wavelength, self.number("cavity.mirror_R"))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from None

    def thermal(self) -> ThermalEnvironment:
        try:
            return ThermalEnvironment(self.number("thermal.temperature_k"))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from None


def format_number(x: float) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(stream: TextIO, columns: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> None:
    for c in comments:
        stream.write(f"# {c}\n")
    stream.write(",".join(columns) + "\n")
    for row in rows:
        stream.write(",".join(format_number(v) for v in row) + "\n")


def csv_text(columns, rows, comments=()) -> str:
    buf = io.StringIO()
    write_csv(buf, columns, rows, comments)
    return buf.getvalue()


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a numeric table: '#' comments, one header line, comma-separated rows."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read data file {path}: {exc.strerror}") from exc
    header = None
    rows = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            header = fields
            continue
        if len(fields) != len(header):
            raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
    if header is None:
        raise ConfigError(f"{path}: no header line")
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def column(header: list[str], data: np.ndarray, name: str, source: str = "data") -> np.ndarray:
    if name not in header:
        raise ConfigError(f"{source}: missing column {name!r} (have {', '.join(header)})")
    return data[:, header.index(name)]
