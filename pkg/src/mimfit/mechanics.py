"""Drum modes of a clamped circular membrane under tensile stress."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .constants import BOLTZMANN
from .special_math import bessel_j, bessel_root, integrate_radial


@dataclass(frozen=True)
class MembraneGeometry:
    radius: float      # m
    thickness: float   # m
    density: float     # kg/m^3
    stress: float      # Pa, tensile

    def __post_init__(self):
        for name in ("radius", "thickness", "density", "stress"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"membrane {name} must be positive and finite, got {value!r}")
        if self.radius / self.thickness <= 100:
            warnings.warn(
                f"radius/thickness = {self.radius / self.thickness:.3g} <= 100; "
                "thin-membrane model is questionable",
                stacklevel=3,
            )


@dataclass(frozen=True)
class ModeId:
    m: int  # azimuthal order
    n: int  # radial index

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"azimuthal order must be an integer >= 0, got {self.m!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"radial index must be an integer >= 1, got {self.n!r}")


@dataclass(frozen=True)
class ThermalEnvironment:
    temperature: float  # K
    boltzmann: float = BOLTZMANN

    def __post_init__(self):
        if not (math.isfinite(self.temperature) and self.temperature >= 0):
            raise ValueError(f"temperature must be >= 0 K, got {self.temperature!r}")


@dataclass
class SpectrumSeries:
    frequencies: np.ndarray  # Hz
    psd: np.ndarray          # m^2/Hz

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        if self.frequencies.shape != self.psd.shape:
            raise ValueError("frequencies and psd must have the same shape")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if np.any(self.psd < 0):
            raise ValueError("psd must be non-negative")


@dataclass
class RingdownTrace:
    times: np.ndarray       # s
    amplitudes: np.ndarray  # m or arbitrary linear units
    drive_frequency: float = math.nan  # Hz; needed only for Q

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.times.shape != self.amplitudes.shape or self.times.ndim != 1:
            raise ValueError("times and amplitudes must be 1-D arrays of equal length")
        if self.times.size < 8:
            raise ValueError(f"a ringdown trace needs at least 8 samples, got {self.times.size}")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("ringdown times must be strictly increasing")
        if not np.all(np.isfinite(self.amplitudes)):
            raise ValueError("ringdown amplitudes must be finite")


class QualityFactor(NamedTuple):
    q: float
    tau: float
    q_sigma: float
    tau_sigma: float


def _as_mode(mode) -> ModeId:
    return mode if isinstance(mode, ModeId) else ModeId(*mode)


def base_frequency(geom: MembraneGeometry) -> float:
    """f0 = sqrt(stress / density) / (2 pi R), the scale of every drum mode."""
    return math.sqrt(geom.stress / geom.density) / (2.0 * math.pi * geom.radius)


def mode_frequency(geom: MembraneGeometry, mode) -> float:
    mode = _as_mode(mode)
    return base_frequency(geom) * bessel_root(mode.m, mode.n)


def physical_mass(geom: MembraneGeometry) -> float:
    return geom.density * math.pi * geom.radius**2 * geom.thickness


def point_mass_ratio(n: int) -> float:
    """M_0n / M for a readout at the membrane centre: J_1(alpha_0n)^2."""
    return bessel_j(1, bessel_root(0, n)) ** 2


def effective_mass_point(geom: MembraneGeometry, n: int) -> float:
    return physical_mass(geom) * point_mass_ratio(n)


def gaussian_overlap(radius: float, n: int, w: float) -> float:
    """Intensity-weighted mean of the (0, n) mode shape J_0(alpha r / R).

    Equals (4 / w^2) * integral_0^R J_0(alpha r/R) exp(-2 r^2 / w^2) r dr,
    which tends to 1 as w -> 0.
    """
    alpha = bessel_root(0, n)
    scale = w * w / 4.0

    def integrand(r):
        return bessel_j(0, alpha * r / radius) * np.exp(-2.0 * (r / w) ** 2) * r

    breaks = [c * w for c in (0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0)]
    return integrate_radial(integrand, 0.0, radius, tol=1e-14 * scale, points=breaks) / scale


def effective_mass_gaussian(geom: MembraneGeometry, n: int, w: float) -> float:
    """Effective mass of mode (0, n) seen by a centred Gaussian beam.

    ``w`` is the 1/e^2 intensity radius. The 4/w^2 normalisation assumes the
    beam is much smaller than the membrane; a warning is issued for w > R/2.
    """
    if not (w > 0 and w < geom.radius):
        raise ValueError(f"readout width must satisfy 0 < w < R, got w={w!r}")
    if w > geom.radius / 2:
        warnings.warn(
            f"readout width {w:.3g} m exceeds R/2; Gaussian normalisation is inaccurate",
            stacklevel=2,
        )
    ratio = point_mass_ratio(n) / gaussian_overlap(geom.radius, n, w) ** 2
    return physical_mass(geom) * ratio


def thermal_peak_area(m_eff: float, f: float, env: ThermalEnvironment) -> float:
    """Equipartition displacement variance k_B T / (m_eff (2 pi f)^2), in m^2."""
    if m_eff <= 0 or f <= 0:
        raise ValueError("effective mass and frequency must be positive")
    return env.boltzmann * env.temperature / (m_eff * (2.0 * math.pi * f) ** 2)


def lorentzian(freqs: np.ndarray, centre: float, fwhm: float, area: float) -> np.ndarray:
    half = 0.5 * fwhm
    return area * (half / math.pi) / ((freqs - centre) ** 2 + half * half)


def synth_psd(
    geom: MembraneGeometry,
    modes: Sequence[tuple],
    env: ThermalEnvironment,
    readout_width: float | None,
    freq_grid,
    floor: float = 0.0,
) -> SpectrumSeries:
    """Thermal displacement spectrum of a set of modes over a flat floor.

    Each entry of ``modes`` is ``(ModeId or (m, n), Q)``. Peaks are
    Lorentzians of width f/Q whose area is the thermal variance for the
    effective mass of the chosen readout (point if ``readout_width`` is None).
    A centred readout does not see m >= 1 modes; those are skipped with a
    warning.
    """
    freqs = np.asarray(freq_grid, dtype=float)
    if freqs.ndim != 1 or freqs.size < 1 or np.any(np.diff(freqs) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    if floor < 0:
        raise ValueError("noise floor must be non-negative")
    psd = np.full_like(freqs, float(floor))
    for mode, q in modes:
        mode = _as_mode(mode)
        if q <= 0:
            raise ValueError(f"quality factor must be positive, got {q!r} for mode {mode}")
        if mode.m != 0:
            warnings.warn(f"mode ({mode.m},{mode.n}) has a node at the centre; not coupled", stacklevel=2)
            continue
        f0 = mode_frequency(geom, mode)
        if readout_width is None:
            m_eff = effective_mass_point(geom, mode.n)
        else:
            m_eff = effective_mass_gaussian(geom, mode.n, readout_width)
        psd += lorentzian(freqs, f0, f0 / q, thermal_peak_area(m_eff, f0, env))
    return SpectrumSeries(freqs, psd)


def q_from_ringdown(trace: RingdownTrace) -> QualityFactor:
    """Fit the amplitude decay time of a driven-then-released mode; Q = pi f tau."""
    from .fitting import fit_exponential_decay

    f = trace.drive_frequency
    if not (math.isfinite(f) and f > 0):
        raise ValueError("ringdown trace needs a positive drive_frequency")
    fit = fit_exponential_decay(trace.times, trace.amplitudes)
    tau = fit.params["tau"]
    tau_sigma = fit.sigmas["tau"]
    return QualityFactor(math.pi * f * tau, tau, math.pi * f * tau_sigma, tau_sigma)
