"""Plane-wave optics of a thin dielectric slab between two identical mirrors.

Conventions follow the slab coefficients

    r_d = (n^2 - 1) sin(beta) / (2 i n cos(beta) + (n^2 + 1) sin(beta))
    t_d = 2 n / (2 i n cos(beta) + (n^2 + 1) sin(beta)),   beta = n k L_d

and the membrane-in-the-middle transmission

    T_c = |T t_d|^2 / |1 + 2 r_d sqrt(R) cos(2 k z) e^{ikL} + R (t_d^2 + r_d^2) e^{2ikL}|^2

with z measured from the cavity centre. Close to a resonance the denominator
is a difference of O(1) terms of size ~1/F, so the transmission is evaluated
in numpy's extended precision (80-bit on x86-64). That keeps the finesse
repeatable to ~1e-15 relative, which finite-difference fitting relies on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import SPEED_OF_LIGHT

_LD = np.longdouble
_CLD = np.clongdouble
_PI_LD = _LD("3.141592653589793238462643383279502884")
_TWO_PI_LD = 2 * _PI_LD


class PeakSearchError(ArithmeticError):
    """A transmission peak or its half-maximum points could not be bracketed."""


class ResonanceSolverError(ArithmeticError):
    """Self-consistent resonance iteration did not converge."""


@dataclass(frozen=True)
class OpticalSlab:
    n_real: float
    thickness: float            # m
    n_imag: float = 0.0
    sigma_opt: float = 0.0      # m, effective optical roughness

    def __post_init__(self):
        if not self.n_real >= 1:
            raise ValueError(f"n_real must be >= 1, got {self.n_real!r}")
        if not self.n_imag >= 0:
            raise ValueError(f"n_imag must be >= 0, got {self.n_imag!r}")
        # zero thickness is allowed: it is the empty-cavity limit
        if not self.thickness >= 0:
            raise ValueError(f"thickness must be >= 0, got {self.thickness!r}")
        if not self.sigma_opt >= 0:
            raise ValueError(f"sigma_opt must be >= 0, got {self.sigma_opt!r}")

    @property
    def index(self) -> complex:
        return complex(self.n_real, self.n_imag)

    @property
    def lossless(self) -> bool:
        return self.n_imag == 0 and self.sigma_opt == 0


@dataclass(frozen=True)
class CavityConfig:
    length: float       # m
    wavelength: float   # m
    mirror_R: float     # intensity reflectivity of each mirror

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"cavity length must be positive, got {self.length!r}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength!r}")
        if not 0 < self.mirror_R < 1:
            raise ValueError(f"mirror_R must lie in (0, 1), got {self.mirror_R!r}")

    @classmethod
    def from_finesse(cls, length: float, wavelength: float, finesse: float) -> "CavityConfig":
        return cls(length, wavelength, mirror_R_from_finesse(finesse))

    @property
    def mirror_T(self) -> float:
        return 1.0 - self.mirror_R

    @property
    def fsr(self) -> float:
        return free_spectral_range(self.length)

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def empty_finesse(self) -> float:
        return finesse_from_mirror_R(self.mirror_R)


@dataclass(frozen=True)
class SlabCoefficients:
    r_d: complex
    t_d: complex
    beta: complex

    @property
    def phi_r(self) -> float:
        return math.atan2(self.r_d.imag, self.r_d.real)


def free_spectral_range(length: float) -> float:
    return SPEED_OF_LIGHT / (2.0 * length)


def mirror_R_from_finesse(finesse: float) -> float:
    """Invert F = pi sqrt(R) / (1 - R) for R in (0, 1)."""
    if not finesse > 1:
        raise ValueError(f"finesse must exceed 1, got {finesse!r}")
    s = 2.0 * finesse / (math.pi + math.sqrt(math.pi**2 + 4.0 * finesse**2))
    return s * s


def finesse_from_mirror_R(mirror_R: float) -> float:
    if not 0 < mirror_R < 1:
        raise ValueError(f"mirror_R must lie in (0, 1), got {mirror_R!r}")
    return math.pi * math.sqrt(mirror_R) / (1.0 - mirror_R)


def finesse_from_ringdown(tau: float, cav) -> float:
    """F = pi c tau / L; ``cav`` is a CavityConfig or a cavity length in m."""
    if not tau > 0:
        raise ValueError(f"decay time must be positive, got {tau!r}")
    length = getattr(cav, "length", cav)
    return math.pi * SPEED_OF_LIGHT * tau / length


def roughness_factor(sigma_opt, k):
    """Field attenuation sqrt(exp(-(2 k sigma)^2)) applied to r_d."""
    return np.exp(-0.5 * (2.0 * k * sigma_opt) ** 2)


def _slab_rt(n, thickness, sigma_opt, k):
    beta = n * k * thickness
    sb = np.sin(beta)
    cb = np.cos(beta)
    den = 2j * n * cb + (n * n + 1) * sb
    r = (n * n - 1) * sb / den * roughness_factor(sigma_opt, k)
    t = 2 * n / den
    return r, t, beta


def slab_coefficients(slab: OpticalSlab, wavelength: float) -> SlabCoefficients:
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    k = 2.0 * math.pi / wavelength
    r, t, beta = _slab_rt(slab.index, slab.thickness, slab.sigma_opt, k)
    return SlabCoefficients(complex(r), complex(t), complex(beta))


class _CavityModel:
    """Extended-precision evaluator of the transmission for fixed cavity and slab."""

    def __init__(self, cav: CavityConfig, slab: OpticalSlab):
        self.length = _LD(cav.length)
        self.R = _LD(cav.mirror_R)
        self.sqrt_R = np.sqrt(self.R)
        self.T = _LD(1) - self.R
        self.n = _CLD(complex(slab.n_real, slab.n_imag))
        self.thickness = _LD(slab.thickness)
        self.sigma = _LD(slab.sigma_opt)
        self.k0 = _TWO_PI_LD / _LD(cav.wavelength)
        self.phase0 = np.fmod(self.k0 * self.length, _TWO_PI_LD)

    def coefficients(self, k):
        return _slab_rt(self.n, self.thickness, self.sigma, k)

    def transmission(self, k, x, z):
        """T_c at wavenumber k, with x = exp(i k L) supplied separately."""
        r, t, _ = self.coefficients(k)
        c = np.cos(2 * k * z)
        den = 1 + 2 * r * self.sqrt_R * c * x + self.R * (t * t + r * r) * x * x
        return self.T * self.T * (t.real**2 + t.imag**2) / (den.real**2 + den.imag**2)

    def quadratic_roots(self, z):
        """Roots in x = exp(ikL) of the denominator, with coefficients frozen at k0."""
        r, t, _ = self.coefficients(self.k0)
        a = self.R * (t * t + r * r)
        b = 2 * r * self.sqrt_R * np.cos(2 * self.k0 * z)
        disc = np.sqrt(b * b - 4 * a)
        # pick the sign that avoids cancellation
        disc = np.where((b.real * disc.real + b.imag * disc.imag) >= 0, disc, -disc)
        q = -(b + disc) / 2
        return q / a, 1 / q


def cavity_transmission(cav: CavityConfig, slab: OpticalSlab, z, k):
    """Intensity transmission of the cavity with the membrane at z (from centre).

    ``z`` and ``k`` broadcast against each other.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.abs(z_arr) >= cav.length / 2):
        raise ValueError("membrane position must satisfy |z| < L/2")
    model = _CavityModel(cav, slab)
    k_ld = np.asarray(k, dtype=_LD)
    phase = np.fmod(k_ld * model.length, _TWO_PI_LD)
    out = model.transmission(k_ld, np.exp(1j * phase), z_arr.astype(_LD))
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _golden_max(f, lo, hi, iterations=48):
    """Vectorised golden-section search for the maximum of f on [lo, hi]."""
    g = (np.sqrt(_LD(5)) - 1) / 2
    c = hi - g * (hi - lo)
    d = lo + g * (hi - lo)
    fc = f(c)
    fd = f(d)
    for _ in range(iterations):
        keep_left = fc > fd
        hi = np.where(keep_left, d, hi)
        lo = np.where(keep_left, lo, c)
        probe = np.where(keep_left, hi - g * (hi - lo), lo + g * (hi - lo))
        fp = f(probe)
        c, d, fc, fd = (
            np.where(keep_left, probe, d),
            np.where(keep_left, c, probe),
            np.where(keep_left, fp, fd),
            np.where(keep_left, fc, fp),
        )
    return np.where(fc > fd, c, d)


def _illinois(g, a, b, ga, gb, scale, max_iter=200):
    """Vectorised Illinois root search on brackets with g(a) > 0 > g(b)."""
    side = np.zeros(a.shape, dtype=int)
    c = a
    done = np.zeros(a.shape, dtype=bool)
    for _ in range(max_iter):
        c = np.where(done, c, (a * gb - b * ga) / (gb - ga))
        gc = g(c)
        pos = gc > 0
        zero = gc == 0
        a_new = np.where(pos & ~done, c, a)
        b_new = np.where(~pos & ~zero & ~done, c, b)
        gb = np.where(pos & (side == 1) & ~done, gb / 2, gb)
        ga = np.where(~pos & (side == -1) & ~done, ga / 2, ga)
        ga = np.where(pos & ~done, gc, ga)
        gb = np.where(~pos & ~zero & ~done, gc, gb)
        side = np.where(done, side, np.where(pos, 1, -1))
        a, b = a_new, b_new
        done = done | zero | (np.abs(b - a) <= 1e-17 * scale)
        if np.all(done):
            break
    return c


def finesse_from_scan(cav: CavityConfig, slab: OpticalSlab, z):
    """Finesse FSR / FWHM of the transmission resonance nearest c/lambda.

    Of the two resonances in each two-FSR window the longer-lived one (also
    the brighter) is measured; the choice makes the result periodic in z with
    period lambda/4. The peak is located by golden-section search and the
    half-maximum points by Illinois root search, all in phase offset from the
    seed so the linewidth is resolved well below double precision.

    ``z`` may be a scalar or an array; the return type follows.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    if np.any(np.abs(z_arr) >= cav.length / 2):
        raise ValueError("membrane position must satisfy |z| < L/2")
    model = _CavityModel(cav, slab)
    zl = z_arr.astype(_LD)
    x1, x2 = model.quadratic_roots(zl)
    rho1 = np.log(np.abs(x1))
    rho2 = np.log(np.abs(x2))
    if np.any(rho1 <= 0) or np.any(rho2 <= 0):
        raise PeakSearchError("resonance pole on or inside the unit circle; cavity has gain")
    narrow = np.where(rho1 <= rho2, x1, x2)
    rho = np.minimum(rho1, rho2)
    ref = np.angle(narrow) - model.phase0
    ref = np.fmod(ref + 3 * _PI_LD, _TWO_PI_LD) - _PI_LD
    anchor = np.exp(1j * (model.phase0 + ref))
    width = 2 * rho  # FWHM estimate in kL units

    def trans(v, zz=zl, rr=ref, xx=anchor):
        k = model.k0 + (rr + v) / model.length
        return model.transmission(k, xx * np.exp(1j * v), zz)

    v_peak = _golden_max(trans, -width, width)
    t_peak = trans(v_peak)
    if np.any(np.abs(v_peak) > 0.99 * width):
        raise PeakSearchError("transmission maximum not inside the search bracket")
    half = t_peak / 2

    # both half-maximum points in one vector: left half then right half
    zz = np.concatenate([zl, zl])
    rr = np.concatenate([ref, ref])
    xx = np.concatenate([anchor, anchor])
    hh = np.concatenate([half, half])
    ww = np.concatenate([width, width])
    start = np.concatenate([v_peak, v_peak])
    far = start + np.concatenate([-4 * width, 4 * width])

    def g(v):
        return trans(v, zz, rr, xx) - hh

    g_start = g(start)
    g_far = g(far)
    if np.any(g_far >= 0) or np.any(g_start <= 0):
        raise PeakSearchError("half-maximum points not bracketed within 4 linewidths")
    edges = _illinois(g, start, far, g_start, g_far, ww)
    n = zl.size
    fwhm = edges[n:] - edges[:n]
    finesse = np.asarray(_PI_LD / fwhm, dtype=float)
    if np.ndim(z) == 0:
        return float(finesse[0])
    return finesse.reshape(np.shape(z))


def resonance_frequencies_ideal(
    cav: CavityConfig,
    slab: OpticalSlab,
    z: float,
    window: tuple[float, float] | None = None,
    max_iter: int = 100,
) -> list[float]:
    """Resonance frequencies (Hz) of a lossless membrane inside perfect mirrors.

    Solves 2kL = -2 phi_r + 2 arccos(-|r_d| cos 2kz) (both arccos branches,
    modulo 2 pi) with r_d and phi_r re-evaluated at each iterate. ``window``
    is a half-open frequency interval, by default one FSR centred on c/lambda.
    """
    if slab.n_imag != 0:
        raise ValueError("ideal resonance condition requires a real refractive index (n_imag = 0)")
    if slab.sigma_opt != 0:
        raise ValueError("ideal resonance condition requires sigma_opt = 0")
    if abs(z) >= cav.length / 2:
        raise ValueError("membrane position must satisfy |z| < L/2")
    fsr = cav.fsr
    nu0 = SPEED_OF_LIGHT / cav.wavelength
    lo, hi = window if window is not None else (nu0 - fsr / 2, nu0 + fsr / 2)
    L = cav.length
    n = slab.index

    def phases(k):
        r, t, _ = _slab_rt(n, slab.thickness, 0.0, k)
        r = complex(r)
        if r == 0:
            # vanishing slab: t_d^2 + r_d^2 = exp(2 i phi_r) still fixes the phase
            phi = 0.5 * np.angle(complex(t) ** 2)
        else:
            phi = np.angle(r)
        return abs(r), float(phi)

    # kL = q * pi at nu = q * FSR; 2 pi in kL spans two FSRs
    q_lo = math.floor(lo / fsr / 2) - 1
    q_hi = math.ceil(hi / fsr / 2) + 1
    found = []
    for q in range(q_lo, q_hi + 1):
        for sign in (1.0, -1.0):
            k = 2 * math.pi * (q * 2 * fsr) / SPEED_OF_LIGHT
            for _ in range(max_iter):
                mag, phi = phases(k)
                kl = sign * math.acos(-mag * math.cos(2 * k * z)) - phi + 2 * math.pi * q
                k_new = kl / L
                if abs(k_new - k) <= 4e-16 * abs(k):
                    k = k_new
                    break
                k = k_new
            else:
                raise ResonanceSolverError(f"no convergence for branch {sign:+.0f}, order {q}")
            nu = k * SPEED_OF_LIGHT / (2 * math.pi)
            if lo <= nu < hi:
                found.append(nu)
    return sorted(found)
