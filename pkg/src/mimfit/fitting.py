"""Damped Gauss-Newton least squares and the fits built on it.

``least_squares`` is a Levenberg-Marquardt loop with Marquardt's diagonal
scaling and a x10 / /10 damping schedule. When the normal matrix is singular
it falls back to a derivative-free coordinate search before retrying.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .optics import CavityConfig, OpticalSlab, finesse_from_scan
from .special_math import bessel_root

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


class FitError(RuntimeError):
    """The data cannot be fitted (degenerate input, singular problem, unphysical optimum)."""

    def __init__(self, message: str, best: dict | None = None):
        super().__init__(message)
        self.best = best


@dataclass
class FitConfig:
    max_iterations: int = 200
    gradient_tol: float = 1e-10
    step_tol: float = 1e-12
    initial_damping: float = 1e-3
    fd_step: float = 1e-5  # relative step of the central-difference Jacobian

    def __post_init__(self):
        for name in ("max_iterations", "gradient_tol", "step_tol", "initial_damping", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"FitConfig.{name} must be positive")


@dataclass
class FitResult:
    params: dict[str, float]
    sigmas: dict[str, float]
    residual_norm: float
    covariance: np.ndarray
    converged: bool
    iterations: int
    residuals: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    cost_history: list[float] = field(repr=False, default_factory=list)
    weighted: bool = False
    reduced_chi2: float = math.nan
    message: str = ""

    def __getitem__(self, name: str) -> float:
        return self.params[name]


def numerical_jacobian(func: Callable, theta, rel_step: float = 1e-5, f0=None) -> np.ndarray:
    """Central-difference Jacobian of a vector function; steps scale with |theta|."""
    theta = np.asarray(theta, dtype=float)
    cols = []
    for j in range(theta.size):
        h = rel_step * (abs(theta[j]) if theta[j] != 0 else 1.0)
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        cols.append((np.asarray(func(up)) - np.asarray(func(dn))) / (up[j] - dn[j]))
    return np.column_stack(cols)


def _coordinate_search(cost: Callable, theta: np.ndarray, max_evals: int = 400) -> np.ndarray:
    best = cost(theta)
    step = np.where(theta != 0, 0.1 * np.abs(theta), 0.1)
    evals = 0
    while evals < max_evals and np.any(step > 1e-12 * np.maximum(np.abs(theta), 1.0)):
        improved = False
        for j in range(theta.size):
            for sign in (1.0, -1.0):
                trial = theta.copy()
                trial[j] += sign * step[j]
                c = cost(trial)
                evals += 1
                if c < best:
                    theta, best, improved = trial, c, True
                    break
        if not improved:
            step = step / 2
    return theta


def least_squares(
    model: Callable,
    y,
    theta0,
    sigma=None,
    cfg: FitConfig | None = None,
    names: Sequence[str] | None = None,
    jac: Callable | None = None,
) -> FitResult:
    """Minimise sum(w_i (y_i - model(theta)_i)^2), w_i = 1/sigma_i^2 (or 1).

    Convergence is declared when the cosine between the residual vector and
    every Jacobian column drops below ``cfg.gradient_tol``, when the relative
    step drops below ``cfg.step_tol``, or when no descent direction gives a
    decrease above rounding level. Hitting ``max_iterations`` returns a result
    flagged ``converged=False``.

    Parameter sigmas come from (J^T W J)^-1, scaled by the reduced chi-square
    when no data sigmas are given.
    """
    cfg = cfg or FitConfig()
    y = np.asarray(y, dtype=float)
    theta = np.array(theta0, dtype=float)
    p = theta.size
    names = list(names) if names is not None else [f"p{i}" for i in range(p)]
    if y.size == 0:
        raise ValueError("no data to fit")
    weighted = sigma is not None
    if weighted:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != y.shape or not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
            raise ValueError("data sigmas must be positive, finite and one per data point")
        sw = 1.0 / sigma
    else:
        sw = np.ones_like(y)

    def residual(th):
        return (y - np.asarray(model(th), dtype=float)) * sw

    def wjac(th):
        if jac is not None:
            return np.asarray(jac(th), dtype=float) * sw[:, None]
        return numerical_jacobian(lambda t: np.asarray(model(t), dtype=float) * sw, th, cfg.fd_step)

    r = residual(theta)
    if not np.all(np.isfinite(r)):
        raise FitError("model is not finite at the initial parameters")
    chi2 = float(r @ r)
    history = [chi2]
    damping = cfg.initial_damping
    converged = False
    message = "iteration limit reached"
    iterations = 0
    fallback_used = False

    for iterations in range(1, cfg.max_iterations + 1):
        J = wjac(theta)
        g = J.T @ r
        col_norm = np.linalg.norm(J, axis=0)
        r_norm = math.sqrt(chi2)
        if r_norm == 0.0:
            converged, message = True, "exact fit"
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            cosines = np.where(col_norm > 0, np.abs(g) / (col_norm * r_norm), 0.0)
        if np.max(cosines) <= cfg.gradient_tol:
            converged, message = True, "gradient tolerance reached"
            break
        A = J.T @ J
        # rank on unit-norm columns, so parameters of very different size don't look degenerate
        if np.any(col_norm == 0) or np.linalg.matrix_rank(J / col_norm) < p:
            if fallback_used:
                raise FitError("singular normal equations", dict(zip(names, theta)))
            log.debug("singular normal matrix at iteration %d; coordinate search", iterations)
            theta = _coordinate_search(lambda t: float(np.sum(residual(t) ** 2)), theta)
            fallback_used = True
            r = residual(theta)
            chi2 = float(r @ r)
            history.append(chi2)
            continue
        diag = np.maximum(np.diag(A), _EPS * np.max(np.diag(A)))
        while True:
            try:
                delta = np.linalg.solve(A + damping * np.diag(diag), g)
            except np.linalg.LinAlgError:
                damping *= 10
                continue
            trial = theta + delta
            r_trial = residual(trial)
            chi2_trial = float(r_trial @ r_trial) if np.all(np.isfinite(r_trial)) else math.inf
            if chi2_trial < chi2:
                theta, r, chi2 = trial, r_trial, chi2_trial
                history.append(chi2)
                damping = max(damping / 10, 1e-15)
                break
            damping *= 10
            if damping > 1e16:
                break
        if damping > 1e16:
            # no decrease even along the scaled gradient: check what GN could still gain
            gn = np.linalg.lstsq(J, r, rcond=None)[0]
            predicted = float(gn @ g)
            tiny_step = np.linalg.norm(gn) <= 1e-8 * (np.linalg.norm(theta) + 1e-300)
            if predicted <= 1e-10 * chi2 + 1e-300 or tiny_step:
                # residual is at the model's evaluation noise
                converged, message = True, "no further decrease above rounding level"
            else:
                message = "damping overflow without decrease"
            break
        if np.linalg.norm(delta) <= cfg.step_tol * (np.linalg.norm(theta) + cfg.step_tol):
            converged, message = True, "step tolerance reached"
            break

    J = wjac(theta)
    scale = np.linalg.norm(J, axis=0)
    scale[scale == 0] = 1.0
    Js = J / scale
    try:
        cov = np.linalg.inv(Js.T @ Js) / np.outer(scale, scale)
    except np.linalg.LinAlgError as exc:
        raise FitError("singular normal equations at the optimum", dict(zip(names, theta))) from exc
    if not np.all(np.isfinite(cov)):
        raise FitError("singular normal equations at the optimum", dict(zip(names, theta)))
    dof = y.size - p
    red = chi2 / dof if dof > 0 else math.nan
    if not weighted and dof > 0:
        cov = cov * red
    cov = 0.5 * (cov + cov.T)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return FitResult(
        params=dict(zip(names, map(float, theta))),
        sigmas=dict(zip(names, map(float, sig))),
        residual_norm=math.sqrt(chi2),
        covariance=cov,
        converged=converged,
        iterations=iterations,
        residuals=r / sw,
        cost_history=history,
        weighted=weighted,
        reduced_chi2=red,
        message=message,
    )


# --- exponential ringdown ---------------------------------------------------

def _decay_guess(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    span = float(np.ptp(y))
    offset = float(np.min(y)) - 1e-3 * span
    excess = y - offset
    early = excess > 0.05 * float(np.max(excess))
    if np.count_nonzero(early) < 2:
        early = excess > 0
    slope, intercept = np.polyfit(t[early], np.log(excess[early]), 1)
    if not slope < 0:
        raise FitError("trace does not decay")
    return math.exp(intercept), -1.0 / slope, offset


def fit_exponential_decay(times, values, sigma=None, cfg: FitConfig | None = None) -> FitResult:
    """Fit values = A0 exp(-t / tau) + offset; returns params A0, tau, offset."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-D arrays of the same length")
    if t.size < 8:
        raise ValueError(f"need at least 8 samples, got {t.size}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise ValueError("times and values must be finite")
    if np.ptp(y) <= 1e-12 * max(float(np.max(np.abs(y))), 1e-300):
        raise FitError("trace is constant; nothing decays")
    # fit on a shifted time axis so the amplitude is well conditioned
    t0 = float(t[0])
    ts = t - t0
    a_guess, tau_guess, off_guess = _decay_guess(ts, y)

    def model(th):
        a, tau, off = th
        return a * np.exp(-ts / tau) + off

    def jac(th):
        a, tau, off = th
        e = np.exp(-ts / tau)
        return np.column_stack([e, a * e * ts / tau**2, np.ones_like(ts)])

    res = least_squares(model, y, [a_guess, tau_guess, off_guess], sigma=sigma, cfg=cfg,
                        names=["A0", "tau", "offset"], jac=jac)
    a, tau, off = (res.params[k] for k in ("A0", "tau", "offset"))
    if not tau > 0:
        raise FitError(f"fitted decay time is not positive ({tau:.3g} s)", res.params)
    if not a > 0:
        raise FitError("fitted amplitude is not positive; trace rises", res.params)
    if tau > 1e3 * float(ts[-1]):
        raise FitError(f"decay time {tau:.3g} s far exceeds the trace length", res.params)
    if t0 != 0.0:
        # refer A0 back to t = 0 of the caller's axis
        scale = math.exp(t0 / tau)
        T = np.array([[scale, -a * scale * t0 / tau**2, 0.0], [0, 1, 0], [0, 0, 1]])
        res.covariance = T @ res.covariance @ T.T
        res.params["A0"] = a * scale
        res.sigmas = dict(zip(res.sigmas, np.sqrt(np.diag(res.covariance))))
    return res


# --- finesse versus membrane position --------------------------------------

@dataclass(frozen=True)
class FinesseScanPoint:
    z: float                        # m, from cavity centre
    finesse: float
    finesse_sigma: float | None = None

    def __post_init__(self):
        if not self.finesse > 1:
            raise ValueError(f"finesse must exceed 1, got {self.finesse!r}")
        if self.finesse_sigma is not None and not self.finesse_sigma > 0:
            raise ValueError("finesse_sigma must be positive when given")


@dataclass(frozen=True)
class FinesseFitFixed:
    """Parameters held fixed while fitting absorption and roughness."""

    thickness: float        # m
    n_real: float
    cavity_length: float    # m
    wavelength: float       # m
    empty_finesse: float

    def cavity(self) -> CavityConfig:
        return CavityConfig.from_finesse(self.cavity_length, self.wavelength, self.empty_finesse)

    def slab(self, n_imag: float, sigma_opt: float) -> OpticalSlab:
        return OpticalSlab(self.n_real, self.thickness, n_imag, sigma_opt)


# 97 nm circular drum and 50 nm square film, same cavity
CIRCULAR_MEMBRANE = FinesseFitFixed(97e-9, 2.021, 0.0903, 1064e-9, 53518.0)
THIN_SQUARE_MEMBRANE = FinesseFitFixed(50e-9, 2.021, 0.0903, 1064e-9, 53518.0)

FINESSE_FIT_START = (1e-6, 100e-12)  # n_imag, sigma_opt


def finesse_curve(fixed: FinesseFitFixed, n_imag: float, sigma_opt: float, z):
    return finesse_from_scan(fixed.cavity(), fixed.slab(n_imag, sigma_opt), z)


def fit_finesse_curve(
    data: Sequence[FinesseScanPoint],
    fixed: FinesseFitFixed,
    theta0: tuple[float, float] = FINESSE_FIT_START,
    cfg: FitConfig | None = None,
    log_space: bool = True,
) -> FitResult:
    """Fit (n_imag, sigma_opt) to finesse measured at several membrane positions.

    With ``log_space`` the optimiser works on log(n_imag), log(sigma_opt),
    which keeps both positive; reported values, sigmas and covariance are
    always for the physical parameters.
    """
    if len(data) < 4:
        raise ValueError(f"need at least 4 finesse points, got {len(data)}")
    z = np.array([p.z for p in data], dtype=float)
    f = np.array([p.finesse for p in data], dtype=float)
    span = float(np.ptp(z))
    if span < fixed.wavelength / 4 * (1 - 1e-9):
        raise ValueError(f"z span {span:.3g} m is shorter than lambda/4")
    sig = [p.finesse_sigma for p in data]
    if all(s is not None for s in sig):
        sigma = np.array(sig, dtype=float)
    elif any(s is not None for s in sig):
        raise ValueError("finesse_sigma must be given for all points or none")
    else:
        sigma = None
    n0, s0 = theta0
    if log_space:
        if not (n0 > 0 and s0 > 0):
            raise ValueError("log-space fit needs positive starting values")
        start = [math.log(n0), math.log(s0)]

        def model(th):
            return finesse_curve(fixed, math.exp(th[0]), math.exp(th[1]), z)
    else:
        start = [n0, s0]

        def model(th):
            return finesse_curve(fixed, max(th[0], 0.0), max(th[1], 0.0), z)

    res = least_squares(model, f, start, sigma=sigma, cfg=cfg, names=["n_imag", "sigma_opt"])
    if log_space:
        vals = np.exp([res.params["n_imag"], res.params["sigma_opt"]])
        T = np.diag(vals)
        res.covariance = T @ res.covariance @ T
        res.params = {"n_imag": float(vals[0]), "sigma_opt": float(vals[1])}
        res.sigmas = {k: float(s) for k, s in zip(res.params, np.sqrt(np.diag(res.covariance)))}
    return res


# --- modal asymptote -------------------------------------------------------

def fit_f0_asymptote(modes: Sequence[tuple], with_boundary: bool = True,
                     cfg: FitConfig | None = None) -> FitResult:
    """Fit f_mn / alpha_mn = f0 (1 + b / alpha_mn) to measured mode frequencies.

    ``modes`` holds ``((m, n), f_mn)`` pairs. The term b / alpha_mn absorbs a
    clamping-induced shift that fades at high mode order, so f0 is the
    asymptote. ``with_boundary=False`` fixes b = 0 (plain mean of f/alpha).
    """
    need = 3 if with_boundary else 1
    if len(modes) < need:
        raise ValueError(f"need at least {need} modes, got {len(modes)}")
    alpha = []
    freq = []
    for mode, f in modes:
        m, n = (mode.m, mode.n) if hasattr(mode, "m") else mode
        alpha.append(bessel_root(m, n))
        freq.append(float(f))
    alpha = np.array(alpha)
    ratio = np.array(freq) / alpha
    start = float(np.mean(ratio))
    if with_boundary:
        def model(th):
            return th[0] * (1 + th[1] / alpha)

        def jac(th):
            return np.column_stack([1 + th[1] / alpha, th[0] / alpha])

        return least_squares(model, ratio, [start, 0.0], cfg=cfg, names=["f0", "boundary_coeff"], jac=jac)

    def model0(th):
        return np.full_like(ratio, th[0])

    res = least_squares(model0, ratio, [start], cfg=cfg, names=["f0"],
                        jac=lambda th: np.ones((ratio.size, 1)))
    res.params["boundary_coeff"] = 0.0
    res.sigmas["boundary_coeff"] = 0.0
    return res
