"""Command-line front end.

Every subcommand writes a CSV table (to --out, or to stdout when --out is
absent) and/or a JSON report on stdout. Errors print one line to stderr,
``mimfit: error E_<CODE>: <text>``, and exit with

    2  usage or configuration error
    3  fit did not converge
    4  numerical failure (degenerate data, quadrature, peak search)
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import Config, ConfigError, column, csv_text, read_csv
from .fitting import (
    FINESSE_FIT_START,
    FinesseFitFixed,
    FinesseScanPoint,
    FitConfig,
    FitError,
    fit_exponential_decay,
    fit_f0_asymptote,
    fit_finesse_curve,
)
from .mechanics import (
    ModeId,
    base_frequency,
    effective_mass_gaussian,
    effective_mass_point,
    mode_frequency,
    physical_mass,
    synth_psd,
)
from .optics import (
    OpticalSlab,
    finesse_from_ringdown,
    finesse_from_scan,
    resonance_frequencies_ideal,
)
from .constants import SPEED_OF_LIGHT
from .special_math import bessel_root

log = logging.getLogger("mimfit")

EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_NUMERIC = 4


class UsageError(ValueError):
    pass


class NotConverged(RuntimeError):
    def __init__(self, report):
        super().__init__("fit did not converge")
        self.report = report


class FailedRun(RuntimeError):
    def __init__(self, exc, report):
        super().__init__(str(exc))
        self.report = report


def _report(command, inputs):
    from .report import RunReport

    rep = RunReport(command=command, inputs=inputs)
    rep.stamp("mimfit", __version__)
    return rep


def _emit_table(args, columns, rows, comments):
    text = csv_text(columns, rows, comments)
    if args.out:
        Path(args.out).write_text(text)
        return True
    sys.stdout.write(text)
    return False


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def _config(args) -> Config:
    if not args.config:
        raise UsageError(f"'{args.command}' needs --config")
    return Config.load(args.config)


# --- subcommands -----------------------------------------------------------

def cmd_modes(args):
    cfg = _config(args)
    geom = cfg.geometry()
    if args.max_m < 0 or args.max_n < 0:
        raise UsageError("--max-m and --max-n must be >= 0")
    f0 = base_frequency(geom)
    rows = []
    for m in range(args.max_m + 1):
        for n in range(1, args.max_n + 1):
            alpha = bessel_root(m, n)
            rows.append((m, n, alpha, f0 * alpha))
    comments = [f"mimfit {__version__} modes", f"f0_hz={f0!r}"]
    if _emit_table(args, ["m", "n", "alpha_mn", "f_hz"], rows, comments):
        rep = _report("modes", {"config": cfg.values, "max_m": args.max_m, "max_n": args.max_n})
        rep.add("f0", f0, "Hz")
        rep.diagnostics["rows"] = len(rows)
        rep.diagnostics["table"] = args.out
        return rep
    return None


def cmd_effmass(args):
    cfg = _config(args)
    geom = cfg.geometry()
    if args.n_max < 0:
        raise UsageError("--n-max must be >= 0")
    mass = physical_mass(geom)
    columns = ["n", "alpha_0n", "mass_point_kg", "ratio_point"]
    if args.w is not None:
        columns += ["mass_gauss_kg", "ratio_gauss"]
    rows = []
    for n in range(1, args.n_max + 1):
        mp = effective_mass_point(geom, n)
        row = [n, bessel_root(0, n), mp, mp / mass]
        if args.w is not None:
            mg = effective_mass_gaussian(geom, n, args.w)
            row += [mg, mg / mass]
        rows.append(row)
    comments = [f"mimfit {__version__} effmass", f"physical_mass_kg={mass!r}"]
    if args.w is not None:
        comments.append(f"readout_width_m={args.w!r}")
    if _emit_table(args, columns, rows, comments):
        rep = _report("effmass", {"config": cfg.values, "w": args.w, "n_max": args.n_max})
        rep.add("physical_mass", mass, "kg")
        rep.diagnostics["table"] = args.out
        return rep
    return None


def _resonance_shift(cav, slab, z):
    ideal = OpticalSlab(slab.n_real, slab.thickness)
    fsr = cav.fsr
    nu_q = round(SPEED_OF_LIGHT / cav.wavelength / fsr) * fsr
    found = resonance_frequencies_ideal(cav, ideal, z, window=(nu_q - fsr, nu_q + fsr))
    return min((nu - nu_q for nu in found), key=abs)


def cmd_scan(args):
    cfg = _config(args)
    cav = cfg.cavity()
    slab = cfg.slab()
    if args.z_steps < 1:
        raise UsageError("--z-steps must be >= 1")
    if args.z_steps == 1:
        z = np.array([args.z_min])
    else:
        if not args.z_max > args.z_min:
            raise UsageError("--z-max must exceed --z-min")
        z = np.linspace(args.z_min, args.z_max, args.z_steps)
    finesse = finesse_from_scan(cav, slab, z)
    if args.noise:
        rng = np.random.default_rng(args.seed)
        finesse = finesse * (1 + args.noise * rng.standard_normal(finesse.size))
    shift = [_resonance_shift(cav, slab, zi) for zi in z]
    rows = list(zip(z, finesse, shift))
    comments = [
        f"mimfit {__version__} scan",
        f"n_real={slab.n_real!r} n_imag={slab.n_imag!r} thickness_m={slab.thickness!r} sigma_opt_m={slab.sigma_opt!r}",
        f"length_m={cav.length!r} wavelength_m={cav.wavelength!r} mirror_R={cav.mirror_R!r}",
    ]
    if args.noise:
        comments.append(f"multiplicative_noise={args.noise!r} seed={args.seed!r}")
    if _emit_table(args, ["z_m", "finesse", "resonance_shift_hz"], rows, comments):
        rep = _report("scan", {"config": cfg.values, "z_min": args.z_min, "z_max": args.z_max,
                               "z_steps": args.z_steps, "noise": args.noise, "seed": args.seed})
        rep.add("finesse_min", float(np.min(finesse)), "1")
        rep.add("finesse_max", float(np.max(finesse)), "1")
        rep.add("empty_finesse", cav.empty_finesse, "1")
        rep.diagnostics["table"] = args.out
        return rep
    return None


def cmd_finesse_fit(args):
    cfg = _config(args)
    header, data = read_csv(args.data)
    z = column(header, data, "z_m", args.data)
    f = column(header, data, "finesse", args.data)
    has_sigma = "finesse_sigma" in header
    sig = column(header, data, "finesse_sigma", args.data) if has_sigma else [None] * len(z)
    try:
        points = [FinesseScanPoint(zi, fi, None if s is None else float(s)) for zi, fi, s in zip(z, f, sig)]
    except ValueError as exc:
        raise ConfigError(f"{args.data}: {exc}") from None
    fixed = FinesseFitFixed(
        thickness=cfg.number("slab.thickness_m"),
        n_real=cfg.number("slab.n_real"),
        cavity_length=cfg.number("cavity.length_m"),
        wavelength=cfg.number("cavity.wavelength_m"),
        empty_finesse=cfg.cavity().empty_finesse,
    )
    start = (cfg.number("fit.n_imag0", FINESSE_FIT_START[0]), cfg.number("fit.sigma_opt0_m", FINESSE_FIT_START[1]))
    fit_cfg = FitConfig(max_iterations=int(cfg.number("fit.max_iterations", 200)))
    rep = _report("finesse-fit", {"config": cfg.values, "data": str(args.data), "points": len(points),
                                  "start": {"n_imag": start[0], "sigma_opt": start[1]}})
    try:
        res = fit_finesse_curve(points, fixed, start, fit_cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep.add("n_imag", res.params["n_imag"], "1", res.sigmas["n_imag"])
    rep.add("sigma_opt", res.params["sigma_opt"], "m", res.sigmas["sigma_opt"])
    rep.add("residual_norm", res.residual_norm, "1")
    rep.diagnostics.update(converged=res.converged, iterations=res.iterations, message=res.message,
                           weighted=res.weighted, reduced_chi2=_finite_or_none(res.reduced_chi2))
    if has_sigma:
        rep.warnings.append("finesse_sigma column present: weighted fit, sigmas not rescaled by chi-square")
    if args.out:
        model = f - res.residuals
        Path(args.out).write_text(csv_text(
            ["z_m", "finesse", "model", "residual"], zip(z, f, model, res.residuals),
            [f"mimfit {__version__} finesse-fit residuals"]))
        rep.diagnostics["table"] = args.out
    if not res.converged:
        raise NotConverged(rep)
    return rep


def cmd_ringdown(args):
    header, data = read_csv(args.data)
    t = column(header, data, "time_s", args.data)
    a = column(header, data, "amplitude", args.data)
    cfg = Config.load(args.config) if args.config else Config({}, "<none>")
    inputs = {"config": cfg.values, "data": str(args.data), "mode": args.mode}
    rep = _report("ringdown", inputs)
    if args.mode == "optical":
        length = cfg.number("cavity.length_m")
    else:
        drive = args.drive_frequency if args.drive_frequency is not None else cfg.number("ringdown.drive_frequency_hz")
        if not drive > 0:
            raise UsageError("drive frequency must be positive")
        inputs["drive_frequency_hz"] = drive
    try:
        fit = fit_exponential_decay(t, a)
    except FitError as exc:
        raise FailedRun(exc, rep) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    tau, tau_s = fit.params["tau"], fit.sigmas["tau"]
    rep.add("tau", tau, "s", tau_s)
    rep.add("A0", fit.params["A0"], "a.u.", fit.sigmas["A0"])
    rep.add("offset", fit.params["offset"], "a.u.", fit.sigmas["offset"])
    if args.mode == "optical":
        rep.add("finesse", finesse_from_ringdown(tau, length), "1", finesse_from_ringdown(tau_s, length) if tau_s > 0 else 0.0)
    else:
        rep.add("Q", math.pi * drive * tau, "1", math.pi * drive * tau_s)
    rep.diagnostics.update(converged=fit.converged, iterations=fit.iterations, message=fit.message)
    if not fit.converged:
        raise NotConverged(rep)
    return rep


def _parse_modes(text):
    modes = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            m, n = (int(v) for v in item.split(":"))
            modes.append(ModeId(m, n))
        except ValueError:
            raise UsageError(f"bad mode {item!r}; expected m:n with m >= 0, n >= 1") from None
    return modes


def _parse_grid(text):
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected fmin:fmax:count") from None
    if count < 2 or not hi > lo or lo < 0:
        raise UsageError("frequency grid must be increasing: need 0 <= fmin < fmax and count >= 2")
    return np.linspace(lo, hi, count)


def cmd_psd(args):
    cfg = _config(args)
    geom = cfg.geometry()
    env = cfg.thermal()
    modes = _parse_modes(args.modes)
    try:
        qs = [float(q) for q in args.q.split(",")] if args.q else []
    except ValueError:
        raise UsageError(f"bad --q list {args.q!r}") from None
    if len(qs) == 1:
        qs = qs * len(modes)
    if len(qs) != len(modes):
        raise UsageError("--q needs one value, or one per mode")
    grid = _parse_grid(args.grid)
    floor = args.floor if args.floor is not None else cfg.number("psd.floor_m2_per_hz", 0.0)
    spec = synth_psd(geom, list(zip(modes, qs)), env, args.w, grid, floor)
    comments = [f"mimfit {__version__} psd", f"temperature_k={env.temperature!r} floor_m2_per_hz={floor!r}"]
    if _emit_table(args, ["f_hz", "psd_m2_per_hz"], zip(spec.frequencies, spec.psd), comments):
        rep = _report("psd", {"config": cfg.values, "modes": args.modes, "q": args.q, "grid": args.grid, "w": args.w})
        for mode in modes:
            rep.add(f"f_{mode.m}{mode.n}", mode_frequency(geom, mode), "Hz")
        rep.diagnostics["table"] = args.out
        return rep
    return None


def cmd_fit_f0(args):
    header, data = read_csv(args.data)
    m = column(header, data, "m", args.data).astype(int)
    n = column(header, data, "n", args.data).astype(int)
    f = column(header, data, "f_hz", args.data)
    rep = _report("fit-f0", {"data": str(args.data), "boundary": not args.no_boundary})
    try:
        res = fit_f0_asymptote([((mi, ni), fi) for mi, ni, fi in zip(m, n, f)], with_boundary=not args.no_boundary)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep.add("f0", res.params["f0"], "Hz", res.sigmas["f0"])
    rep.add("boundary_coeff", res.params["boundary_coeff"], "1", res.sigmas["boundary_coeff"])
    rep.diagnostics.update(converged=res.converged, iterations=res.iterations, message=res.message)
    if not res.converged:
        raise NotConverged(rep)
    return rep


# --- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--out", metavar="PATH", help="write the CSV table here")
    common.add_argument("--seed", type=int, default=0, help="seed for synthetic noise")
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mimfit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mimfit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modes", parents=[common], help="drum-mode frequencies")
    p.add_argument("--max-m", type=int, default=3)
    p.add_argument("--max-n", type=int, default=5)
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("effmass", parents=[common], help="effective masses of the (0, n) modes")
    p.add_argument("--w", type=float, help="Gaussian readout 1/e^2 radius, m")
    p.add_argument("--n-max", type=int, default=5)
    p.set_defaults(func=cmd_effmass)

    p = sub.add_parser("scan", parents=[common], help="finesse versus membrane position")
    p.add_argument("--z-min", type=float, default=0.0)
    p.add_argument("--z-max", type=float, default=532e-9)
    p.add_argument("--z-steps", type=int, default=40)
    p.add_argument("--noise", type=float, default=0.0, help="relative Gaussian noise on the finesse")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("finesse-fit", parents=[common], help="fit n_imag and sigma_opt to a finesse scan")
    p.add_argument("data", help="CSV with z_m, finesse[, finesse_sigma]")
    p.set_defaults(func=cmd_finesse_fit)

    p = sub.add_parser("ringdown", parents=[common], help="fit an exponential ringdown")
    p.add_argument("data", help="CSV with time_s, amplitude")
    p.add_argument("--mode", choices=["optical", "mechanical"], required=True)
    p.add_argument("--drive-frequency", type=float, help="mechanical mode frequency, Hz")
    p.set_defaults(func=cmd_ringdown)

    p = sub.add_parser("psd", parents=[common], help="synthetic thermal displacement spectrum")
    p.add_argument("--modes", default="", help="comma list of m:n")
    p.add_argument("--q", default="", help="one Q, or one per mode")
    p.add_argument("--grid", required=True, help="fmin:fmax:count")
    p.add_argument("--w", type=float, help="Gaussian readout radius, m (point readout if omitted)")
    p.add_argument("--floor", type=float, help="flat background, m^2/Hz")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("fit-f0", parents=[common], help="asymptotic f0 from measured mode frequencies")
    p.add_argument("data", help="CSV with m, n, f_hz")
    p.add_argument("--no-boundary", action="store_true", help="fit f0 only (b = 0)")
    p.set_defaults(func=cmd_fit_f0)
    return parser


def _fail(code: str, message: str, status: int) -> int:
    text = " ".join(str(message).split())
    print(f"mimfit: error E_{code}: {text}", file=sys.stderr)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            rep = args.func(args)
        except ConfigError as exc:
            return _fail("CONFIG", exc, EXIT_USAGE)
        except UsageError as exc:
            return _fail("USAGE", exc, EXIT_USAGE)
        except NotConverged as exc:
            rep = exc.report
            rep.status = "not_converged"
            rep.warnings += [str(w.message) for w in caught]
            print(rep.to_json())
            return _fail("NOCONV", "fit did not converge", EXIT_NO_CONVERGENCE)
        except FailedRun as exc:
            rep = exc.report
            rep.status = "failed"
            rep.diagnostics["error"] = str(exc)
            rep.warnings += [str(w.message) for w in caught]
            print(rep.to_json())
            return _fail("FIT", exc, EXIT_NUMERIC)
        except FitError as exc:
            return _fail("FIT", exc, EXIT_NUMERIC)
        except ArithmeticError as exc:
            return _fail("NUMERIC", exc, EXIT_NUMERIC)
        except ValueError as exc:
            return _fail("USAGE", exc, EXIT_USAGE)
    if rep is not None:
        rep.warnings += [str(w.message) for w in caught]
        print(rep.to_json())
    for w in caught:
        log.warning("%s", w.message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
