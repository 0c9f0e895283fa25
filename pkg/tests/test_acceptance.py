"""Acceptance checks, one per numbered criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
import oracles  # noqa: E402
from mimfit.cli import main as cli_main  # noqa: E402
from mimfit.fitting import (  # noqa: E402
    CIRCULAR_MEMBRANE,
    FINESSE_FIT_START,
    THIN_SQUARE_MEMBRANE,
    FinesseScanPoint,
    finesse_curve,
    fit_exponential_decay,
    fit_finesse_curve,
)
from mimfit.mechanics import (  # noqa: E402
    MembraneGeometry,
    ThermalEnvironment,
    base_frequency,
    effective_mass_gaussian,
    effective_mass_point,
    mode_frequency,
    physical_mass,
    synth_psd,
    thermal_peak_area,
)
from mimfit.optics import (  # noqa: E402
    CavityConfig,
    OpticalSlab,
    cavity_transmission,
    finesse_from_ringdown,
    finesse_from_scan,
    mirror_R_from_finesse,
    resonance_frequencies_ideal,
    slab_coefficients,
)

C = 299792458.0
LAMBDA = 1064e-9
CAV = CavityConfig.from_finesse(0.0903, LAMBDA, 53518.0)
Z40 = np.linspace(0.0, LAMBDA / 2, 40)
TRUTH = {
    "circular": (CIRCULAR_MEMBRANE, 1.97e-6, 287e-12),
    "thin_square": (THIN_SQUARE_MEMBRANE, 1.0e-5, 280e-12),
}


def verdict(number, ok, detail, capsys=None):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


def test_criterion_01_base_frequency(capsys):
    f0 = base_frequency(MembraneGeometry(0.75e-3, 97e-9, 3200.0, 1e9))
    rel = abs(f0 - 118.6e3) / 118.6e3
    verdict(1, rel < 1e-3, f"f0 = {f0 / 1e3:.4f} kHz, {rel:.2e} from 118.6 kHz", capsys)


def test_criterion_02_fundamental(capsys):
    f01 = mode_frequency(MembraneGeometry(0.615e-3, 97e-9, 3200.0, 1e9), (0, 1))
    rel = abs(f01 - 348.5e3) / 348.5e3
    verdict(2, rel < 5e-3, f"f01 = {f01 / 1e3:.3f} kHz, {rel:.2e} from 348.5 kHz", capsys)


def test_criterion_03_mass_ratios(capsys):
    geom = MembraneGeometry(0.75e-3, 97e-9, 3200.0, 1e9)
    printed = [0.269, 0.116, 0.074, 0.054, 0.043]
    ratios = [effective_mass_point(geom, n) / physical_mass(geom) for n in range(1, 6)]
    exact = all(abs(r - oracles.circular_mass_ratio(n)) < 1e-12 for n, r in zip(range(1, 6), ratios))
    # agreement in the third decimal place; the printed 0.269 truncates 0.26951
    third = all(abs(r - p) < 1e-3 for r, p in zip(ratios, printed))
    shown = ", ".join(f"{r:.5f}" for r in ratios)
    verdict(3, exact and third, f"ratios {shown} (printed {printed})", capsys)


def test_criterion_04_finesse_reflectivity(capsys):
    R = mirror_R_from_finesse(53518)
    digits_ok = f"{R:.7g}" == "0.9999413"
    cav = CavityConfig(0.0903, LAMBDA, R)
    f = finesse_from_scan(cav, OpticalSlab(1.0, 0.0), 0.0)
    rel = abs(f - 53518) / 53518
    verdict(4, digits_ok and rel < 1e-3, f"R = {R:.7g}, empty-cavity scan finesse {f:.3f} ({rel:.1e})", capsys)


def _round_trip(key):
    fixed, n_i, sig = TRUTH[key]
    f = finesse_curve(fixed, n_i, sig, Z40)
    t0 = time.perf_counter()
    res = fit_finesse_curve([FinesseScanPoint(z, v) for z, v in zip(Z40, f)], fixed, FINESSE_FIT_START)
    dt = time.perf_counter() - t0
    e1 = abs(res["n_imag"] - n_i) / n_i
    e2 = abs(res["sigma_opt"] - sig) / sig
    return res, e1, e2, dt


def test_criterion_05_finesse_round_trip(capsys):
    parts = []
    ok = True
    for key in TRUTH:
        res, e1, e2, dt = _round_trip(key)
        ok &= res.converged and e1 < 1e-3 and e2 < 1e-3 and dt < 30
        parts.append(f"{key}: n_I {res['n_imag']:.6g} ({e1:.1e}), sigma_opt {res['sigma_opt']:.6g} ({e2:.1e}), {dt:.1f} s")
    verdict(5, ok, "; ".join(parts), capsys)


@pytest.mark.slow
def test_criterion_06_noise_robustness(capsys):
    fixed, n_i, sig = TRUTH["circular"]
    clean = finesse_curve(fixed, n_i, sig, Z40)
    hits = 0
    t0 = time.perf_counter()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        noisy = clean * (1 + 0.01 * rng.standard_normal(clean.size))
        res = fit_finesse_curve([FinesseScanPoint(z, v) for z, v in zip(Z40, noisy)], fixed, FINESSE_FIT_START)
        if (res.converged and abs(res["n_imag"] - n_i) <= 3 * res.sigmas["n_imag"]
                and abs(res["sigma_opt"] - sig) <= 3 * res.sigmas["sigma_opt"]):
            hits += 1
    dt = time.perf_counter() - t0
    verdict(6, hits >= 95 and dt < 600, f"{hits}/100 trials within 3 sigma, {dt:.0f} s", capsys)


def test_criterion_07_energy_conservation(capsys):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        sc = slab_coefficients(OpticalSlab(rng.uniform(1.0, 4.0), rng.uniform(0.0, 2e-6)), LAMBDA)
        worst = max(worst, abs(abs(sc.r_d) ** 2 + abs(sc.t_d) ** 2 - 1))
    lossy = 0
    for _ in range(1000):
        n_imag, sigma = (rng.uniform(1e-7, 1e-3), 0.0) if rng.random() < 0.5 else (0.0, rng.uniform(50e-12, 2e-9))
        sc = slab_coefficients(OpticalSlab(rng.uniform(1.2, 4.0), rng.uniform(20e-9, 2e-6), n_imag, sigma), LAMBDA)
        lossy += abs(sc.r_d) ** 2 + abs(sc.t_d) ** 2 < 1
    verdict(7, worst < 1e-12 and lossy == 1000,
            f"lossless max ||r|^2+|t|^2-1| = {worst:.1e}; lossy strictly < 1 in {lossy}/1000", capsys)


def test_criterion_08_oracle_equivalence(capsys):
    rng = np.random.default_rng(8)
    lossy = OpticalSlab(2.021, 97e-9, 1.97e-6, 287e-12)
    ideal = OpticalSlab(2.021, 97e-9)
    k0 = 2 * math.pi / LAMBDA
    worst = 0.0
    for i in range(20):
        slab = lossy if i % 2 else ideal
        z = rng.uniform(-1e-6, 1e-6)
        if i < 10:
            k = k0 * (1 + rng.uniform(-1e-6, 1e-6))
        else:
            # put half the samples on resonance flanks where the test is hardest
            k = 2 * math.pi * resonance_frequencies_ideal(CAV, ideal, z)[0] / C * (1 + rng.uniform(-2e-11, 2e-11))
        r, t = oracles.slab_rt_matching(complex(slab.n_real, slab.n_imag), slab.thickness, k)
        r *= math.exp(-0.5 * (2 * k * slab.sigma_opt) ** 2)
        want = oracles.cavity_transmission_sum(CAV.mirror_R, CAV.length, z, k, r, t, slab.thickness)
        worst = max(worst, abs(cavity_transmission(CAV, slab, z, k) - want) / want)
    worst_peak = 0.0
    for z in rng.uniform(-LAMBDA / 2, LAMBDA / 2, 4):
        trans = lambda nu, z=z: cavity_transmission(CAV, ideal, z, 2 * np.pi * np.asarray(nu) / C)
        nu0 = C / LAMBDA
        peaks, _ = oracles.brute_force_peaks(trans, nu0 - 0.6 * CAV.fsr, nu0 + 0.6 * CAV.fsr, 700_001)
        for nu in resonance_frequencies_ideal(CAV, ideal, z):
            best = min(peaks, key=lambda p: abs(p - nu))
            fwhm = oracles.fwhm_brute(trans, best, CAV.fsr / 53518)
            worst_peak = max(worst_peak, abs(best - nu) / fwhm)
    verdict(8, worst < 1e-8 and worst_peak < 1e-2,
            f"transmission vs round-trip sum {worst:.1e}; resonance vs argmax {worst_peak:.1e} FWHM", capsys)


def test_criterion_09_quarter_wave_period(capsys):
    z = np.linspace(0, LAMBDA / 4, 41)
    fixed, n_i, sig = TRUTH["circular"]
    a = finesse_curve(fixed, n_i, sig, z)
    b = finesse_curve(fixed, n_i, sig, z + LAMBDA / 4)
    worst = float(np.max(np.abs(a - b) / a))
    verdict(9, worst < 1e-3, f"max |F(z) - F(z + lambda/4)| / F = {worst:.1e}", capsys)


def test_criterion_10_limits(capsys):
    geom = MembraneGeometry(0.75e-3, 97e-9, 3200.0, 1e9)
    mass_err = max(abs(effective_mass_gaussian(geom, n, geom.radius / 1000) / effective_mass_point(geom, n) - 1)
                   for n in range(1, 6))
    env = ThermalEnvironment(300.0)
    area_err = 0.0
    q = 1e3
    for n in range(1, 6):
        f = mode_frequency(geom, (0, n))
        grid = np.linspace(f - 300 * f / q, f + 300 * f / q, 200_001)
        spec = synth_psd(geom, [((0, n), q)], env, 0.15e-3, grid)
        want = thermal_peak_area(effective_mass_gaussian(geom, n, 0.15e-3), f, env)
        area_err = max(area_err, abs(oracles.lorentz_area(spec.frequencies, spec.psd) / want - 1))
    verdict(10, mass_err < 1e-3 and area_err < 1e-2,
            f"narrow-beam mass {mass_err:.1e} from point; PSD peak areas within {area_err:.1e}", capsys)


def test_criterion_11_ringdown(capsys):
    t = np.linspace(0, 30e-6, 400)
    tau = fit_exponential_decay(t, 0.7 * np.exp(-t / 5.131e-6))["tau"]
    tau_err = abs(tau / 5.131e-6 - 1)
    f = finesse_from_ringdown(5.131e-6, 0.0903)
    f_err = abs(f / 53518 - 1)
    verdict(11, tau_err < 1e-9 and f_err < 1e-3, f"tau error {tau_err:.1e}; F_T = {f:.1f} ({f_err:.1e})", capsys)


CONFIG = """\
slab.n_real = {n_real!r}
slab.thickness_m = {thickness!r}
slab.n_imag = {n_imag!r}
slab.sigma_opt_m = {sigma!r}
cavity.length_m = {length!r}
cavity.wavelength_m = {wavelength!r}
cavity.empty_finesse = {finesse!r}
"""


def _cli(args, capsys):
    code = cli_main([str(a) for a in args])
    out, _ = capsys.readouterr()
    return code, out


def test_criterion_12_cli_end_to_end(tmp_path, capsys):
    parts = []
    ok = True
    for key, (fixed, n_i, sig) in TRUTH.items():
        cfg = tmp_path / f"{key}.cfg"
        cfg.write_text(CONFIG.format(n_real=fixed.n_real, thickness=fixed.thickness, n_imag=n_i, sigma=sig,
                                     length=fixed.cavity_length, wavelength=fixed.wavelength,
                                     finesse=fixed.empty_finesse))
        scans = []
        for run in (1, 2):
            path = tmp_path / f"{key}_{run}.csv"
            code, _ = _cli(["scan", "--config", cfg, "--z-min", 0, "--z-max", LAMBDA / 2, "--z-steps", 40,
                            "--out", path], capsys)
            ok &= code == 0
            scans.append(path.read_bytes())
        same = scans[0] == scans[1]
        code, out = _cli(["finesse-fit", tmp_path / f"{key}_1.csv", "--config", cfg], capsys)
        rep = json.loads(out)
        e1 = abs(rep["outputs"]["n_imag"]["value"] / n_i - 1)
        e2 = abs(rep["outputs"]["sigma_opt"]["value"] / sig - 1)
        ok &= code == 0 and same and e1 < 1e-3 and e2 < 1e-3
        parts.append(f"{key}: byte-identical={same}, n_I {e1:.1e}, sigma_opt {e2:.1e}")
    verdict(12, ok, "; ".join(parts), capsys)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
