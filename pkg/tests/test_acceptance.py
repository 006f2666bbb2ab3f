"""Acceptance criteria 1-10, each reported as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from qpolscope.analysis import (
    DIP_SLOPE_FACTOR,
    detect_dips,
    fit_dip_window,
    fit_gaussian_dip,
    fit_sinusoid,
    fit_sinusoid_free_period,
    gaussian_dip,
    max_sensitivity,
    metrics_table,
    normalized_contrast,
    sinusoid_dynamic_range,
    sinusoid_max_sensitivity,
    snr,
)
from qpolscope.analysis import DipFit
from qpolscope.cli import REFERENCE_SNR, run, snr_ensembles
from qpolscope.config import resolve_config
from qpolscope.correlator import correlate, count_coincidences
from qpolscope.scan import (
    ScanGrid,
    expected_rates,
    line_profile,
    run_point,
    scan_image,
    suggested_profile_lines,
    sweep_analyzer,
)
from qpolscope.scenario import PS_PER_S, Scenario
from qpolscope.seeding import child_seed
from qpolscope.source import TimeTagStream, poisson_stream

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

SEED = 20240729


def report(n: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {name}  [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_poisson_baseline():
    # warm the compiled kernels so the timing covers the work, not the JIT
    correlate(poisson_stream(1e3, 10**9, 0), poisson_stream(1e3, 10**9, 1), 15_000)
    t0 = time.perf_counter()
    dur = int(PS_PER_S)
    a = poisson_stream(1e5, dur, child_seed(SEED, "c1", 0))
    b = poisson_stream(1e5, dur, child_seed(SEED, "c1", 1))
    r = correlate(a, b, 15_000, 0, dur)
    elapsed = time.perf_counter() - t0
    # sigma from the Poisson spread of the accidental count
    sigma = 1.0 / math.sqrt(r.r_a_hz * r.r_b_hz * 15e-9 * r.duration_s)
    dev = abs(r.g2_zero - 1.0) / sigma
    ok = dev < 5 and elapsed < 1.0
    report(1, "Poisson baseline g2(0)=1", ok, f"g2={r.g2_zero:.4f}, {dev:.2f} sigma, {elapsed:.3f} s")


def _brute_greedy(a: np.ndarray, b: np.ndarray, window: int) -> int:
    """O(N^2) reference: every A in time order takes the earliest free B in range."""
    if a.size == 0 or b.size == 0:
        return 0
    h = window // 2
    inside = np.abs(a[:, None] - b[None, :]) <= h
    free = np.ones(b.size, dtype=bool)
    n = 0
    for row in inside:
        hit = np.flatnonzero(row & free)
        if hit.size:
            free[hit[0]] = False
            n += 1
    return n


def test_criterion_02_correlator_oracle():
    rng = np.random.default_rng(child_seed(SEED, "c2"))
    mismatches = 0
    for _ in range(1000):
        na, nb = rng.integers(0, 501, size=2)
        span = int(rng.integers(10_000, 5_000_000))
        w = int(rng.integers(1, 30_000))
        a = np.sort(rng.integers(0, span + 1, na))
        b = np.sort(rng.integers(0, span + 1, nb))
        got = count_coincidences(TimeTagStream(a, span), TimeTagStream(b, span), w)
        mismatches += got != _brute_greedy(a, b, w)
    report(2, "streaming count == brute force", mismatches == 0, f"{mismatches}/1000 mismatches")


def test_criterion_03_hyper_super_contrast():
    t0 = time.perf_counter()
    sc = Scenario(integration_time_s=1.0)
    out = {}
    for k, (name, angle) in enumerate((("hyper", 110.0), ("super", 20.0))):
        s = sc.with_(rotating_analyzer_deg=angle)
        r = run_point(s, child_seed(SEED, "c3", k))
        e = expected_rates(s)
        # Poisson error of the expected coincidence count; singles errors are
        # positively correlated with it and largely cancel in the ratio
        sigma = e.g2_zero / math.sqrt(e.r_ab_hz * s.integration_time_s)
        out[name] = (r.g2_zero, e.g2_zero, abs(r.g2_zero - e.g2_zero) / sigma)
    elapsed = time.perf_counter() - t0
    gh, gs = out["hyper"][0], out["super"][0]
    ok = gh > 10 and gh > 10 * gs and out["hyper"][2] < 5 and out["super"][2] < 5 and elapsed < 30
    detail = (f"hyper {gh:.2f} (oracle {out['hyper'][1]:.2f}, {out['hyper'][2]:.2f} sigma), "
              f"super {gs:.2f} (oracle {out['super'][1]:.2f}, {out['super'][2]:.2f} sigma), {elapsed:.1f} s")
    report(3, "hyper/super contrast", ok, detail)


def test_criterion_04_sweep_shape():
    sc = Scenario()
    sw = sweep_analyzer(sc, np.arange(0.0, 222.0, 2.0), child_seed(SEED, "c4"))
    fixed = fit_sinusoid(sw.points_rate)
    free = fit_sinusoid_free_period(sw.points_rate)
    dips = detect_dips(sw.angles_deg, sw.g2_zero)
    centers = [fit_dip_window(sw.angles_deg, sw.g2_zero, d).xc_deg for d in dips]
    minima = [fixed.minimum_deg + k * 180.0 for k in range(-1, 3)]
    offsets = [min(abs(c - m) for m in minima) for c in centers]
    ok = (
        fixed.rel_residual < 0.05
        and abs(free.period_deg - 180.0) <= 1.0
        and len(dips) == 2
        and all(o <= 2.0 for o in offsets)
    )
    detail = (f"rel residual {fixed.rel_residual:.4f}, period {free.period_deg:.3f} deg, "
              f"{len(dips)} dips at {', '.join(f'{c:.2f}' for c in centers)}, "
              f"r_ab minimum {fixed.minimum_deg:.2f}, max offset {max(offsets, default=math.nan):.2f} deg")
    report(4, "sweep shape", ok, detail)


def test_criterion_05_dip_fit_recovery():
    true = np.array([30.0, -28.0, 20.0, 21.0])
    x = np.linspace(-40.0, 80.0, 50)
    clean = gaussian_dip(x, *true)
    exact = fit_gaussian_dip(np.column_stack([x, clean]))
    err_clean = float(np.max(np.abs(exact.params - true) / np.abs(true)))
    worst = 0.0
    for k in range(20):
        rng = np.random.default_rng(child_seed(SEED, "c5", k))
        noisy = clean * (1.0 + 0.03 * rng.standard_normal(x.size))
        fit = fit_gaussian_dip(np.column_stack([x, noisy]))
        worst = max(worst, float(np.max(np.abs(fit.params - true) / np.abs(true))))
    ok = err_clean < 1e-6 and worst < 0.05
    report(5, "dip fit recovery", ok, f"noiseless rel err {err_clean:.2e}, 3% noise worst rel err {worst:.4f}")


def test_criterion_06_sensitivity_formulas():
    th = np.arange(0.0, 221.0, 1.0)
    fit = fit_sinusoid(np.column_stack([th, 5e4 * np.cos(np.radians(th - 20.0)) ** 2]))
    grad = sinusoid_max_sensitivity(fit, "peak")
    lobe = sinusoid_dynamic_range(fit)
    e_grad = abs(grad - math.pi / 180) / (math.pi / 180)
    e_lobe = abs(lobe - 90.0) / 90.0

    worst = 0.0
    for a, fwhm in ((-1.0, 10.0), (-28.0, 21.0), (-59.0, 6.0)):
        dip = DipFit(30.0, a, 20.0, fwhm)
        h = 1e-4

        def neg_slope(xv):
            return -abs(float(gaussian_dip(xv + h, *dip.params) - gaussian_dip(xv - h, *dip.params))) / (2 * h)

        res = minimize_scalar(neg_slope, bounds=(20.0 - fwhm, 20.0), method="bounded",
                              options={"xatol": 1e-10})
        analytic = max_sensitivity(dip, "none")
        worst = max(worst, abs(analytic - (-res.fun)) / analytic)
    stated = 1.42823
    ok = e_grad < 1e-6 and e_lobe < 1e-6 and worst < 1e-9
    detail = (f"gradient rel err {e_grad:.1e}, lobe FWHM {lobe:.9f} deg, dip slope factor "
              f"{DIP_SLOPE_FACTOR:.7f} vs numeric rel err {worst:.1e} "
              f"(quoted {stated} differs by {abs(DIP_SLOPE_FACTOR - stated) / stated:.1e})")
    report(6, "sensitivity formulas", ok, detail)


def test_criterion_07_table_trend():
    ratios = (1, 2, 4, 8)
    base = Scenario()
    angles = np.arange(0.0, 222.0, 2.0)
    med = []
    for k, ratio in enumerate(ratios):
        sc = base.with_(integration_time_s=base.integration_time_s * ratio)
        sweeps = [sweep_analyzer(sc, angles, child_seed(SEED, "c7", k, s), workers=4) for s in range(20)]
        rows = [r for r in metrics_table(sweeps) if r.present]
        med.append(float(np.median([r.residual_std_pct for r in rows])))
    ratio_obs = [med[0] / m for m in med]
    ratio_exp = [math.sqrt(r) for r in ratios]
    consistent = all(0.5 <= o / e <= 2.0 for o, e in zip(ratio_obs, ratio_exp))
    monotone = med[0] >= med[1] >= med[2]
    detail = (f"median residual_std_pct {', '.join(f'{m:.2f}' for m in med)}; "
              f"1x/kx {', '.join(f'{o:.2f}' for o in ratio_obs)} vs sqrt(k) {', '.join(f'{e:.2f}' for e in ratio_exp)}")
    report(7, "error falls like 1/sqrt(T)", consistent and monotone, detail)


def test_criterion_08_imaging():
    t0 = time.perf_counter()
    sc = Scenario(rotating_analyzer_deg=24.0)
    grid = ScanGrid()
    img = scan_image(sc, grid, child_seed(SEED, "c8"), workers=4)
    sample = sc.sample
    phi, r_px, rate, mount_acc = [], [], [], 0.0
    for ix, iy in grid.pixels():
        x, y = grid.center_mm(ix, iy)
        r = math.hypot(x, y)
        if 2.0 < r < sample.radius_mm - 1.0:
            phi.append(sample.azimuth_deg((x, y)))
            rate.append(img.coincidence_rate_hz[iy, ix])
        elif r > sample.radius_mm + 1.0:
            r_px.append((ix, iy))
            mount_acc += expected_rates(sc.with_(beam_position_mm=(x, y))).r_ab_hz
    order = np.argsort(phi)
    phi, rate = np.asarray(phi)[order], np.asarray(rate)[order]
    fit = fit_sinusoid(np.column_stack([phi, rate]))
    resid = rate - fit(phi)
    r2 = 1.0 - float(resid @ resid) / float(np.sum((rate - rate.mean()) ** 2))

    n_mount = int(sum(img.n_ab[iy, ix] for ix, iy in r_px))
    mu = mount_acc * sc.integration_time_s
    mount_ok = abs(n_mount - mu) < 5 * math.sqrt(mu) + 1

    contrast = {}
    for name, (start, end) in suggested_profile_lines(sc, grid).items():
        prof = line_profile(img, start, end)
        contrast[name] = (normalized_contrast(prof.g2_zero, img.g2_zero),
                          normalized_contrast(prof.coincidence_rate_hz, img.coincidence_rate_hz))
    g2_wins = any(g > c for g, c in contrast.values())
    coinc_wins = any(c > g for g, c in contrast.values())
    elapsed = time.perf_counter() - t0
    ok = r2 > 0.9 and mount_ok and g2_wins and coinc_wins and elapsed < 300
    detail = (f"azimuthal cos^2 R^2 {r2:.3f} (period 180, min at {fit.minimum_deg:.1f} deg); mount n_ab {n_mount} "
              f"vs accidental {mu:.1f}; contrasts g2/coinc "
              + ", ".join(f"{k} {g:.2f}/{c:.2f}" for k, (g, c) in contrast.items())
              + f"; {elapsed:.1f} s")
    report(8, "imaging", ok, detail)


def test_criterion_09_snr():
    hand = snr([100, 102, 98], [50, 49, 51])
    cfg = resolve_config({})
    s1 = snr(*snr_ensembles(cfg, 1.0, 0))
    s4 = snr(*snr_ensembles(cfg, 4.0, 1))
    ratio = s4 / s1
    ok = abs(hand - 22.3607) < 1e-4 and 2.0 / 1.5 <= ratio <= 3.0
    detail = (f"hand example {hand:.4f}; SNR {s1:.2f} -> {s4:.2f} under 4x (ratio {ratio:.2f}); "
              f"reference {REFERENCE_SNR} shown, not asserted")
    report(9, "SNR", ok, detail)


def _tree(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_criterion_10_determinism(tmp_path):
    commands = [["g2-curve"], ["sweep"], ["scan"], ["snr"], ["tags", "export", "--file", "tags.qtt"],
                ["tags", "export", "--file", "tags.csv"]]
    trees, codes = [], []
    for k in range(2):
        out = tmp_path / f"run{k}"
        for cmd in commands:
            codes.append(run(["--seed", "7", "--out", str(out), *cmd]))
        codes.append(run(["--out", str(out), "profile", "--pixels", str(out / "scan_pixels.csv"),
                          "--start", "0,15", "--end", "29,15"]))
        codes.append(run(["--out", str(out), "tags", "import", str(out / "tags.qtt")]))
        trees.append(_tree(out))
    diff = sorted(n for n in trees[0] if trees[0][n] != trees[1].get(n))
    ok = not diff and set(trees[0]) == set(trees[1]) and all(c == 0 for c in codes)
    report(10, "CLI determinism", ok, f"{len(trees[0])} files compared, differing: {diff or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
