"""Command-line front end.

    qpolscope [--config CFG] [--seed N] [--out DIR] [--threads N] <command> ...

Commands: ``g2-curve``, ``sweep``, ``scan``, ``profile``, ``snr``,
``tags export``, ``tags import``. Exit codes: 0 ok, 2 config/usage error,
3 numeric or fit error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io as qio
from .analysis import (
    FitError,
    UndefinedSNRError,
    detect_dips,
    fit_sinusoid,
    metrics_table,
    normalized_contrast,
    sinusoid_dynamic_range,
    sinusoid_max_sensitivity,
    snr,
)
from .config import ConfigError, build_grid, build_scenario, load_config, resolve_config, sweep_angles
from .correlator import UndefinedResultError, correlate, g2_histogram
from .scan import (
    LineProfile,
    ScanGrid,
    ScanImage,
    line_profile,
    run_point,
    scan_image,
    suggested_profile_lines,
    sweep_analyzer,
)
from .scenario import PS_PER_S
from .seeding import MAX_SEED, child_seed
from .source import synthesize_channels

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

# Published SNR of the hardware demonstration; printed for comparison only.
REFERENCE_SNR = 19.7


class UsageError(ValueError):
    pass


def _echo(out: Path, name: str, cfg: dict) -> None:
    qio.write_json(out / f"{name}.config.json", cfg)


# --- g2-curve --------------------------------------------------------------


def _peak_significance(hist, r_a, r_b, window_ps) -> float:
    """(central counts - accidental expectation) / sqrt(expectation) within +-window/2."""
    central = np.abs(hist.delays_ps) <= window_ps / 2.0
    n_c = float(hist.counts[central].sum())
    mu = r_a * r_b * hist.bin_width_ps / PS_PER_S * hist.duration_ps / PS_PER_S * central.sum()
    return (n_c - mu) / math.sqrt(mu) if mu > 0 else 0.0


def cmd_g2_curve(cfg: dict, out: Path) -> dict:
    gc = cfg["g2_curve"]
    base = build_scenario(cfg).with_(integration_time_s=gc["integration_time_s"])
    curves, meta = [], []
    for k, angle in enumerate(gc["angles_deg"]):
        sc = base.with_(rotating_analyzer_deg=angle)
        a, b = synthesize_channels(sc, child_seed(cfg["seed"], "g2-curve", k))
        hist = g2_histogram(a, b, gc["bin_width_ps"], gc["max_delay_ps"], sc.duration_ps)
        res = correlate(a, b, sc.window_ps, 0, sc.duration_ps)
        sig = _peak_significance(hist, res.r_a_hz, res.r_b_hz, sc.window_ps) if hist.defined else 0.0
        curves.append(hist)
        meta.append(
            {
                "analyzer_deg": angle,
                "g2_zero": res.g2_zero,
                "n_a": res.n_a,
                "n_b": res.n_b,
                "n_ab": res.n_ab,
                "histogram_defined": hist.defined,
                "baseline": hist.baseline,
                "peak_fwhm_ps": hist.peak_fwhm_ps,
                "central_mean_g2": hist.around(sc.window_ps / 2.0),
                "peak_significance_sigma": sig,
                "flat": bool(sig < 5.0),
            }
        )
    if len(curves) == 2:
        names = ["g2_hyper", "g2_super"]
    else:
        names = [f"g2_{fmt_angle(a)}" for a in gc["angles_deg"]]
    tau = curves[0].delays_ps
    rows = zip(tau, *(h.g2 for h in curves))
    qio.write_csv(out / "g2_curve.csv", ["tau_ps", *names], rows)
    report = {"curves": meta, "columns": names, "config": cfg}
    qio.write_json(out / "g2_curve.json", report)
    _echo(out, "g2_curve", cfg)
    return report


def fmt_angle(a: float) -> str:
    return qio.fmt(a).replace(".", "p").replace("-", "m")


# --- sweep -----------------------------------------------------------------


def cmd_sweep(cfg: dict, out: Path) -> dict:
    base = build_scenario(cfg)
    angles = sweep_angles(cfg)
    sweeps = []
    for k, ratio in enumerate(cfg["sweep"]["integration_ratios"]):
        sc = base.with_(integration_time_s=base.integration_time_s * ratio)
        sweeps.append(sweep_analyzer(sc, angles, child_seed(cfg["seed"], "sweep-T", k), cfg["threads"]))
    rows = (
        (sw.integration_time_s, *row)
        for sw in sweeps
        for row in sw.rows()
    )
    qio.write_csv(
        out / "sweep.csv",
        ["integration_time_s", "angle_deg", "coincidence_rate_hz", "g2_zero", "n_a", "n_b", "n_ab"],
        rows,
    )
    per_t = []
    for sw in sweeps:
        fit = fit_sinusoid(sw.points_rate)
        per_t.append(
            {
                "integration_time_s": sw.integration_time_s,
                "n_dips": len(detect_dips(sw.angles_deg, sw.g2_zero)),
                "sinusoid": {
                    "c0": fit.c0,
                    "c1": fit.c1,
                    "theta0_deg": fit.theta0_deg,
                    "minimum_deg": fit.minimum_deg,
                    "rel_residual": fit.rel_residual,
                    "max_sensitivity_per_deg": sinusoid_max_sensitivity(fit, "peak"),
                    "dynamic_range_deg": sinusoid_dynamic_range(fit),
                },
            }
        )
    report = {
        "metrics": [r.as_dict() for r in metrics_table(sweeps)],
        "sweeps": per_t,
        "config": cfg,
    }
    qio.write_json(out / "metrics.json", report)
    _echo(out, "sweep", cfg)
    return report


# --- scan / profile --------------------------------------------------------

PIXEL_HEADER = ["ix", "iy", "x_mm", "y_mm", "coincidence_rate_hz", "g2_zero", "n_a", "n_b", "n_ab"]


def _pixel_rows(img: ScanImage):
    for ix, iy in img.grid.pixels():
        x, y = img.grid.center_mm(ix, iy)
        yield (
            ix, iy, x, y,
            img.coincidence_rate_hz[iy, ix], img.g2_zero[iy, ix],
            img.n_a[iy, ix], img.n_b[iy, ix], img.n_ab[iy, ix],
        )


def _profile_rows(p: LineProfile):
    for i in range(len(p)):
        yield int(p.ix[i]), int(p.iy[i]), p.distance_mm[i], p.coincidence_rate_hz[i], p.g2_zero[i]


PROFILE_HEADER = ["ix", "iy", "distance_mm", "coincidence_rate_hz", "g2_zero"]


def cmd_scan(cfg: dict, out: Path) -> dict:
    sc = build_scenario(cfg).with_(rotating_analyzer_deg=cfg["scan"]["rotating_analyzer_deg"])
    grid = build_grid(cfg)
    img = scan_image(sc, grid, child_seed(cfg["seed"], "scan"), cfg["threads"])
    sidecar = {}
    for name, plane in (("coincidence", img.coincidence_rate_hz), ("g2", img.g2_zero)):
        data, scaling = qio.pgm16_bytes(plane)
        qio.atomic_write_bytes(out / f"scan_{name}.pgm", data)
        sidecar[name] = {"file": f"scan_{name}.pgm", **scaling}
    qio.write_csv(out / "scan_pixels.csv", PIXEL_HEADER, _pixel_rows(img))
    profiles = {}
    try:
        lines = suggested_profile_lines(sc, grid)
    except TypeError:
        lines = {}
    for name, (start, end) in lines.items():
        prof = line_profile(img, start, end)
        qio.write_csv(out / f"profile_{name}.csv", PROFILE_HEADER, _profile_rows(prof))
        profiles[name] = {
            "start_px": list(start),
            "end_px": list(end),
            "coincidence_contrast": normalized_contrast(prof.coincidence_rate_hz, img.coincidence_rate_hz),
            "g2_contrast": normalized_contrast(prof.g2_zero, img.g2_zero),
        }
    meta = {
        "width_px": grid.width_px,
        "height_px": grid.height_px,
        "pitch_mm": grid.pitch_mm,
        "origin_mm": list(grid.origin_mm),
        "row_order": "row 0 = iy 0 (lowest y)",
        "planes": sidecar,
        "seed": img.seed,
        "integration_time_s": img.integration_time_s,
        "window_ps": img.window_ps,
        "undefined_g2_pixels": int((~img.g2_valid).sum()),
        "profiles": profiles,
        "config": cfg,
    }
    qio.write_json(out / "scan.json", meta)
    _echo(out, "scan", cfg)
    return meta


def read_pixels_csv(path) -> ScanImage:
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(PIXEL_HEADER) - set(rows[0]):
        raise qio.TagFileError(f"{path}: not a scan pixel table")
    ix = np.array([int(r["ix"]) for r in rows])
    iy = np.array([int(r["iy"]) for r in rows])
    w, h = ix.max() + 1, iy.max() + 1
    xs = sorted({float(r["x_mm"]) for r in rows})
    ys = sorted({float(r["y_mm"]) for r in rows})
    pitch = (xs[1] - xs[0]) if len(xs) > 1 else ((ys[1] - ys[0]) if len(ys) > 1 else 1.0)
    grid = ScanGrid(int(w), int(h), pitch, (xs[0], ys[0]))
    planes = {k: np.zeros((h, w)) for k in ("coincidence_rate_hz", "g2_zero", "n_a", "n_b", "n_ab")}
    for r, x, y in zip(rows, ix, iy):
        for k in planes:
            planes[k][y, x] = float(r[k])
    return ScanImage(
        grid=grid,
        coincidence_rate_hz=planes["coincidence_rate_hz"],
        g2_zero=planes["g2_zero"],
        g2_valid=np.isfinite(planes["g2_zero"]),
        n_a=planes["n_a"].astype(np.int64),
        n_b=planes["n_b"].astype(np.int64),
        n_ab=planes["n_ab"].astype(np.int64),
        seed=-1,
        integration_time_s=math.nan,
        window_ps=math.nan,
    )


def _pair(text: str) -> tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected IX,IY, got {text!r}") from None
    return x, y


def cmd_profile(cfg: dict, out: Path, pixels: str, start, end, name: str) -> dict:
    img = read_pixels_csv(pixels)
    try:
        prof = line_profile(img, start, end)
    except IndexError as exc:
        raise UsageError(str(exc)) from None
    qio.write_csv(out / f"{name}.csv", PROFILE_HEADER, _profile_rows(prof))
    report = {
        "source": Path(pixels).name,
        "start_px": list(start),
        "end_px": list(end),
        "n_points": len(prof),
        "coincidence_contrast": normalized_contrast(prof.coincidence_rate_hz, img.coincidence_rate_hz),
        "g2_contrast": normalized_contrast(prof.g2_zero, img.g2_zero),
    }
    qio.write_json(out / f"{name}.json", report)
    _echo(out, name, cfg)
    return report


# --- snr -------------------------------------------------------------------


def snr_ensembles(cfg: dict, ratio: float, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Repeated measurements with the sample removed (in) and in place (out)."""
    s = cfg["snr"]
    sc = build_scenario(cfg)
    sc = sc.with_(rotating_analyzer_deg=s["rotating_analyzer_deg"], integration_time_s=sc.integration_time_s * ratio)
    bare = sc.with_(sample=None)
    pick = (lambda r: r.r_ab_hz) if s["quantity"] == "coincidence" else (lambda r: r.r_a_hz)
    s_in = [pick(run_point(bare, child_seed(cfg["seed"], "snr-in", index, i))) for i in range(s["repeats"])]
    s_out = [pick(run_point(sc, child_seed(cfg["seed"], "snr-out", index, i))) for i in range(s["repeats"])]
    return np.array(s_in), np.array(s_out)


def cmd_snr(cfg: dict, out: Path) -> dict:
    base_t = cfg["scenario"]["integration_time_s"]
    rows = []
    for k, ratio in enumerate(cfg["snr"]["integration_ratios"]):
        s_in, s_out = snr_ensembles(cfg, ratio, k)
        rows.append(
            {
                "integration_time_s": base_t * ratio,
                "snr": snr(s_in, s_out),
                "mean_in": float(np.mean(s_in)),
                "mean_out": float(np.mean(s_out)),
                "std_in": float(np.std(s_in, ddof=1)),
                "std_out": float(np.std(s_out, ddof=1)),
            }
        )
    exponent = math.nan
    if len(rows) >= 2:
        t = np.log([r["integration_time_s"] for r in rows])
        v = np.log([r["snr"] for r in rows])
        exponent = float(np.polyfit(t, v, 1)[0])
    report = {
        "quantity": cfg["snr"]["quantity"],
        "rows": rows,
        "sqrt_t_exponent": exponent,
        "reference_snr": REFERENCE_SNR,
        "reference_note": "hardware measurement; reference constant only, not reproduced",
        "config": cfg,
    }
    qio.write_json(out / "snr.json", report)
    _echo(out, "snr", cfg)
    return report


# --- tags ------------------------------------------------------------------


def cmd_tags_export(cfg: dict, out: Path, path: str | None) -> dict:
    sc = build_scenario(cfg)
    a, b = synthesize_channels(sc, child_seed(cfg["seed"], "tags"))
    target = Path(path) if path else out / "tags.qtt"
    if not target.is_absolute() and path:
        target = out / target
    qio.write_tags(target, a, b)
    _echo(out, "tags_export", cfg)
    return {"file": str(target), "n_a": len(a), "n_b": len(b), "duration_ps": a.duration_ps}


def cmd_tags_import(cfg: dict, out: Path, path: str) -> dict:
    a, b = qio.read_tags(path)
    window = cfg["scenario"]["window_ps"]
    report = {"file": Path(path).name, "n_a": len(a), "n_b": len(b), "duration_ps": a.duration_ps}
    if a.duration_ps > 0:
        r = correlate(a, b, window, 0, a.duration_ps)
        report.update(n_ab=r.n_ab, r_a_hz=r.r_a_hz, r_b_hz=r.r_b_hz, r_ab_hz=r.r_ab_hz, g2_zero=r.g2_zero)
    qio.write_json(out / "tags_summary.json", report)
    _echo(out, "tags_import", cfg)
    return report


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qpolscope", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="JSON run configuration (schema_version 1)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit); overrides the config")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads for sweeps and scans")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("g2-curve", help="g2(tau) at two analyzer angles")
    sub.add_parser("sweep", help="analyzer sweeps per integration time + dip metrics")
    sub.add_parser("scan", help="raster images of the sample")
    pr = sub.add_parser("profile", help="line profile through a scan")
    pr.add_argument("--pixels", required=True, help="scan_pixels.csv written by 'scan'")
    pr.add_argument("--start", type=_pair, required=True, metavar="IX,IY")
    pr.add_argument("--end", type=_pair, required=True, metavar="IX,IY")
    pr.add_argument("--name", default="profile", help="output basename")
    sub.add_parser("snr", help="signal-to-noise ratio from repeated points")
    tags = sub.add_parser("tags", help="time-tag file export/import")
    tsub = tags.add_subparsers(dest="tags_command", required=True)
    te = tsub.add_parser("export", help="simulate one point and write its time tags")
    te.add_argument("--file", help="output file (.csv for text, anything else QTT1 binary)")
    ti = tsub.add_parser("import", help="read a time-tag file and correlate it")
    ti.add_argument("file")
    return p


def _resolve(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed <= MAX_SEED:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg["seed"] = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg["threads"] = args.threads
    return resolve_config(cfg)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = _resolve(args)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "g2-curve":
            report = cmd_g2_curve(cfg, out)
        elif args.command == "sweep":
            report = cmd_sweep(cfg, out)
        elif args.command == "scan":
            report = cmd_scan(cfg, out)
        elif args.command == "profile":
            report = cmd_profile(cfg, out, args.pixels, args.start, args.end, args.name)
        elif args.command == "snr":
            report = cmd_snr(cfg, out)
        elif args.tags_command == "export":
            report = cmd_tags_export(cfg, out, args.file)
        else:
            report = cmd_tags_import(cfg, out, args.file)
    except (ConfigError, UsageError) as exc:
        print(f"qpolscope: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except qio.TagFileError as exc:
        print(f"qpolscope: bad input file: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FitError, UndefinedResultError, UndefinedSNRError, ArithmeticError) as exc:
        print(f"qpolscope: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"qpolscope: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    summary = {k: v for k, v in report.items() if k != "config"}
    print(qio.json_text(summary), end="")
    return EXIT_OK


def main() -> None:
    sys.exit(run())
