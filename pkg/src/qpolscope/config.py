"""JSON run configuration: strict validation, explicit defaults, echo-able.

A config file is a JSON object with ``"schema_version": 1``; every other key is
optional and falls back to :data:`DEFAULTS`. Unknown keys are errors. The fully
resolved dict (``resolve_config``) is written next to every command's outputs and
can be fed back with ``--config`` to reproduce them.
"""

from __future__ import annotations

import copy
import json
import math
import re
from typing import Any, Optional

from .optics import Clear, Opaque, Retarder, SpiralRetarderSample, UniformSample
from .scan import ScanGrid
from .scenario import DEFAULT_BEAM_POSITION_MM, DetectorModel, Scenario, SourceModel

SCHEMA_VERSION = 1

_DETECTOR = {"efficiency": 0.5, "dark_rate_hz": 500.0, "dead_time_ps": 50_000.0, "jitter_sigma_ps": 350.0}

DEFAULTS: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "seed": 20240729,
    "threads": 1,
    "scenario": {
        "source": {
            "pair_rate_hz": 450e3,
            "coherence_time_ps": 1000.0,
            "pair_jitter_sigma_ps": 12_700.0,
            "stray_rate_hz": 500.0,
        },
        "det_a": dict(_DETECTOR),
        "det_b": dict(_DETECTOR),
        "sample": {
            "kind": "spiral",
            "order_m": 1,
            "retardance_deg": 180.0,
            "center_mm": [0.0, 0.0],
            "radius_mm": 12.7,
            "outside": {"kind": "opaque"},
        },
        "sample_arm": "A",
        "fixed_analyzer_deg": 0.0,
        "rotating_analyzer_deg": 110.0,
        "beam_position_mm": list(DEFAULT_BEAM_POSITION_MM),
        "window_ps": 15_000.0,
        "integration_time_s": 0.02,
    },
    "g2_curve": {
        "angles_deg": [110.0, 20.0],
        "integration_time_s": 1.0,
        "bin_width_ps": 2000,
        "max_delay_ps": 200_000,
    },
    "sweep": {
        "start_deg": 0.0,
        "stop_deg": 220.0,
        "step_deg": 2.0,
        "integration_ratios": [1.0, 2.0, 4.0, 8.0],
    },
    "scan": {
        "width_px": 30,
        "height_px": 30,
        "pitch_mm": 1.0,
        "origin_mm": [-14.5, -14.5],
        "rotating_analyzer_deg": 24.0,
    },
    "snr": {
        "repeats": 40,
        "rotating_analyzer_deg": 20.0,
        "integration_ratios": [1.0, 4.0],
        "quantity": "coincidence",
    },
}

_ELEMENT_KINDS = ("clear", "opaque", "retarder")
_SAMPLE_KINDS = ("spiral", "uniform")
_CHOICES = {
    ("scenario", "sample_arm"): ("A", "B"),
    ("snr", "quantity"): ("coincidence", "singles_a"),
}
_POSITIVE = {
    ("scenario", "window_ps"),
    ("scenario", "integration_time_s"),
    ("g2_curve", "integration_time_s"),
    ("g2_curve", "bin_width_ps"),
    ("sweep", "step_deg"),
    ("scan", "width_px"),
    ("scan", "height_px"),
    ("scan", "pitch_mm"),
    ("snr", "repeats"),
}


class ConfigError(ValueError):
    """Invalid configuration; message carries the JSON path and line number."""


def _line_of(text: Optional[str], path: tuple) -> Optional[int]:
    """Best-effort line number of the innermost key of ``path`` in ``text``."""
    if not text:
        return None
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.start()
    return text.count("\n", 0, pos) + 1


class _Validator:
    def __init__(self, text: Optional[str]):
        self.text = text

    def fail(self, path: tuple, msg: str):
        where = ".".join(str(p) for p in path) or "<root>"
        line = _line_of(self.text, path)
        prefix = f"line {line}: " if line else ""
        raise ConfigError(f"{prefix}{where}: {msg}")

    def merge(self, default, value, path: tuple):
        if isinstance(default, dict):
            if not isinstance(value, dict):
                self.fail(path, "expected an object")
            if path and path[-1] in ("sample", "outside", "element") and "kind" in value:
                return self.element_like(value, path)
            out = copy.deepcopy(default)
            for k, v in value.items():
                if k not in default:
                    self.fail(path + (k,), "unknown key")
                out[k] = self.merge(default[k], v, path + (k,))
            return out
        if isinstance(default, list):
            if not isinstance(value, list) or not value:
                self.fail(path, "expected a non-empty array")
            if path[-1] in ("center_mm", "origin_mm", "beam_position_mm") and len(value) != 2:
                self.fail(path, "expected [x, y]")
            return [self.scalar(default[0], v, path + (i,)) for i, v in enumerate(value)]
        return self.scalar(default, value, path)

    def scalar(self, default, value, path: tuple):
        if isinstance(default, bool):
            if not isinstance(value, bool):
                self.fail(path, "expected true/false")
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(path, "expected an integer")
            if value < 0:
                self.fail(path, "must be >= 0")
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                self.fail(path, "expected a finite number")
            value = float(value)
        elif isinstance(default, str):
            if not isinstance(value, str):
                self.fail(path, "expected a string")
            choices = _CHOICES.get(path[-2:]) if len(path) >= 2 else None
            if choices and value not in choices:
                self.fail(path, f"must be one of {list(choices)}")
        if path[-2:] in _POSITIVE and not value > 0:
            self.fail(path, "must be > 0")
        return value

    def element_like(self, value: dict, path: tuple):
        kind = value.get("kind")
        if path[-1] == "sample":
            if kind not in _SAMPLE_KINDS:
                self.fail(path + ("kind",), f"must be one of {list(_SAMPLE_KINDS)}")
            if kind == "spiral":
                base = dict(DEFAULTS["scenario"]["sample"])
            else:
                base = {"kind": "uniform", "element": {"kind": "clear"}}
        else:
            if kind not in _ELEMENT_KINDS:
                self.fail(path + ("kind",), f"must be one of {list(_ELEMENT_KINDS)}")
            base = {"kind": kind}
            if kind == "retarder":
                base.update(retardance_deg=180.0, fast_axis_deg=0.0)
        out = copy.deepcopy(base)
        for k, v in value.items():
            if k not in base:
                self.fail(path + (k,), "unknown key")
            if k == "kind":
                continue
            out[k] = self.merge(base[k], v, path + (k,))
        return out


def resolve_config(raw: Optional[dict] = None, text: Optional[str] = None) -> dict:
    """Validate ``raw`` against the schema and fill every default explicitly."""
    raw = {} if raw is None else raw
    v = _Validator(text)
    if not isinstance(raw, dict):
        v.fail((), "config must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        v.fail(("schema_version",), f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")
    sample = raw.get("scenario", {}).get("sample", "absent") if isinstance(raw.get("scenario"), dict) else "absent"
    if sample is None:
        raw = copy.deepcopy(raw)
        del raw["scenario"]["sample"]
    cfg = v.merge(DEFAULTS, raw, ())
    if sample is None:
        cfg["scenario"]["sample"] = None
    try:
        build_scenario(cfg)
        build_grid(cfg)
    except (ValueError, TypeError) as exc:
        v.fail(("scenario",), str(exc))
    return cfg


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return resolve_config({})
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
    return resolve_config(raw, text)


def _element(d: dict):
    kind = d["kind"]
    if kind == "clear":
        return Clear()
    if kind == "opaque":
        return Opaque()
    return Retarder(d["retardance_deg"], d["fast_axis_deg"])


def _sample(d: Optional[dict]):
    if d is None:
        return None
    if d["kind"] == "uniform":
        return UniformSample(_element(d["element"]))
    return SpiralRetarderSample(
        order_m=d["order_m"],
        retardance_deg=d["retardance_deg"],
        center_mm=tuple(d["center_mm"]),
        radius_mm=d["radius_mm"],
        outside=_element(d["outside"]),
    )


def build_scenario(cfg: dict) -> Scenario:
    s = cfg["scenario"]
    return Scenario(
        source=SourceModel(**s["source"]),
        det_a=DetectorModel(**s["det_a"]),
        det_b=DetectorModel(**s["det_b"]),
        sample=_sample(s["sample"]),
        sample_arm=s["sample_arm"],
        fixed_analyzer_deg=s["fixed_analyzer_deg"],
        rotating_analyzer_deg=s["rotating_analyzer_deg"],
        beam_position_mm=tuple(s["beam_position_mm"]),
        window_ps=s["window_ps"],
        integration_time_s=s["integration_time_s"],
    )


def build_grid(cfg: dict) -> ScanGrid:
    g = cfg["scan"]
    return ScanGrid(g["width_px"], g["height_px"], g["pitch_mm"], tuple(g["origin_mm"]))


def sweep_angles(cfg: dict) -> list[float]:
    sw = cfg["sweep"]
    n = int(math.floor((sw["stop_deg"] - sw["start_deg"]) / sw["step_deg"] + 1e-9)) + 1
    if n < 2:
        raise ConfigError("sweep: need at least two angles")
    return [sw["start_deg"] + i * sw["step_deg"] for i in range(n)]
