import json

import numpy as np
import pytest

from qpolscope import io as qio
from qpolscope.cli import run

FAST = {
    "schema_version": 1,
    "g2_curve": {"integration_time_s": 0.05},
    "sweep": {"step_deg": 10.0, "integration_ratios": [1.0, 2.0]},
    "scan": {"width_px": 10, "height_px": 10, "pitch_mm": 3.0, "origin_mm": [-13.5, -13.5]},
    "snr": {"repeats": 8},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "fast.json"
    p.write_text(json.dumps(FAST))
    return str(p)


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("cmd", [["g2-curve"], ["sweep"], ["scan"], ["snr"], ["tags", "export"]])
def test_commands_deterministic(tmp_path, cfg_path, cmd):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert run(["--config", cfg_path, "--seed", "42", "--out", str(out), *cmd]) == 0
        outs.append(_files(out))
    assert outs[0] == outs[1]
    assert any(name.endswith(".config.json") for name in outs[0])


def test_config_echo_reproduces(tmp_path, cfg_path):
    a = tmp_path / "a"
    assert run(["--config", cfg_path, "--seed", "5", "--out", str(a), "sweep"]) == 0
    b = tmp_path / "b"
    assert run(["--config", str(a / "sweep.config.json"), "--out", str(b), "sweep"]) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


def test_g2_curve_outputs(tmp_path, cfg_path):
    assert run(["--config", cfg_path, "--out", str(tmp_path), "g2-curve"]) == 0
    head = (tmp_path / "g2_curve.csv").read_text().splitlines()[0]
    assert head == "tau_ps,g2_hyper,g2_super"
    meta = json.loads((tmp_path / "g2_curve.json").read_text())
    hyper, sup = meta["curves"]
    assert hyper["g2_zero"] > 10 * sup["g2_zero"] and not hyper["flat"]


def test_zero_pair_rate_flat(tmp_path):
    p = tmp_path / "zero.json"
    cfg = dict(FAST, scenario={"source": {"pair_rate_hz": 0.0}})
    p.write_text(json.dumps(cfg))
    assert run(["--config", str(p), "--out", str(tmp_path), "g2-curve"]) == 0
    meta = json.loads((tmp_path / "g2_curve.json").read_text())
    assert all(c["flat"] for c in meta["curves"])


def test_sweep_rows(tmp_path):
    assert run(["--out", str(tmp_path), "sweep"]) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 1 + 4 * 111
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert len(metrics["metrics"]) == 8
    assert all(s["n_dips"] == 2 for s in metrics["sweeps"])


def test_scan_and_profile(tmp_path, cfg_path):
    assert run(["--config", cfg_path, "--out", str(tmp_path), "scan"]) == 0
    assert len((tmp_path / "scan_pixels.csv").read_text().splitlines()) == 101
    px = qio.read_pgm16((tmp_path / "scan_g2.pgm").read_bytes())
    assert px.shape == (10, 10)
    pix = str(tmp_path / "scan_pixels.csv")
    assert run(["--out", str(tmp_path), "profile", "--pixels", pix, "--start", "2,2", "--end", "2,2"]) == 0
    assert len((tmp_path / "profile.csv").read_text().splitlines()) == 2
    assert run(["--out", str(tmp_path), "profile", "--pixels", pix, "--start", "0,0", "--end", "10,0"]) == 2


def test_opaque_scan_near_uniform(tmp_path):
    p = tmp_path / "opaque.json"
    cfg = dict(FAST, scenario={"sample": {"kind": "uniform", "element": {"kind": "opaque"}}})
    p.write_text(json.dumps(cfg))
    assert run(["--config", str(p), "--out", str(tmp_path), "scan"]) == 0
    meta = json.loads((tmp_path / "scan.json").read_text())
    assert meta["planes"]["coincidence"]["max"] < 1000  # accidental level is ~15 Hz


def test_tags_round_trip_via_cli(tmp_path):
    for name in ("t.qtt", "t.csv"):
        assert run(["--out", str(tmp_path), "tags", "export", "--file", name]) == 0
        assert run(["--out", str(tmp_path), "tags", "import", str(tmp_path / name)]) == 0
        s = json.loads((tmp_path / "tags_summary.json").read_text())
        assert s["g2_zero"] > 10
    bad = tmp_path / "bad.csv"
    bad.write_text("channel,timestamp_ps\nA,9\nA,3\n")
    assert run(["--out", str(tmp_path), "tags", "import", str(bad)]) == 4
    assert run(["--out", str(tmp_path), "tags", "import", str(tmp_path / "missing.qtt")]) == 4


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1,\n "scan": {"width_px": 0}}')
    assert run(["--config", str(bad), "--out", str(tmp_path), "scan"]) == 2
    assert "line 2" in capsys.readouterr().err
    assert run(["--seed", "-1", "--out", str(tmp_path), "sweep"]) == 2
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == 2
    # no light at all: both ensembles are identically zero, so the SNR is undefined
    p = tmp_path / "dead.json"
    nobg = {"dark_rate_hz": 0.0}
    p.write_text(json.dumps(dict(FAST, scenario={"source": {"pair_rate_hz": 0.0, "stray_rate_hz": 0.0},
                                                 "det_a": nobg, "det_b": nobg})))
    assert run(["--config", str(p), "--out", str(tmp_path), "snr"]) == 3
