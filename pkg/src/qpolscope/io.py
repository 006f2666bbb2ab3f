"""File formats: time-tag files (CSV / QTT1 binary), 16-bit PGM planes, CSV tables.

QTT1 binary layout (all little-endian)::

    b"QTT1"  u64 duration_ps  u64 n_records  then n_records x (u8 channel, u64 timestamp_ps)

with channel 0 = A, 1 = B. The text form is a ``channel,timestamp_ps`` CSV preceded
by a ``# duration_ps=<int>`` comment line. Records are written time-ordered.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .source import StreamOrderError, TimeTagStream

MAGIC = b"QTT1"
CHANNELS = ("A", "B")
_RECORD = np.dtype([("channel", "u1"), ("t", "<u8")])


class TagFileError(ValueError):
    """Malformed or inconsistent time-tag file."""


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def fmt(x) -> str:
    """Round-trippable number formatting (17 significant digits for floats)."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x != x:
        return "nan"
    return format(x, ".17g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write_text(path, csv_text(header, rows))


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, obj) -> None:
    atomic_write_text(path, json_text(obj))


# --- time-tag files -------------------------------------------------------


def _interleave(a: TimeTagStream, b: TimeTagStream) -> tuple[np.ndarray, np.ndarray]:
    t = np.concatenate([a.timestamps_ps, b.timestamps_ps]).astype(np.uint64)
    ch = np.concatenate([np.zeros(len(a), np.uint8), np.ones(len(b), np.uint8)])
    order = np.lexsort((ch, t))
    return ch[order], t[order]


def tags_export_binary(a: TimeTagStream, b: TimeTagStream) -> bytes:
    ch, t = _interleave(a, b)
    rec = np.empty(t.size, dtype=_RECORD)
    rec["channel"], rec["t"] = ch, t
    duration = max(a.duration_ps, b.duration_ps)
    head = MAGIC + np.array([duration, t.size], dtype="<u8").tobytes()
    return head + rec.tobytes()


def tags_export_csv(a: TimeTagStream, b: TimeTagStream) -> str:
    ch, t = _interleave(a, b)
    duration = max(a.duration_ps, b.duration_ps)
    lines = [f"# duration_ps={duration}", "channel,timestamp_ps"]
    names = np.array(CHANNELS)[ch]
    lines.extend(f"{c},{int(v)}" for c, v in zip(names, t))
    return "\n".join(lines) + "\n"


def _streams_from(ch: np.ndarray, t: np.ndarray, duration: int) -> tuple[TimeTagStream, TimeTagStream]:
    if t.size and int(t.max()) > duration:
        raise TagFileError(f"timestamp {int(t.max())} exceeds declared duration {duration}")
    out = []
    for k, name in enumerate(CHANNELS):
        tk = t[ch == k].astype(np.int64)
        if tk.size and np.any(np.diff(tk) < 0):
            raise TagFileError(f"channel {name} timestamps are not non-decreasing")
        try:
            out.append(TimeTagStream(tk, duration))
        except StreamOrderError as exc:
            raise TagFileError(str(exc)) from exc
    return out[0], out[1]


def tags_import_binary(data: bytes) -> tuple[TimeTagStream, TimeTagStream]:
    if len(data) < 20 or data[:4] != MAGIC:
        raise TagFileError("not a QTT1 file (bad magic or truncated header)")
    duration, n = (int(v) for v in np.frombuffer(data, dtype="<u8", count=2, offset=4))
    body = data[20:]
    if len(body) != n * _RECORD.itemsize:
        raise TagFileError(f"expected {n} records, found {len(body) / _RECORD.itemsize:g}")
    rec = np.frombuffer(body, dtype=_RECORD, count=n)
    if n and rec["channel"].max() > 1:
        raise TagFileError("channel byte must be 0 (A) or 1 (B)")
    return _streams_from(rec["channel"], rec["t"], duration)


def tags_import_csv(text: str) -> tuple[TimeTagStream, TimeTagStream]:
    lines = text.splitlines()
    duration = None
    chans, times = [], []
    header_seen = False
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            key, _, val = s[1:].strip().partition("=")
            if key.strip() == "duration_ps":
                duration = int(val)
            continue
        if not header_seen:
            if s.replace(" ", "") != "channel,timestamp_ps":
                raise TagFileError(f"line {lineno}: expected header 'channel,timestamp_ps'")
            header_seen = True
            continue
        name, _, val = s.partition(",")
        name = name.strip()
        if name not in CHANNELS:
            raise TagFileError(f"line {lineno}: unknown channel {name!r}")
        try:
            tv = int(val)
        except ValueError:
            raise TagFileError(f"line {lineno}: bad timestamp {val!r}") from None
        if tv < 0:
            raise TagFileError(f"line {lineno}: negative timestamp")
        chans.append(CHANNELS.index(name))
        times.append(tv)
    if not header_seen:
        raise TagFileError("missing 'channel,timestamp_ps' header")
    t = np.array(times, dtype=np.uint64)
    if duration is None:
        duration = int(t.max()) if t.size else 0
    return _streams_from(np.array(chans, dtype=np.uint8), t, duration)


def write_tags(path, a: TimeTagStream, b: TimeTagStream) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        atomic_write_text(path, tags_export_csv(a, b))
    else:
        atomic_write_bytes(path, tags_export_binary(a, b))


def read_tags(path) -> tuple[TimeTagStream, TimeTagStream]:
    data = Path(path).read_bytes()
    if data[:4] == MAGIC:
        return tags_import_binary(data)
    return tags_import_csv(data.decode("utf-8"))


# --- portable graymaps -----------------------------------------------------


def pgm16_bytes(plane: np.ndarray) -> tuple[bytes, dict]:
    """Binary 16-bit PGM with linear min-max scaling; NaN pixels map to 0.

    Returns the file bytes and the scaling record for the sidecar.
    """
    p = np.asarray(plane, dtype=float)
    finite = np.isfinite(p)
    lo = float(p[finite].min()) if finite.any() else 0.0
    hi = float(p[finite].max()) if finite.any() else 0.0
    span = hi - lo
    scaled = np.zeros(p.shape)
    if span > 0:
        scaled[finite] = (p[finite] - lo) / span * 65535.0
    px = np.rint(scaled).astype(">u2")
    h, w = p.shape
    head = f"P5\n{w} {h}\n65535\n".encode("ascii")
    return head + px.tobytes(), {"min": lo, "max": hi, "maxval": 65535, "nan_pixels": int((~finite).sum())}


def read_pgm16(data: bytes) -> np.ndarray:
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # exactly one whitespace byte before the raster
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval < 256:
        raise ValueError("expected a 16-bit PGM")
    return np.frombuffer(data[pos:pos + 2 * w * h], dtype=">u2").reshape(h, w)
