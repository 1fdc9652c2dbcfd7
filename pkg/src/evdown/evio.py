"""Reading and writing event streams, priors, stats, and decision logs.

Two stream formats are supported:

* CSV: header ``t,x,y,p`` (optionally ``t,x,y,p,label``), one event per
  line, label E for edge and N for noise.  The format carries no sensor
  geometry; pass one to :func:`read_events` or it is inferred as the
  smallest sensor containing every event.
* binary: little-endian, magic ``EVDN``, version byte (1), width u16,
  height u16, count u64, then ``count`` packed 13-byte records of
  t u64, x u16, y u16, p u8.  Labels are not stored.

Both formats round-trip every event field bit-exactly.  Writers emit a
canonical encoding, so re-serializing a stream is byte-stable.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .density import PriorMap
from .events import EventLabel, EventStream, SensorGeometry
from .pipeline import DecisionLog, RunStats
from .metrics import SelectivityReport

MAGIC = b"EVDN"
VERSION = 1
_HEADER = struct.Struct("<4sBHHQ")
REC_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])
assert REC_DTYPE.itemsize == 13

_CSV_HEADER = "t,x,y,p"
_CSV_HEADER_LABELED = "t,x,y,p,label"
_LABEL_CHAR = {int(EventLabel.EDGE): "E", int(EventLabel.NOISE): "N"}
_CHAR_LABEL = {"E": int(EventLabel.EDGE), "N": int(EventLabel.NOISE)}
_CODE_CHAR = {0: "A", 1: "S", 2: "C"}
_CHAR_CODE = {v: k for k, v in _CODE_CHAR.items()}


class EventFileError(ValueError):
    """A file failed to parse or violated format-level constraints."""


def detect_format(path) -> str:
    """Return "binary" when the file starts with the magic bytes, else "csv"."""
    with open(path, "rb") as fh:
        return "binary" if fh.read(4) == MAGIC else "csv"


def read_events(path, fmt: str = "auto",
                geometry: SensorGeometry | None = None) -> EventStream:
    """Load an event stream, checking ordering and geometry bounds.

    fmt is "csv", "binary", or "auto" (sniff by magic bytes).  For CSV, an
    explicit geometry is validated against the data; without one the
    geometry is inferred from the coordinate maxima (1x1 for an empty
    stream).  For binary, the header geometry is used and an explicit one
    must match it.
    """
    if fmt == "auto":
        fmt = detect_format(path)
    if fmt == "csv":
        return _read_csv(path, geometry)
    if fmt == "binary":
        return _read_binary(path, geometry)
    raise ValueError(f"unknown format {fmt!r}")


def write_events(stream: EventStream, path, fmt: str = "auto") -> None:
    """Write a stream as CSV or binary; "auto" picks CSV for a .csv suffix.

    CSV output includes the label column iff the stream is labeled.  Binary
    output drops labels (the format has no field for them).
    """
    if fmt == "auto":
        fmt = "csv" if str(path).endswith(".csv") else "binary"
    if fmt == "csv":
        _write_csv(stream, path)
    elif fmt == "binary":
        _write_binary(stream, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _finish_stream(path, geometry, t, x, y, p, labels=None) -> EventStream:
    """Shared ordering/bounds checks and geometry resolution for readers."""
    t = np.asarray(t, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if t.size > 1:
        bad = np.nonzero(np.diff(t) < 0)[0]
        if bad.size:
            i = int(bad[0]) + 1
            raise EventFileError(
                f"{path}: events out of order at index {i} "
                f"(t={int(t[i])} after t={int(t[i - 1])})")
    if geometry is None:
        geometry = SensorGeometry(int(x.max()) + 1 if x.size else 1,
                                  int(y.max()) + 1 if y.size else 1)
    else:
        oob = np.nonzero((x >= geometry.width) | (y >= geometry.height))[0]
        if oob.size:
            i = int(oob[0])
            raise EventFileError(
                f"{path}: event {i} at ({int(x[i])}, {int(y[i])}) outside "
                f"{geometry.width}x{geometry.height} sensor")
    return EventStream(geometry, t, x, y, p, labels=labels)


def _read_csv(path, geometry) -> EventStream:
    with open(path, "r", encoding="ascii", newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        if header == _CSV_HEADER:
            labeled = False
        elif header == _CSV_HEADER_LABELED:
            labeled = True
        else:
            raise EventFileError(
                f"{path}:1: bad header {header!r}, expected "
                f"{_CSV_HEADER!r} or {_CSV_HEADER_LABELED!r}")
        ncols = 5 if labeled else 4
        t, x, y, p = [], [], [], []
        labels = [] if labeled else None
        for lineno, line in enumerate(fh, start=2):
            fields = line.rstrip("\r\n").split(",")
            if len(fields) != ncols:
                raise EventFileError(
                    f"{path}:{lineno}: expected {ncols} fields, "
                    f"got {len(fields)}")
            try:
                ti, xi, yi, pi = (int(fields[0]), int(fields[1]),
                                  int(fields[2]), int(fields[3]))
            except ValueError as exc:
                raise EventFileError(f"{path}:{lineno}: {exc}") from None
            if ti < 0 or xi < 0 or yi < 0:
                raise EventFileError(
                    f"{path}:{lineno}: negative timestamp or coordinate")
            if pi not in (0, 1):
                raise EventFileError(
                    f"{path}:{lineno}: polarity must be 0 or 1, got {pi}")
            if labeled:
                if fields[4] not in _CHAR_LABEL:
                    raise EventFileError(
                        f"{path}:{lineno}: label must be E or N, "
                        f"got {fields[4]!r}")
                labels.append(_CHAR_LABEL[fields[4]])
            t.append(ti)
            x.append(xi)
            y.append(yi)
            p.append(pi)
    return _finish_stream(path, geometry, t, x, y,
                          np.asarray(p, dtype=np.uint8), labels=labels)


def _write_csv(stream: EventStream, path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        if stream.is_labeled:
            fh.write(_CSV_HEADER_LABELED + "\n")
            rows = zip(stream.t.tolist(), stream.x.tolist(), stream.y.tolist(),
                       stream.p.tolist(), stream.labels.tolist())
            fh.writelines(f"{t},{x},{y},{p},{_LABEL_CHAR[l]}\n"
                          for t, x, y, p, l in rows)
        else:
            fh.write(_CSV_HEADER + "\n")
            rows = zip(stream.t.tolist(), stream.x.tolist(), stream.y.tolist(),
                       stream.p.tolist())
            fh.writelines(f"{t},{x},{y},{p}\n" for t, x, y, p in rows)


def _read_binary(path, geometry) -> EventStream:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise EventFileError(f"{path}: truncated header "
                             f"({len(blob)} bytes, need {_HEADER.size})")
    magic, version, width, height, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise EventFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise EventFileError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + REC_DTYPE.itemsize * count
    if len(blob) != expected:
        whole = (len(blob) - _HEADER.size) // REC_DTYPE.itemsize
        raise EventFileError(
            f"{path}: size mismatch for {count} records: expected "
            f"{expected} bytes, got {len(blob)} (truncated at record {whole})")
    header_geo = SensorGeometry(width, height)
    if geometry is not None and geometry != header_geo:
        raise EventFileError(
            f"{path}: header geometry {width}x{height} does not match "
            f"requested {geometry.width}x{geometry.height}")
    recs = np.frombuffer(blob, dtype=REC_DTYPE, count=count,
                         offset=_HEADER.size)
    if count and int(recs["t"].max()) > np.iinfo(np.int64).max:
        raise EventFileError(f"{path}: timestamp exceeds the signed 64-bit range")
    bad = np.nonzero(recs["p"] > 1)[0]
    if bad.size:
        i = int(bad[0])
        raise EventFileError(
            f"{path}: record {i}: polarity must be 0 or 1, "
            f"got {int(recs['p'][i])}")
    return _finish_stream(path, header_geo,
                          recs["t"].astype(np.int64),
                          recs["x"].astype(np.int64),
                          recs["y"].astype(np.int64),
                          recs["p"].copy())


def _write_binary(stream: EventStream, path) -> None:
    geo = stream.geometry
    if geo.width > 0xFFFF or geo.height > 0xFFFF:
        raise ValueError("binary format limits geometry to 65535x65535")
    oob = (stream.x >= geo.width) | (stream.y >= geo.height)
    if np.any(oob):
        i = int(np.nonzero(oob)[0][0])
        raise ValueError(f"event {i} outside stream geometry, refusing to write")
    recs = np.empty(len(stream), dtype=REC_DTYPE)
    recs["t"] = stream.t
    recs["x"] = stream.x
    recs["y"] = stream.y
    recs["p"] = stream.p
    header = _HEADER.pack(MAGIC, VERSION, geo.width, geo.height, len(stream))
    Path(path).write_bytes(header + recs.tobytes())


def read_prior(path, geometry: SensorGeometry) -> PriorMap:
    """Load a prior: first line "width height", then height rows of width
    decimal weights.  Dimensions must match the given geometry; weight
    values are taken verbatim (no normalization on load)."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines:
        raise EventFileError(f"{path}: empty prior file")
    head = lines[0].split()
    if len(head) != 2:
        raise EventFileError(f"{path}:1: expected 'width height', got {lines[0]!r}")
    try:
        width, height = int(head[0]), int(head[1])
    except ValueError:
        raise EventFileError(f"{path}:1: expected 'width height', "
                             f"got {lines[0]!r}") from None
    if (width, height) != (geometry.width, geometry.height):
        raise EventFileError(
            f"{path}: prior is {width}x{height}, stream geometry is "
            f"{geometry.width}x{geometry.height}")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != height:
        raise EventFileError(
            f"{path}: expected {height} weight rows, got {len(body)}")
    weights = np.empty((height, width))
    for r, ln in enumerate(body):
        fields = ln.split()
        if len(fields) != width:
            raise EventFileError(
                f"{path}: row {r} has {len(fields)} weights, expected {width}")
        try:
            weights[r] = [float(v) for v in fields]
        except ValueError as exc:
            raise EventFileError(f"{path}: row {r}: {exc}") from None
    try:
        return PriorMap(geometry, weights)
    except ValueError as exc:
        raise EventFileError(f"{path}: {exc}") from None


def write_prior(prior: PriorMap, path) -> None:
    """Write a prior in the format read_prior expects, values via repr so
    float64 weights round-trip exactly."""
    geo = prior.geometry
    lines = [f"{geo.width} {geo.height}"]
    for row in prior.weights:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _selectivity_doc(report: SelectivityReport) -> dict:
    return {
        "edge_total": report.edge_total,
        "noise_total": report.noise_total,
        "edge_retained": report.edge_retained,
        "noise_retained": report.noise_retained,
        "edge_fraction": report.edge_fraction,
        "noise_fraction": report.noise_fraction,
        "ratio": report.ratio,
        "overall": report.overall,
        "alpha": report.alpha,
    }


def stats_doc(stats: RunStats,
              selectivity: SelectivityReport | None = None) -> dict:
    """Build the stats document for a run as a plain dict."""
    doc = {
        "alpha": stats.alpha,
        "method": stats.method,
        "seed": stats.seed,
        "processed": stats.processed,
        "retained": stats.retained,
        "capped": stats.capped,
        "ratio": stats.ratio,
        "per_window_ratios": stats.per_window_ratios,
        "ms_per_kev_total": stats.ms_per_kev_total,
        "ms_per_kev_pdf": stats.ms_per_kev_pdf,
        "ms_per_kev_eval": stats.ms_per_kev_eval,
    }
    if selectivity is not None:
        doc["selectivity"] = _selectivity_doc(selectivity)
    return doc


def write_json_doc(doc: dict, path_or_stream) -> None:
    """Serialize a document as stable, indented JSON (key order preserved)."""
    text = json.dumps(doc, indent=2) + "\n"
    if hasattr(path_or_stream, "write"):
        path_or_stream.write(text)
    else:
        Path(path_or_stream).write_text(text, encoding="ascii")


def write_stats(stats: RunStats, path_or_stream,
                selectivity: SelectivityReport | None = None) -> None:
    """Write a run's stats document as JSON (to a path or open stream)."""
    write_json_doc(stats_doc(stats, selectivity), path_or_stream)


def write_log(log: DecisionLog, path) -> None:
    """Write a decision log as CSV: index,t,window,code,p.

    Codes are A (accept), S (sampler reject), C (cap reject); p uses repr
    so probabilities round-trip exactly (nan for deterministic decisions).
    """
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("index,t,window,code,p\n")
        rows = zip(log.t.tolist(), log.window.tolist(), log.code.tolist(),
                   log.probability.tolist())
        fh.writelines(f"{i},{t},{w},{_CODE_CHAR[c]},{repr(p)}\n"
                      for i, (t, w, c, p) in enumerate(rows))


def read_log(path) -> DecisionLog:
    """Read a decision log written by write_log."""
    with open(path, "r", encoding="ascii", newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != "index,t,window,code,p":
            raise EventFileError(f"{path}:1: bad log header {header!r}")
        t, window, code, prob = [], [], [], []
        for lineno, line in enumerate(fh, start=2):
            fields = line.rstrip("\r\n").split(",")
            if len(fields) != 5:
                raise EventFileError(
                    f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
            try:
                idx = int(fields[0])
                t.append(int(fields[1]))
                window.append(int(fields[2]))
                code.append(_CHAR_CODE[fields[3]])
                prob.append(float(fields[4]))
            except (ValueError, KeyError) as exc:
                raise EventFileError(f"{path}:{lineno}: {exc!r}") from None
            if idx != len(t) - 1:
                raise EventFileError(
                    f"{path}:{lineno}: index {idx} out of sequence")
    return DecisionLog(np.asarray(t, dtype=np.int64),
                       np.asarray(window, dtype=np.int64),
                       np.asarray(code, dtype=np.uint8),
                       np.asarray(prob, dtype=np.float64))
