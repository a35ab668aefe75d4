"""Line-oriented dataset file formats (UTF-8, comma separated, versioned).

Three file kinds, all with a ``# capgest-<kind> v1`` first line:

* recording: header rows ``user_id,<id>`` and ``sample_rate_hz,<hz>``, a
  column header, then one row per frame: ``frame,thumb,index,middle,ring,pinky``.
* marks: one row per annotation: ``start,end,label`` (inclusive frame span).
* calibration: one row per (user, channel): ``user_id,channel,min_raw,max_raw``.

A recording ``<stem>.csv`` pairs with its annotation file ``<stem>.marks.csv``
in the same directory; a dataset directory holds ``recordings/`` plus a
top-level ``calibration.csv``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FileFormatError
from .signals import (
    CHANNEL_NAMES,
    N_CHANNELS,
    CalibrationRange,
    CalibrationTable,
    GestureLabel,
    GestureMark,
    Recording,
)

RECORDING_MAGIC = "# capgest-recording v1"
MARKS_MAGIC = "# capgest-marks v1"
CALIBRATION_MAGIC = "# capgest-calibration v1"


def _read_lines(path: Path, magic: str) -> list[str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc}") from exc
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != magic:
        raise FileFormatError(f"{path}: expected first line {magic!r}")
    return lines[1:]


def write_recording(path: Path, recording: Recording) -> None:
    rows = [RECORDING_MAGIC]
    rows.append(f"user_id,{recording.user_id}")
    rows.append(f"sample_rate_hz,{recording.sample_rate_hz!r}")
    rows.append("frame," + ",".join(CHANNEL_NAMES))
    for i in range(recording.n_frames):
        vals = ",".join(repr(float(v)) for v in recording.channels[:, i])
        rows.append(f"{i},{vals}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_recording(path: Path, marks_path: Path | None = None) -> Recording:
    lines = _read_lines(path, RECORDING_MAGIC)
    if len(lines) < 3:
        raise FileFormatError(f"{path}: truncated recording file")
    header: dict[str, str] = {}
    for ln in lines[:2]:
        key, _, value = ln.partition(",")
        header[key] = value
    if "user_id" not in header or "sample_rate_hz" not in header:
        raise FileFormatError(f"{path}: missing user_id/sample_rate_hz header")
    body = lines[3:]  # skip column header line
    frames = np.empty((N_CHANNELS, len(body)))
    for i, ln in enumerate(body):
        parts = ln.split(",")
        if len(parts) != N_CHANNELS + 1:
            raise FileFormatError(f"{path}: bad frame row {ln!r}")
        try:
            frames[:, i] = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise FileFormatError(f"{path}: bad frame row {ln!r}") from exc
    marks: tuple[GestureMark, ...] = ()
    if marks_path is None:
        candidate = path.with_suffix("").with_suffix(".marks.csv")
        if candidate.exists():
            marks_path = candidate
    if marks_path is not None:
        marks = tuple(read_marks(marks_path))
    try:
        return Recording(
            user_id=header["user_id"],
            channels=frames,
            sample_rate_hz=float(header["sample_rate_hz"]),
            gesture_marks=marks,
        )
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


def write_marks(path: Path, marks: Sequence[GestureMark]) -> None:
    rows = [MARKS_MAGIC, "start,end,label"]
    for m in marks:
        rows.append(f"{m.start},{m.end},{m.label.text}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_marks(path: Path) -> list[GestureMark]:
    lines = _read_lines(path, MARKS_MAGIC)
    marks = []
    for ln in lines[1:]:  # skip column header
        parts = ln.split(",")
        if len(parts) != 3:
            raise FileFormatError(f"{path}: bad mark row {ln!r}")
        try:
            marks.append(
                GestureMark(int(parts[0]), int(parts[1]), GestureLabel.from_text(parts[2]))
            )
        except (ValueError, KeyError) as exc:
            raise FileFormatError(f"{path}: bad mark row {ln!r}") from exc
    return marks


def write_calibration(path: Path, table: CalibrationTable) -> None:
    rows = [CALIBRATION_MAGIC, "user_id,channel,min_raw,max_raw"]
    for (user_id, channel), rng in table.items():
        rows.append(f"{user_id},{channel},{rng.min_raw!r},{rng.max_raw!r}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_calibration(path: Path) -> CalibrationTable:
    lines = _read_lines(path, CALIBRATION_MAGIC)
    table = CalibrationTable()
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise FileFormatError(f"{path}: bad calibration row {ln!r}")
        try:
            table.set(
                parts[0],
                int(parts[1]),
                CalibrationRange(float(parts[2]), float(parts[3])),
            )
        except ValueError as exc:
            raise FileFormatError(f"{path}: bad calibration row {ln!r}") from exc
    return table


def write_dataset(
    root: Path, recordings: Sequence[Recording], calib: CalibrationTable
) -> None:
    """Write a dataset directory: recordings/ + calibration.csv."""
    rec_dir = root / "recordings"
    rec_dir.mkdir(parents=True, exist_ok=True)
    counters: dict[str, int] = {}
    for rec in recordings:
        idx = counters.get(rec.user_id, 0)
        counters[rec.user_id] = idx + 1
        stem = f"{rec.user_id}_r{idx:04d}"
        write_recording(rec_dir / f"{stem}.csv", rec)
        write_marks(rec_dir / f"{stem}.marks.csv", rec.gesture_marks)
    write_calibration(root / "calibration.csv", calib)


def read_dataset(root: Path) -> tuple[list[Recording], CalibrationTable]:
    """Read a dataset directory written by :func:`write_dataset`."""
    root = Path(root)
    rec_dir = root / "recordings"
    if not rec_dir.is_dir():
        raise FileFormatError(f"{root}: missing recordings/ directory")
    recordings = [
        read_recording(p)
        for p in sorted(rec_dir.glob("*.csv"))
        if not p.name.endswith(".marks.csv")
    ]
    if not recordings:
        raise FileFormatError(f"{rec_dir}: no recording files")
    calib_path = root / "calibration.csv"
    if calib_path.exists():
        calib = read_calibration(calib_path)
    else:
        # fallback: observed min/max per (user, channel) across recordings
        bounds: dict[tuple[str, int], tuple[float, float]] = {}
        for rec in recordings:
            for ch in range(N_CHANNELS):
                key = (rec.user_id, ch)
                lo = float(rec.channels[ch].min())
                hi = float(rec.channels[ch].max())
                if key in bounds:
                    lo = min(lo, bounds[key][0])
                    hi = max(hi, bounds[key][1])
                bounds[key] = (lo, hi)
        calib = CalibrationTable()
        for (user_id, ch), (lo, hi) in bounds.items():
            calib.set(user_id, ch, CalibrationRange(lo, hi if hi > lo else lo + 1.0))
    return recordings, calib
