"""Manifest and trial-file loading, and per-trial channel selection.

Manifest format: JSON Lines. Each non-blank line not starting with ``#`` is
one object::

    {"path": "s01/a03/t1.csv", "subject": "s01", "activity": "a03",
     "trial": "1", "sample_rate": 2000, "channel_count": 12,
     "window": [6000, 16000]}

``window`` is optional and half-open, in samples. Relative paths resolve
against the manifest's directory.

Trial files: delimited numeric text, one row per time sample, one column
per channel. Comma or tab delimiters are detected from the first data line;
a file with neither is read as whitespace-separated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DuplicateKey, ManifestParseError, NonFiniteSample, ParseError, ShapeMismatch

REQUIRED_FIELDS = ("path", "subject", "activity", "trial", "sample_rate", "channel_count")


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    subject: str
    activity: str
    trial: str
    sample_rate: float
    channel_count: int
    window: tuple[int, int] | None = None

    @property
    def key(self):
        return (self.subject, self.activity, self.trial)

    def to_dict(self):
        return {
            "path": str(self.path),
            "subject": self.subject,
            "activity": self.activity,
            "trial": self.trial,
            "sample_rate": self.sample_rate,
            "channel_count": self.channel_count,
            "window": list(self.window) if self.window else None,
        }


@dataclass(frozen=True)
class SignalManifest:
    entries: tuple[ManifestEntry, ...] = ()

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class TrialRecord:
    meta: ManifestEntry
    samples: np.ndarray  # channels x time


def _entry_from_record(rec, base_dir: Path, where: str) -> ManifestEntry:
    if not isinstance(rec, dict):
        raise ManifestParseError(f"{where}: expected an object, got {type(rec).__name__}")
    for name in REQUIRED_FIELDS:
        if name not in rec:
            raise ManifestParseError(f"{where}: missing field {name!r}")
    unknown = set(rec) - set(REQUIRED_FIELDS) - {"window"}
    if unknown:
        raise ManifestParseError(f"{where}: unknown field(s) {sorted(unknown)}")

    try:
        sample_rate = float(rec["sample_rate"])
    except (TypeError, ValueError):
        raise ManifestParseError(f"{where}: field 'sample_rate' is not a number") from None
    if not sample_rate > 0:
        raise ManifestParseError(f"{where}: field 'sample_rate' must be positive")

    channels = rec["channel_count"]
    if isinstance(channels, bool) or not isinstance(channels, int) or channels < 1:
        raise ManifestParseError(f"{where}: field 'channel_count' must be a positive integer")

    window = rec.get("window")
    if window is not None:
        ok = (
            isinstance(window, list)
            and len(window) == 2
            and all(isinstance(v, int) and not isinstance(v, bool) for v in window)
        )
        if not ok:
            raise ManifestParseError(f"{where}: field 'window' must be [start, end] integers")
        if not 0 <= window[0] < window[1]:
            raise ManifestParseError(f"{where}: field 'window' needs 0 <= start < end")
        window = (window[0], window[1])

    path = Path(str(rec["path"]))
    if not path.is_absolute():
        path = base_dir / path
    return ManifestEntry(
        path=path,
        subject=str(rec["subject"]),
        activity=str(rec["activity"]),
        trial=str(rec["trial"]),
        sample_rate=sample_rate,
        channel_count=channels,
        window=window,
    )


def load_manifest(path) -> SignalManifest:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ManifestParseError(f"cannot read manifest {path}: {exc}") from None

    entries = []
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        where = f"{path}:{lineno}"
        try:
            rec = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ManifestParseError(f"{where}: {exc.msg} (column {exc.colno})") from None
        entry = _entry_from_record(rec, path.parent, where)
        if entry.key in seen:
            raise DuplicateKey(
                f"{where}: subject/activity/trial {entry.key} already defined on line {seen[entry.key]}"
            )
        seen[entry.key] = lineno
        entries.append(entry)
    return SignalManifest(tuple(entries))


def detect_delimiter(line: str):
    if "\t" in line:
        return "\t"
    if "," in line:
        return ","
    return None


def read_matrix(path, *, header=False) -> np.ndarray:
    """Read a delimited numeric file into a ``time x channels`` array."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    lines = text.splitlines()
    if header:
        lines = lines[1:]
    first = next((ln for ln in lines if ln.strip()), None)
    if first is None:
        raise ParseError(f"{path}: no data rows")
    delim = detect_delimiter(first)

    rows = []
    width = None
    offset = 2 if header else 1
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        cells = line.split(delim) if delim else line.split()
        try:
            row = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_number(c))
            raise ParseError(f"{path}:{i + offset}: non-numeric cell {bad.strip()!r}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ShapeMismatch(f"{path}:{i + offset}: expected {width} columns, got {len(row)}")
        rows.append(row)
    return np.array(rows, dtype=float)


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def write_matrix(path, matrix, delimiter=","):
    """Write ``time x channels`` values with 17 significant digits (exact round trip)."""
    np.savetxt(path, np.atleast_2d(np.asarray(matrix, dtype=float)), fmt="%.17g", delimiter=delimiter)


def load_trial(entry: ManifestEntry, *, header=False) -> TrialRecord:
    data = read_matrix(entry.path, header=header)
    if data.shape[1] != entry.channel_count:
        raise ShapeMismatch(
            f"{entry.path}: {data.shape[1]} columns but channel_count is {entry.channel_count}"
        )
    if entry.window is not None:
        start, end = entry.window
        if end > data.shape[0]:
            raise ShapeMismatch(f"{entry.path}: window end {end} exceeds {data.shape[0]} rows")
        data = data[start:end]
    if not np.all(np.isfinite(data)):
        row, col = np.argwhere(~np.isfinite(data))[0]
        raise NonFiniteSample(f"{entry.path}: non-finite value at row {row}, channel {col}")
    return TrialRecord(entry, np.ascontiguousarray(data.T))


def channel_energy(samples) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    return np.einsum("ct,ct->c", samples, samples)


def select_max_energy_channel(rec: TrialRecord):
    """Index and samples of the channel with the largest sum of squares (lowest index on ties)."""
    energy = channel_energy(rec.samples)
    idx = int(np.argmax(energy))
    return idx, rec.samples[idx].copy()
