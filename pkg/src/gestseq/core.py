"""Gesture domain types, validation, and the plain-text file formats.

Three formats, all UTF-8 CSV with a header row:

* gesture file      ``gesture,start,end`` (seconds)
* probability file  ``t,<code1>,...,<codek>`` (one row per frame)
* outcome file      ``case_id,outcome`` (outcome in {0, 1})
"""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_CODES = ("c", "h", "k", "m", "p", "r", "s", "a", "g", "e")
EXCLUDED = "X"
UNLABELED = None

ROW_SUM_TOL = 1e-6
RENORM_WINDOW = 1e-3


class GestureError(ValueError):
    """Base class for all input validation failures."""


class ParseError(GestureError):
    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(GestureError):
    pass


@dataclass(frozen=True)
class GestureAlphabet:
    codes: tuple[str, ...] = DEFAULT_CODES

    def __post_init__(self):
        codes = tuple(self.codes)
        object.__setattr__(self, "codes", codes)
        if len(codes) < 2:
            raise ValidationError("alphabet needs at least 2 codes")
        if len(set(codes)) != len(codes):
            raise ValidationError(f"duplicate codes in alphabet {codes}")
        for c in codes:
            if not c or "," in c or c.strip() != c:
                raise ValidationError(f"bad gesture code {c!r}")
            if c == EXCLUDED:
                raise ValidationError(f"{EXCLUDED!r} is reserved for excluded events")

    def __len__(self) -> int:
        return len(self.codes)

    def __iter__(self):
        return iter(self.codes)

    def __contains__(self, code) -> bool:
        return code in self.codes

    def index(self, code: str) -> int:
        return self.codes.index(code)

    @classmethod
    def parse(cls, text: str) -> "GestureAlphabet":
        """Build from a comma separated list such as ``"c,h,k"``."""
        return cls(tuple(c.strip() for c in text.split(",") if c.strip()))


DEFAULT_ALPHABET = GestureAlphabet()


@dataclass(frozen=True, order=True)
class GestureEvent:
    start: float
    end: float
    label: str

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValidationError(f"non-finite time in event {self}")
        if self.start < 0:
            raise ValidationError(f"negative start time {self.start}")
        if self.end < self.start:
            raise ValidationError(f"end < start ({self.end} < {self.start})")

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def excluded(self) -> bool:
        return self.label == EXCLUDED


@dataclass(frozen=True)
class GestureSequence:
    """Events for one case, kept in canonical (start, end, label) order."""

    case_id: str
    events: tuple[GestureEvent, ...]
    alphabet: GestureAlphabet = DEFAULT_ALPHABET

    def __post_init__(self):
        events = tuple(sorted(self.events))
        object.__setattr__(self, "events", events)
        for ev in events:
            if not ev.excluded and ev.label not in self.alphabet:
                raise ValidationError(f"gesture {ev.label!r} not in alphabet")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def duration(self) -> float:
        if not self.events:
            return 0.0
        return max(e.end for e in self.events) - self.events[0].start

    def included(self) -> "GestureSequence":
        """Copy without excluded (``X``) events."""
        return GestureSequence(self.case_id, tuple(e for e in self.events if not e.excluded),
                               self.alphabet)

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.events]

    def shifted(self, offset: float) -> "GestureSequence":
        return GestureSequence(
            self.case_id,
            tuple(GestureEvent(e.start + offset, e.end + offset, e.label) for e in self.events),
            self.alphabet,
        )


@dataclass(frozen=True)
class FrameProbabilityStream:
    case_id: str
    dt: float
    rows: np.ndarray
    t0: float = 0.0
    alphabet: GestureAlphabet = DEFAULT_ALPHABET

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ValidationError("probability stream needs a non-empty 2-D array of rows")
        if rows.shape[1] != len(self.alphabet):
            raise ValidationError(
                f"rows have {rows.shape[1]} columns, alphabet has {len(self.alphabet)}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(rows)):
            raise ValidationError("non-finite probability")
        if np.any(rows < 0) or np.any(rows > 1):
            raise ValidationError("probabilities must lie in [0, 1]")
        bad = np.abs(rows.sum(axis=1) - 1.0) > ROW_SUM_TOL
        if np.any(bad):
            raise ValidationError(f"row {int(np.argmax(bad))} does not sum to 1")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt


@dataclass(frozen=True)
class OutcomeTable:
    entries: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        entries = dict(sorted(self.entries.items()))
        for cid, y in entries.items():
            if y not in (0, 1):
                raise ValidationError(f"outcome for {cid!r} must be 0 or 1, got {y!r}")
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, case_id: str) -> int:
        return self.entries[case_id]

    @property
    def case_ids(self) -> list[str]:
        return list(self.entries)

    def class_counts(self) -> dict[int, int]:
        counts = {0: 0, 1: 0}
        for y in self.entries.values():
            counts[y] += 1
        return counts

    def require_both_classes(self, minimum: int = 1) -> None:
        counts = self.class_counts()
        if min(counts.values()) < minimum:
            raise ValidationError(
                f"need at least {minimum} case(s) per outcome class, have {counts}")


# -- number formatting -------------------------------------------------------

def fmt(x: float) -> str:
    """Shortest round-tripping decimal for a float."""
    x = float(x)
    if x == 0:
        return "0.0"
    return repr(x)


def _float(text: str, path, line: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {what} {text!r}", path, line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what} {text!r}", path, line)
    return value


def _rows(path) -> list[tuple[int, list[str]]]:
    path = Path(path)
    if not path.exists():
        raise ParseError("no such file", path)
    with open(path, newline="", encoding="utf-8") as fh:
        out = []
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            out.append((lineno, [c.strip() for c in row]))
    return out


# -- gesture files -----------------------------------------------------------

GESTURE_HEADER = ["gesture", "start", "end"]


def parse_gesture_sequence(path, alphabet: GestureAlphabet = DEFAULT_ALPHABET,
                           unknown: str = "error", case_id: str | None = None) -> GestureSequence:
    """Read a ``gesture,start,end`` file.

    The header row is optional. Labels outside ``alphabet`` raise unless
    ``unknown="exclude"``, in which case they become excluded ``X`` events.
    The case id defaults to the file stem.
    """
    if unknown not in ("error", "exclude"):
        raise ValueError("unknown must be 'error' or 'exclude'")
    rows = _rows(path)
    if rows and [c.lower() for c in rows[0][1]] == GESTURE_HEADER:
        rows = rows[1:]
    if not rows:
        raise ParseError("no events", path)
    events = []
    for lineno, row in rows:
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", path, lineno)
        label = row[0]
        if label != EXCLUDED and label not in alphabet:
            if unknown == "error":
                raise ParseError(f"unknown gesture {label!r}", path, lineno)
            label = EXCLUDED
        start = _float(row[1], path, lineno, "start")
        end = _float(row[2], path, lineno, "end")
        try:
            events.append(GestureEvent(start, end, label))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return GestureSequence(case_id or Path(path).stem, tuple(events), alphabet)


def format_gesture_sequence(seq: GestureSequence) -> str:
    buf = io.StringIO()
    buf.write(",".join(GESTURE_HEADER) + "\n")
    for e in seq.events:
        buf.write(f"{e.label},{fmt(e.start)},{fmt(e.end)}\n")
    return buf.getvalue()


# -- probability files -------------------------------------------------------

def parse_probability_stream(path, alphabet: GestureAlphabet | None = None,
                             dt: float | None = None, case_id: str | None = None
                             ) -> FrameProbabilityStream:
    """Read a ``t,<codes...>`` probability file.

    Columns are reordered to the alphabet order. When ``alphabet`` is None
    it is taken from the header. ``dt`` defaults to the median spacing of
    the ``t`` column (and must be given for single-row files).
    """
    rows = _rows(path)
    if not rows:
        raise ParseError("empty probability file", path)
    _, header = rows[0]
    if not header or header[0] != "t":
        raise ParseError("first header column must be 't'", path, rows[0][0])
    cols = header[1:]
    if len(set(cols)) != len(cols):
        raise ParseError("duplicate columns in header", path, rows[0][0])
    if alphabet is None:
        alphabet = GestureAlphabet(tuple(cols))
    missing = [c for c in alphabet if c not in cols]
    extra = [c for c in cols if c not in alphabet]
    if missing or extra:
        raise ParseError(f"header does not match alphabet (missing {missing}, extra {extra})",
                         path, rows[0][0])
    order = [cols.index(c) for c in alphabet]
    body = rows[1:]
    if not body:
        raise ParseError("no frames", path)

    times = np.empty(len(body))
    probs = np.empty((len(body), len(alphabet)))
    for i, (lineno, row) in enumerate(body):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
        times[i] = _float(row[0], path, lineno, "time")
        vals = [_float(v, path, lineno, "probability") for v in row[1:]]
        p = np.array([vals[j] for j in order])
        if np.any(p < 0):
            raise ParseError("negative probability", path, lineno)
        s = p.sum()
        if abs(s - 1.0) > ROW_SUM_TOL:
            if abs(s - 1.0) > RENORM_WINDOW:
                raise ParseError(f"row sums to {s!r}, outside 1 +/- {RENORM_WINDOW}", path, lineno)
            p = p / s
        if np.any(p > 1):
            raise ParseError("probability above 1", path, lineno)
        probs[i] = p

    if dt is None:
        if len(times) < 2:
            raise ParseError("cannot infer dt from a single frame; pass dt", path)
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise ParseError("time column must be strictly increasing", path)
        dt = float(np.median(steps))
    return FrameProbabilityStream(case_id or Path(path).stem, float(dt), probs,
                                  float(times[0]), alphabet)


def format_probability_stream(stream: FrameProbabilityStream) -> str:
    buf = io.StringIO()
    buf.write(",".join(["t", *stream.alphabet.codes]) + "\n")
    for t, row in zip(stream.times, stream.rows):
        buf.write(",".join([fmt(t), *(fmt(v) for v in row)]) + "\n")
    return buf.getvalue()


# -- outcome files -----------------------------------------------------------

def parse_outcomes(path) -> OutcomeTable:
    rows = _rows(path)
    if rows and rows[0][1][:2] == ["case_id", "outcome"]:
        rows = rows[1:]
    entries: dict[str, int] = {}
    for lineno, row in rows:
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", path, lineno)
        cid, raw = row
        if raw not in ("0", "1"):
            raise ParseError(f"outcome must be 0 or 1, got {raw!r}", path, lineno)
        if cid in entries:
            raise ParseError(f"duplicate case_id {cid!r}", path, lineno)
        entries[cid] = int(raw)
    if not entries:
        raise ParseError("no outcomes", path)
    return OutcomeTable(entries)


def format_outcomes(table: OutcomeTable) -> str:
    lines = ["case_id,outcome"] + [f"{cid},{y}" for cid, y in table.entries.items()]
    return "\n".join(lines) + "\n"


# -- frame labelling ---------------------------------------------------------

def frame_labels_from_sequence(seq: GestureSequence, dt: float, t0: float, n: int
                               ) -> list[str | None]:
    """Class of the event covering each frame time ``t0 + i*dt``.

    Events are half open ``[start, end)``; when several cover a frame the
    latest-starting one wins. Uncovered frames get ``UNLABELED`` (None).
    Excluded events never label a frame.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    times = t0 + np.arange(n) * dt
    out: list[str | None] = [UNLABELED] * n
    # later-starting events overwrite earlier ones (events are start-sorted)
    for ev in seq.events:
        if ev.excluded:
            continue
        lo = int(np.searchsorted(times, ev.start, side="left"))
        hi = int(np.searchsorted(times, ev.end, side="left"))
        for i in range(lo, hi):
            out[i] = ev.label
    return out


# -- atomic output -----------------------------------------------------------

def write_atomic(path, text: str | bytes) -> None:
    """Write via a temp file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode("utf-8") if isinstance(text, str) else text
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def iter_case_files(path, suffix: str = ".csv") -> list[Path]:
    """A single file, or every ``*suffix`` file in a directory sorted by name."""
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix == suffix and p.is_file())
    if not path.exists():
        raise ParseError("no such file or directory", path)
    return [path]


def as_sequence(labels: Sequence[str], starts: Iterable[float] | None = None,
                durations: Iterable[float] | None = None, case_id: str = "case",
                alphabet: GestureAlphabet = DEFAULT_ALPHABET) -> GestureSequence:
    """Convenience constructor, mostly for tests and examples.

    Without ``starts`` events are back to back with unit duration.
    """
    labels = list(labels)
    if durations is None:
        durations = [1.0] * len(labels)
    durations = list(durations)
    if starts is None:
        starts = list(np.concatenate([[0.0], np.cumsum(durations)[:-1]])) if labels else []
    events = tuple(GestureEvent(float(s), float(s) + float(d), g)
                   for g, s, d in zip(labels, starts, durations))
    return GestureSequence(case_id, events, alphabet)
