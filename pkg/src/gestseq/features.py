"""Engineered features of a gesture sequence.

Families: frequency, decay-weighted frequency, temporal, structure,
n-grams (n = 2, 3), transition probabilities, dwell times (inter-onset
intervals), gesture durations, and run lengths. For an alphabet of size
k the default schema has ``k**3 + 2*k**2 + 17*k + 17`` features.

Degenerate statistics are reported as 0.0, never NaN; the time since an
absent gesture is -1.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (DEFAULT_ALPHABET, GestureAlphabet, GestureSequence, ParseError,
                   ValidationError, fmt)

ABSENT_SINCE = -1.0
DWELL_STATS = ("mean", "std", "min", "max", "median", "skew", "kurt")
DURATION_STATS = ("mean", "std", "skew", "kurt", "sum")


@dataclass(frozen=True)
class FeatureSchema:
    alphabet: GestureAlphabet = DEFAULT_ALPHABET
    decay_lambda: float = 0.01
    ngram_orders: tuple[int, ...] = (2, 3)

    def __post_init__(self):
        if not (self.decay_lambda >= 0 and math.isfinite(self.decay_lambda)):
            raise ValidationError("decay_lambda must be >= 0")
        orders = tuple(sorted(set(self.ngram_orders)))
        if any(o < 1 for o in orders):
            raise ValidationError("n-gram orders must be >= 1")
        object.__setattr__(self, "ngram_orders", orders)

    @property
    def names(self) -> list[str]:
        codes = self.alphabet.codes
        names = [f"freq_{g}" for g in codes]
        names += [f"decay_{g}" for g in codes]
        names += ["total_span", "gesture_rate"] + [f"time_since_last_{g}" for g in codes]
        names += ["unique_count", "change_count", "entropy"]
        for n in self.ngram_orders:
            names += [_ngram_name(gram) for gram in product(codes, repeat=n)]
        names += [f"trans_{a}_{b}" for a in codes for b in codes]
        names += [f"dwell_{s}" for s in DWELL_STATS]
        names += [f"dwell_before_{s}_{g}" for g in codes for s in DWELL_STATS]
        names += [f"duration_{s}" for s in DURATION_STATS]
        names += [f"dur_{s}_{g}" for g in codes for s in DURATION_STATS]
        names += [f"max_run_{g}" for g in codes] + [f"avg_run_{g}" for g in codes]
        return names

    @staticmethod
    def expected_size(k: int) -> int:
        return k ** 3 + 2 * k ** 2 + 17 * k + 17


@dataclass(frozen=True)
class FeatureVector:
    case_id: str
    values: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = list(self.values) if names is None else names
        return np.array([self.values[n] for n in names])


def _ngram_name(gram: Sequence[str]) -> str:
    return f"{len(gram)}gram_" + "_".join(gram)


def _prepare(seq: GestureSequence, allow_empty: bool = False) -> GestureSequence:
    seq = seq.included()
    if not seq.events and not allow_empty:
        raise ValidationError(f"case {seq.case_id!r}: empty gesture sequence")
    return seq


# -- summary statistics ------------------------------------------------------

def _central_moments(x: np.ndarray) -> tuple[float, float, float]:
    dev = x - x.mean()
    return float(np.mean(dev ** 2)), float(np.mean(dev ** 3)), float(np.mean(dev ** 4))


def summary_stats(values) -> dict[str, float]:
    """mean, sample std, min, max, median, g1 skew, excess kurtosis.

    n = 0 gives all zeros; n = 1 gives std = skew = kurt = 0; n = 2 gives
    skew = kurt = 0; constant data gives std = skew = kurt = 0.
    """
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        return dict.fromkeys(DWELL_STATS + ("sum",), 0.0)
    out = {
        "mean": float(x.mean()),
        "min": float(x.min()),
        "max": float(x.max()),
        "median": float(np.median(x)),
        "sum": float(x.sum()),
        "std": 0.0,
        "skew": 0.0,
        "kurt": 0.0,
    }
    if n == 1 or out["min"] == out["max"]:
        return out
    out["std"] = float(x.std(ddof=1))
    if n >= 3:
        m2, m3, m4 = _central_moments(x)
        if m2 > 0:
            out["skew"] = m3 / m2 ** 1.5
            out["kurt"] = m4 / m2 ** 2 - 3.0
    return out


# -- families ----------------------------------------------------------------

def frequency_features(seq: GestureSequence) -> dict[str, float]:
    seq = _prepare(seq)
    m = len(seq)
    labels = seq.labels
    return {f"freq_{g}": labels.count(g) / m for g in seq.alphabet}


def decay_features(seq: GestureSequence, decay_lambda: float = 0.01) -> dict[str, float]:
    """Counts weighted by ``exp(-lambda * (t_last - t_i))`` on start times, normalised."""
    if decay_lambda < 0:
        raise ValidationError("decay_lambda must be >= 0")
    seq = _prepare(seq)
    starts = np.array([e.start for e in seq.events])
    w = np.exp(-decay_lambda * (starts[-1] - starts))
    labels = np.array(seq.labels)
    raw = {g: float(w[labels == g].sum()) for g in seq.alphabet}
    total = sum(raw.values())
    return {f"decay_{g}": v / total for g, v in raw.items()}


def temporal_features(seq: GestureSequence) -> dict[str, float]:
    seq = _prepare(seq)
    span = seq.duration
    m = len(seq)
    t_last = seq.events[-1].start
    out = {"total_span": span, "gesture_rate": m / span if span > 0 else 0.0}
    latest = {}
    for e in seq.events:
        latest[e.label] = e.start
    for g in seq.alphabet:
        out[f"time_since_last_{g}"] = t_last - latest[g] if g in latest else ABSENT_SINCE
    return out


def structure_features(seq: GestureSequence) -> dict[str, float]:
    seq = _prepare(seq)
    labels = seq.labels
    m = len(labels)
    counts = {g: labels.count(g) for g in set(labels)}
    entropy = -sum((c / m) * math.log2(c / m) for c in counts.values())
    return {
        "unique_count": float(len(counts)),
        "change_count": float(sum(a != b for a, b in zip(labels, labels[1:]))),
        "entropy": entropy + 0.0,
    }


def ngram_features(seq: GestureSequence, n: int) -> dict[str, float]:
    """Sliding-window n-gram counts divided by ``max(m - n + 1, 1)``."""
    seq = _prepare(seq, allow_empty=True)
    labels = seq.labels
    codes = seq.alphabet.codes
    out = {_ngram_name(gram): 0.0 for gram in product(codes, repeat=n)}
    windows = len(labels) - n + 1
    if windows <= 0:
        return out
    counts: dict[str, int] = {}
    for i in range(windows):
        name = _ngram_name(labels[i:i + n])
        counts[name] = counts.get(name, 0) + 1
    for name, c in counts.items():
        out[name] = c / windows
    return out


def transition_features(seq: GestureSequence) -> dict[str, float]:
    seq = _prepare(seq, allow_empty=True)
    codes = seq.alphabet.codes
    idx = {g: i for i, g in enumerate(codes)}
    counts = np.zeros((len(codes), len(codes)))
    labels = seq.labels
    for a, b in zip(labels, labels[1:]):
        counts[idx[a], idx[b]] += 1
    rows = counts.sum(axis=1, keepdims=True)
    probs = np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)
    return {f"trans_{a}_{b}": float(probs[i, j])
            for i, a in enumerate(codes) for j, b in enumerate(codes)}


def dwell_features(seq: GestureSequence) -> dict[str, float]:
    """Inter-onset interval statistics, globally and preceding each class."""
    seq = _prepare(seq, allow_empty=True)
    starts = np.array([e.start for e in seq.events])
    dwell = np.diff(starts)
    labels = np.array(seq.labels[1:], dtype=object)
    stats = summary_stats(dwell)
    out = {f"dwell_{s}": stats[s] for s in DWELL_STATS}
    for g in seq.alphabet:
        stats = summary_stats(dwell[labels == g] if len(dwell) else [])
        out.update({f"dwell_before_{s}_{g}": stats[s] for s in DWELL_STATS})
    return out


def duration_features(seq: GestureSequence) -> dict[str, float]:
    seq = _prepare(seq)
    dur = np.array([e.duration for e in seq.events])
    labels = np.array(seq.labels, dtype=object)
    stats = summary_stats(dur)
    out = {f"duration_{s}": stats[s] for s in DURATION_STATS}
    for g in seq.alphabet:
        stats = summary_stats(dur[labels == g])
        out.update({f"dur_{s}_{g}": stats[s] for s in DURATION_STATS})
    return out


def runlength_features(seq: GestureSequence) -> dict[str, float]:
    seq = _prepare(seq, allow_empty=True)
    runs: dict[str, list[int]] = {g: [] for g in seq.alphabet}
    prev = None
    for g in seq.labels:
        if g == prev:
            runs[g][-1] += 1
        else:
            runs[g].append(1)
        prev = g
    out = {f"max_run_{g}": float(max(r)) if r else 0.0 for g, r in runs.items()}
    out.update({f"avg_run_{g}": sum(r) / len(r) if r else 0.0 for g, r in runs.items()})
    return out


def assemble_feature_vector(seq: GestureSequence, schema: FeatureSchema | None = None
                            ) -> FeatureVector:
    """All families for one case, ordered by ``schema.names``."""
    if schema is None:
        schema = FeatureSchema(seq.alphabet)
    if seq.alphabet != schema.alphabet:
        raise ValidationError("sequence alphabet differs from schema alphabet")
    seq = _prepare(seq)
    values: dict[str, float] = {}
    values.update(frequency_features(seq))
    values.update(decay_features(seq, schema.decay_lambda))
    values.update(temporal_features(seq))
    values.update(structure_features(seq))
    for n in schema.ngram_orders:
        values.update(ngram_features(seq, n))
    values.update(transition_features(seq))
    values.update(dwell_features(seq))
    values.update(duration_features(seq))
    values.update(runlength_features(seq))
    names = schema.names
    ordered = {name: float(values[name]) for name in names}
    if len(ordered) != len(values) or not all(math.isfinite(v) for v in ordered.values()):
        raise ValidationError(f"case {seq.case_id!r}: non-finite or unexpected feature")
    return FeatureVector(seq.case_id, ordered)


# -- cohort matrices ---------------------------------------------------------

@dataclass(frozen=True)
class FeatureMatrix:
    """Cases x features, optionally with aligned binary outcomes."""

    case_ids: tuple[str, ...]
    names: tuple[str, ...]
    values: np.ndarray
    outcomes: np.ndarray | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        object.__setattr__(self, "case_ids", tuple(self.case_ids))
        object.__setattr__(self, "names", tuple(self.names))
        if vals.shape != (len(self.case_ids), len(self.names)):
            raise ValidationError(
                f"matrix shape {vals.shape} != ({len(self.case_ids)}, {len(self.names)})")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("duplicate feature names")
        if len(set(self.case_ids)) != len(self.case_ids):
            raise ValidationError("duplicate case ids")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("non-finite feature value")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.outcomes is not None:
            y = np.array(self.outcomes, dtype=int)
            if y.shape != (len(self.case_ids),) or not np.isin(y, (0, 1)).all():
                raise ValidationError("outcomes must be a 0/1 vector aligned with cases")
            y.setflags(write=False)
            object.__setattr__(self, "outcomes", y)

    @classmethod
    def from_vectors(cls, vectors: Iterable[FeatureVector]) -> "FeatureMatrix":
        vectors = sorted(vectors, key=lambda v: v.case_id)
        if not vectors:
            raise ValidationError("no feature vectors")
        names = tuple(vectors[0].values)
        for v in vectors:
            if tuple(v.values) != names:
                raise ValidationError(f"case {v.case_id!r} has a different feature schema")
        return cls(tuple(v.case_id for v in vectors), names,
                   np.array([v.as_array(names) for v in vectors]))

    def with_outcomes(self, outcomes) -> "FeatureMatrix":
        """Attach outcomes from an ``OutcomeTable`` (or mapping), matching by case id."""
        entries = getattr(outcomes, "entries", outcomes)
        missing = [c for c in self.case_ids if c not in entries]
        if missing:
            raise ValidationError(f"no outcome for cases {missing[:5]}")
        return FeatureMatrix(self.case_ids, self.names, self.values,
                             np.array([entries[c] for c in self.case_ids]))

    def subset(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return FeatureMatrix(tuple(self.case_ids[i] for i in rows), self.names, self.values[rows],
                             None if self.outcomes is None else self.outcomes[rows])

    def select(self, names) -> "FeatureMatrix":
        """Keep only the named columns, in the order given."""
        cols = [self.names.index(n) for n in names]
        return FeatureMatrix(self.case_ids, tuple(names), self.values[:, cols], self.outcomes)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]


def format_matrix(matrix: FeatureMatrix) -> str:
    buf = io.StringIO()
    buf.write(",".join(("case_id",) + matrix.names) + "\n")
    for cid, row in zip(matrix.case_ids, matrix.values):
        buf.write(",".join([cid, *(fmt(v) for v in row)]) + "\n")
    return buf.getvalue()


def parse_matrix(path) -> FeatureMatrix:
    path = Path(path)
    if not path.exists():
        raise ParseError("no such file", path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "case_id":
            raise ParseError("header must start with 'case_id'", path, 1)
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(str(exc), path, lineno) from None
            ids.append(row[0])
    if not ids:
        raise ParseError("no cases", path)
    return FeatureMatrix(tuple(ids), tuple(header[1:]), np.array(rows))


def featurize(sequences: Iterable[GestureSequence], schema: FeatureSchema | None = None
              ) -> FeatureMatrix:
    return FeatureMatrix.from_vectors(assemble_feature_vector(s, schema) for s in sequences)
