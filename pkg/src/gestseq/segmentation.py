"""Frame probabilities to gesture sequences via kernel-cost PELT.

The stream's probability rows are segmented with PELT under a Gaussian
kernel cost; each segment is then labelled with its weighted dominant
class and adjacent equal labels are merged.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _pelt_py
from .core import (FrameProbabilityStream, GestureEvent, GestureSequence, ValidationError)

if os.environ.get("GESTSEQ_PURE_PYTHON"):
    _pelt_rbf = _pelt_py.pelt_rbf
    BACKEND = "python"
else:
    try:
        from ._pelt_ext import pelt_rbf as _pelt_rbf
        BACKEND = "cython"
    except ImportError:
        _pelt_rbf = _pelt_py.pelt_rbf
        BACKEND = "python"

GAMMA_SUBSAMPLE = 512


@dataclass(frozen=True)
class SegmentationConfig:
    penalty: float = 0.5
    gamma: float | str = "median"
    min_segment_frames: int = 2
    class_weights: Mapping[str, float] = field(default_factory=dict)
    prune: bool = True

    def __post_init__(self):
        if not (self.penalty >= 0 and math.isfinite(self.penalty)):
            raise ValidationError(f"penalty must be >= 0, got {self.penalty}")
        if isinstance(self.gamma, str):
            if self.gamma not in ("median", "median-heuristic"):
                raise ValidationError(f"gamma must be a positive number or 'median', got {self.gamma!r}")
        elif not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if int(self.min_segment_frames) < 1:
            raise ValidationError("min_segment_frames must be >= 1")
        for code, w in self.class_weights.items():
            if not w > 0:
                raise ValidationError(f"weight for {code!r} must be positive, got {w}")

    def weights_for(self, codes: Sequence[str]) -> np.ndarray:
        unknown = set(self.class_weights) - set(codes)
        if unknown:
            raise ValidationError(f"weights given for unknown classes {sorted(unknown)}")
        return np.array([float(self.class_weights.get(c, 1.0)) for c in codes])


@dataclass(frozen=True)
class Segment:
    start_frame: int
    end_frame: int
    label: str
    mean_prob: tuple[float, ...]


def _rows(stream) -> np.ndarray:
    if isinstance(stream, FrameProbabilityStream):
        return stream.rows
    return np.asarray(stream, dtype=float)


def rbf_cost(stream, a: int, b: int, gamma: float) -> float:
    """Kernel cost of rows ``a..b-1``: ``sum k(y_t, y_t) - sum_{s,t} k(y_s, y_t) / (b - a)``."""
    Y = _rows(stream)
    if not 0 <= a < b <= len(Y):
        raise ValueError(f"invalid segment [{a}, {b}) for {len(Y)} frames")
    block = Y[a:b]
    d2 = ((block[:, None, :] - block[None, :, :]) ** 2).sum(axis=2)
    gram = np.exp(-gamma * d2)
    return float(max(np.trace(gram) - gram.sum() / (b - a), 0.0))


def resolve_gamma(stream) -> float:
    """Median-heuristic bandwidth: 1 / median pairwise squared distance.

    Uses all pairs when n <= 512, otherwise every ``ceil(n/512)``-th row.
    Falls back to 1.0 when the median distance is zero.
    """
    Y = _rows(stream)
    n = len(Y)
    if n < 2:
        return 1.0
    if n > GAMMA_SUBSAMPLE:
        Y = Y[::math.ceil(n / GAMMA_SUBSAMPLE)]
    i, j = np.triu_indices(len(Y), k=1)
    med = float(np.median(((Y[i] - Y[j]) ** 2).sum(axis=1)))
    if med == 0.0:
        return 1.0
    return 1.0 / med


def _gamma(stream, config: SegmentationConfig) -> float:
    if isinstance(config.gamma, str):
        return resolve_gamma(stream)
    return float(config.gamma)


def pelt_changepoints(stream, config: SegmentationConfig = SegmentationConfig(),
                      gamma: float | None = None) -> list[int]:
    """Breakpoints minimising total kernel cost plus ``penalty`` per change.

    Ascending, excludes 0, always ends with ``n``.
    """
    Y = _rows(stream)
    if gamma is None:
        gamma = _gamma(stream, config)
    bkps, _ = _pelt_rbf(Y, float(gamma), float(config.penalty),
                        int(config.min_segment_frames), bool(config.prune))
    return bkps


def penalized_cost(stream, breakpoints: Sequence[int], gamma: float, penalty: float) -> float:
    """Objective value of a partition (segment costs + penalty per interior breakpoint)."""
    bounds = [0, *breakpoints]
    total = sum(rbf_cost(stream, a, b, gamma) for a, b in zip(bounds, bounds[1:]))
    return total + penalty * (len(breakpoints) - 1)


def label_segments(stream: FrameProbabilityStream, breakpoints: Sequence[int],
                   class_weights: Mapping[str, float] | None = None) -> list[Segment]:
    """Weighted dominant class per segment; adjacent equal labels are merged."""
    codes = stream.alphabet.codes
    weights = SegmentationConfig(class_weights=dict(class_weights or {})).weights_for(codes)
    Y = stream.rows
    n = len(Y)
    bounds = [0, *breakpoints]
    if bounds[-1] != n or any(b <= a for a, b in zip(bounds, bounds[1:])):
        raise ValueError(f"breakpoints {list(breakpoints)} do not partition {n} frames")

    merged: list[tuple[int, int, int]] = []
    for a, b in zip(bounds, bounds[1:]):
        scores = weights * Y[a:b].mean(axis=0)
        lab = int(np.argmax(scores))  # first maximum = alphabet order tie-break
        if merged and merged[-1][2] == lab:
            merged[-1] = (merged[-1][0], b, lab)
        else:
            merged.append((a, b, lab))
    return [Segment(a, b, codes[lab], tuple(float(v) for v in Y[a:b].mean(axis=0)))
            for a, b, lab in merged]


def aggregate(stream: FrameProbabilityStream, config: SegmentationConfig = SegmentationConfig()
              ) -> GestureSequence:
    """Segment a probability stream into a gesture sequence."""
    bkps = pelt_changepoints(stream, config)
    segments = label_segments(stream, bkps, config.class_weights)
    events = tuple(
        GestureEvent(stream.t0 + s.start_frame * stream.dt, stream.t0 + s.end_frame * stream.dt,
                     s.label)
        for s in segments)
    return GestureSequence(stream.case_id, events, stream.alphabet)


def penalty_sweep(stream: FrameProbabilityStream, config: SegmentationConfig = SegmentationConfig(),
                  penalties: Sequence[float] | None = None) -> list[tuple[float, int]]:
    """Number of aggregated events for each penalty (default 0, 0.05, ..., 1)."""
    if penalties is None:
        penalties = [round(0.05 * i, 2) for i in range(21)]
    gamma = _gamma(stream, config)
    out = []
    for pen in penalties:
        cfg = SegmentationConfig(penalty=pen, gamma=gamma,
                                 min_segment_frames=config.min_segment_frames,
                                 class_weights=config.class_weights, prune=config.prune)
        out.append((float(pen), len(aggregate(stream, cfg))))
    return out
