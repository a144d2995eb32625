"""ROC-AUC at frame and video level."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FrameProbabilityStream, GestureSequence, frame_labels_from_sequence

ABSENT = "absent"
# per polarity; classes below this are reported absent
MIN_FRAMES = 2


class UndefinedAucError(ValueError):
    pass


@dataclass(frozen=True)
class AucReport:
    per_class: dict[str, float | str]
    macro: float | None
    n_frames_evaluated: int

    @property
    def present(self) -> dict[str, float]:
        return {c: v for c, v in self.per_class.items() if v != ABSENT}

    def to_dict(self) -> dict:
        return {
            "per_class": dict(self.per_class),
            "macro": self.macro,
            "video_level": video_level_auc(self) if self.present else None,
            "n_frames_evaluated": self.n_frames_evaluated,
        }


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC; tied (positive, negative) pairs get half credit."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and the same length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    pos = s[y == 1]
    neg = np.sort(s[y == 0])
    if len(pos) == 0 or len(neg) == 0:
        raise UndefinedAucError("undefined AUC: labels contain a single class")
    below = np.searchsorted(neg, pos, side="left")
    upto = np.searchsorted(neg, pos, side="right")
    # halves and integers only, so the sum is exact
    wins = below.sum() + 0.5 * (upto - below).sum()
    return float(wins / (len(pos) * len(neg)))


def frame_level_auc(stream: FrameProbabilityStream, truth: GestureSequence,
                    min_frames: int = MIN_FRAMES) -> AucReport:
    """One-vs-rest AUC per class over labelled frames.

    Classes with fewer than ``min_frames`` positive or negative frames are
    marked absent.
    """
    labels = frame_labels_from_sequence(truth, stream.dt, stream.t0, len(stream))
    keep = np.array([lab is not None for lab in labels])
    if not keep.any():
        raise UndefinedAucError("no labelled frames")
    lab = np.array([lab for lab in labels if lab is not None], dtype=object)
    probs = stream.rows[keep]
    per_class: dict[str, float | str] = {}
    for j, code in enumerate(stream.alphabet.codes):
        y = (lab == code).astype(int)
        npos = int(y.sum())
        if npos < min_frames or len(y) - npos < min_frames:
            per_class[code] = ABSENT
        else:
            per_class[code] = roc_auc(probs[:, j], y)
    present = [v for v in per_class.values() if v != ABSENT]
    macro = float(np.mean(present)) if present else None
    return AucReport(per_class, macro, int(keep.sum()))


def video_level_auc(report: AucReport) -> float:
    """Mean AUC over the classes present in the ground truth."""
    present = list(report.present.values())
    if not present:
        raise UndefinedAucError("no present classes")
    return float(sum(present) / len(present))
