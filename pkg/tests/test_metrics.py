import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import brute
from gestseq.core import FrameProbabilityStream, GestureAlphabet, as_sequence
from gestseq.metrics import (ABSENT, AucReport, UndefinedAucError, frame_level_auc, roc_auc,
                             video_level_auc)


def test_auc_hand_example():
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_auc_separated_and_ties():
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert roc_auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_single_class():
    with pytest.raises(UndefinedAucError, match="undefined AUC"):
        roc_auc([0.1, 0.2], [1, 1])


def test_auc_length_mismatch():
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1])


def _instance(rng):
    n = int(rng.integers(2, 60))
    scores = rng.integers(0, 6, size=n) / 5.0  # many ties
    labels = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1
    return scores, labels


def test_auc_matches_pairwise_oracle(rng):
    for _ in range(200):
        s, y = _instance(rng)
        assert roc_auc(s, y) == brute.pairwise_auc(s.tolist(), y.tolist())


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_auc_complement(seed):
    s, y = _instance(np.random.default_rng(seed))
    assert roc_auc(s, y) + roc_auc(-s, y) == 1.0


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_auc_monotone_transform(seed):
    s, y = _instance(np.random.default_rng(seed))
    assert roc_auc(np.exp(3 * s) + 7, y) == roc_auc(s, y)


AB = GestureAlphabet(("p", "s", "k"))


def _truth():
    return as_sequence(["p", "s", "p"], [0, 2, 4], [2, 2, 2], alphabet=AB)


def test_onehot_stream_perfect():
    labels = ["p"] * 4 + ["s"] * 4 + ["p"] * 4
    rows = np.array([[1.0 if c == lab else 0.0 for c in AB] for lab in labels])
    rep = frame_level_auc(FrameProbabilityStream("v", 0.5, rows, 0.0, AB), _truth())
    assert rep.per_class == {"p": 1.0, "s": 1.0, "k": ABSENT}
    assert video_level_auc(rep) == 1.0
    assert rep.n_frames_evaluated == 12


def test_uniform_stream_half():
    rows = np.full((12, 3), 1 / 3)
    rep = frame_level_auc(FrameProbabilityStream("v", 0.5, rows, 0.0, AB), _truth())
    assert rep.present == {"p": 0.5, "s": 0.5}
    assert video_level_auc(rep) == 0.5


def test_unlabelled_frames_excluded():
    truth = as_sequence(["p", "s"], [0, 4], [2, 2], alphabet=AB)  # gap [2, 4)
    rows = np.full((12, 3), 1 / 3)
    rep = frame_level_auc(FrameProbabilityStream("v", 0.5, rows, 0.0, AB), truth)
    assert rep.n_frames_evaluated == 8


def test_random_stream_matches_oracle(rng):
    truth = _truth()
    rows = rng.dirichlet(np.ones(3), size=12)
    rep = frame_level_auc(FrameProbabilityStream("v", 0.5, rows, 0.0, AB), truth)
    lab = ["p"] * 4 + ["s"] * 4 + ["p"] * 4
    for j, c in enumerate(("p", "s")):
        y = [int(x == c) for x in lab]
        assert rep.per_class[c] == brute.pairwise_auc(rows[:, j].tolist(), y)


def test_sparse_class_marked_absent():
    truth = as_sequence(["p", "s"], [0, 5.5], [5.5, 0.5], alphabet=AB)  # s covers one frame
    rep = frame_level_auc(FrameProbabilityStream("v", 0.5, np.full((12, 3), 1 / 3), 0.0, AB), truth)
    assert rep.per_class["s"] == ABSENT


def test_no_labelled_frames():
    truth = as_sequence(["p"], [100], [1], alphabet=AB)
    with pytest.raises(UndefinedAucError):
        frame_level_auc(FrameProbabilityStream("v", 0.5, np.full((4, 3), 1 / 3), 0.0, AB), truth)


def test_video_level_mean():
    rep = AucReport({"p": 0.8, "s": 0.6, "k": ABSENT}, 0.7, 10)
    assert video_level_auc(rep) == pytest.approx(0.7, abs=1e-15)
    assert video_level_auc(AucReport({"p": 0.9}, 0.9, 3)) == 0.9
    with pytest.raises(UndefinedAucError):
        video_level_auc(AucReport({"p": ABSENT}, None, 3))
