import numpy as np
import pytest

from gestseq.core import DEFAULT_ALPHABET, GestureEvent, GestureSequence


def random_sequence(rng, m, codes=DEFAULT_ALPHABET.codes, case_id="r", gaps=True, alphabet=None):
    """m events with random labels, integer-ish onsets and durations (may overlap)."""
    labels = rng.choice(list(codes), size=m)
    starts = np.cumsum(rng.uniform(0.1, 4.0, size=m)) if gaps else np.arange(m, dtype=float)
    starts = starts - starts[0] + rng.uniform(0, 50)
    durs = rng.uniform(0.05, 5.0, size=m)
    events = tuple(GestureEvent(float(s), float(s + d), str(g))
                   for g, s, d in zip(labels, starts, durs))
    return GestureSequence(case_id, events, alphabet or DEFAULT_ALPHABET)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
