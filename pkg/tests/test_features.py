import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import brute
from conftest import random_sequence
from gestseq.core import (EXCLUDED, GestureAlphabet, GestureEvent, GestureSequence,
                          ValidationError, as_sequence)
from gestseq.features import (FeatureMatrix, FeatureSchema, assemble_feature_vector,
                              decay_features, duration_features, dwell_features, featurize,
                              format_matrix, frequency_features, ngram_features, parse_matrix,
                              runlength_features, structure_features, summary_stats,
                              temporal_features, transition_features)


def seq(labels, starts=None, durations=None):
    return as_sequence(labels, starts, durations)


# -- worked examples----------------------------------------------------------------

def test_frequency_examples():
    f = frequency_features(seq("ppsss"))
    assert f["freq_p"] == 0.4 and f["freq_s"] == 0.6 and f["freq_k"] == 0
    assert frequency_features(seq("k"))["freq_k"] == 1.0


def test_empty_sequence_errors():
    empty = GestureSequence("e", ())
    for fn in (frequency_features, temporal_features, structure_features, duration_features):
        with pytest.raises(ValidationError):
            fn(empty)
    with pytest.raises(ValidationError):
        decay_features(empty)


def test_excluded_events_dropped():
    s = GestureSequence("x", (GestureEvent(0, 1, "p"), GestureEvent(1, 2, EXCLUDED),
                              GestureEvent(2, 3, "s")))
    assert frequency_features(s)["freq_p"] == 0.5
    with pytest.raises(ValidationError):
        frequency_features(GestureSequence("x", (GestureEvent(0, 1, EXCLUDED),)))


def test_decay_zero_rate_is_frequency(rng):
    s = random_sequence(rng, 40)
    d = decay_features(s, 0.0)
    f = frequency_features(s)
    assert all(d[f"decay_{g}"] == f[f"freq_{g}"] for g in s.alphabet)


def test_decay_half_life():
    d = decay_features(seq("ps", [0, 10], [1, 1]), math.log(2) / 10)
    assert d["decay_p"] == pytest.approx(1 / 3, abs=1e-15)
    assert d["decay_s"] == pytest.approx(2 / 3, abs=1e-15)


def test_decay_single_class():
    assert decay_features(seq("ggg"))["decay_g"] == 1.0


def test_temporal_examples():
    t = temporal_features(seq("ppspk", [0, 2, 4, 7, 8], [2, 2, 2, 1, 2]))
    assert t["total_span"] == 10.0
    assert t["gesture_rate"] == 0.5
    assert t["time_since_last_p"] == 1.0
    assert t["time_since_last_g"] == -1.0
    s = seq("pksp", [0, 3, 5, 7], [1, 1, 1, 3])
    s = GestureSequence("x", s.events + (GestureEvent(10, 11, "s"),))
    assert temporal_features(s)["time_since_last_p"] == 3.0


def test_gesture_rate_zero_span():
    assert temporal_features(seq("p", [3], [0]))["gesture_rate"] == 0.0


def test_structure_examples():
    assert structure_features(seq("ppss")) == {"unique_count": 2, "change_count": 1, "entropy": 1.0}
    assert structure_features(seq("ppp"))["entropy"] == 0.0
    assert structure_features(seq("psps"))["change_count"] == 3


def test_ngram_examples():
    f = ngram_features(seq("psp"), 2)
    assert f["2gram_p_s"] == 0.5 and f["2gram_s_p"] == 0.5
    assert sum(f.values()) == 1.0
    assert not any(ngram_features(seq("p"), 2).values())
    assert len(ngram_features(seq("p"), 3)) == 1000


def test_transition_examples():
    f = transition_features(seq("psps"))
    assert f["trans_p_s"] == 1.0 and f["trans_s_p"] == 1.0
    f = transition_features(seq("pps"))
    assert f["trans_p_p"] == 0.5 and f["trans_p_s"] == 0.5
    assert sum(v for k, v in f.items() if k.startswith("trans_s_")) == 0


def test_dwell_examples():
    f = dwell_features(seq("pks", [0, 2, 5], [1, 1, 1]))
    assert f["dwell_mean"] == 2.5
    assert f["dwell_std"] == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert f["dwell_median"] == 2.5
    assert f["dwell_before_mean_k"] == 2.0 and f["dwell_before_std_k"] == 0.0
    assert f["dwell_before_mean_p"] == 0.0  # first event has no preceding dwell
    assert not any(dwell_features(seq("p")).values())


def test_dwell_constant():
    f = dwell_features(seq("psps", [0, 3, 6, 9], [1] * 4))
    assert f["dwell_std"] == f["dwell_skew"] == f["dwell_kurt"] == 0.0


def test_summary_stats_sentinels():
    assert summary_stats([]) == dict.fromkeys(
        ("mean", "std", "min", "max", "median", "skew", "kurt", "sum"), 0.0)
    one = summary_stats([4.0])
    assert (one["mean"], one["min"], one["max"], one["median"]) == (4.0, 4.0, 4.0, 4.0)
    assert one["std"] == one["skew"] == one["kurt"] == 0.0
    two = summary_stats([1.0, 3.0])
    assert two["std"] == pytest.approx(math.sqrt(2)) and two["skew"] == two["kurt"] == 0.0
    assert summary_stats([1, 2, 3, 4])["median"] == 2.5


def test_skew_kurt_estimators():
    x = [1.0, 2.0, 2.0, 3.0, 9.0]
    s = summary_stats(x)
    mu = sum(x) / 5
    m2 = sum((v - mu) ** 2 for v in x) / 5
    assert s["skew"] == pytest.approx(sum((v - mu) ** 3 for v in x) / 5 / m2 ** 1.5, rel=1e-12)
    assert s["kurt"] == pytest.approx(sum((v - mu) ** 4 for v in x) / 5 / m2 ** 2 - 3, rel=1e-12)


def test_duration_examples():
    f = duration_features(seq("psp", [0, 2, 3], [2, 1, 3]))
    assert f["dur_sum_p"] == 5.0 and f["dur_mean_p"] == 2.5
    assert f["dur_sum_k"] == 0.0
    assert f["duration_sum"] == 6.0


def test_duration_conservation(rng):
    s = random_sequence(rng, 50)
    f = duration_features(s)
    assert sum(f[f"dur_sum_{g}"] for g in s.alphabet) == pytest.approx(f["duration_sum"], abs=1e-12)


def test_runlength_examples():
    f = runlength_features(seq("sssp"))
    assert f["max_run_s"] == 3 and f["avg_run_s"] == 3 and f["max_run_p"] == 1
    assert runlength_features(seq("psp"))["avg_run_p"] == 1.0
    assert runlength_features(seq("psp"))["max_run_k"] == 0.0


# -- schema ------------------------------------------------------------------------

@pytest.mark.parametrize("k", [2, 3, 5, 10])
def test_schema_size(k):
    schema = FeatureSchema(GestureAlphabet(tuple(f"g{i}" for i in range(k))))
    names = schema.names
    assert len(names) == len(set(names)) == k ** 3 + 2 * k ** 2 + 17 * k + 17
    assert FeatureSchema.expected_size(k) == len(names)


def test_default_schema_1387():
    assert len(FeatureSchema().names) == 1387


def test_published_feature_names_present():
    names = set(FeatureSchema().names)
    for n in ("freq_p", "trans_p_s", "2gram_p_p", "dur_sum_p", "max_run_s", "avg_run_s",
              "dwell_before_std_s", "time_since_last_h", "duration_sum", "freq_g", "trans_e_e"):
        assert n in names


def test_vector_determinism(rng):
    s = random_sequence(rng, 30, case_id="a")
    v1 = assemble_feature_vector(s)
    v2 = assemble_feature_vector(GestureSequence("b", s.events))
    assert list(v1.values.items()) == list(v2.values.items())
    shuffled = list(s.events)
    rng.shuffle(shuffled)
    assert assemble_feature_vector(GestureSequence("a", tuple(shuffled))) == v1


def test_vector_order_matches_schema(rng):
    v = assemble_feature_vector(random_sequence(rng, 20))
    assert list(v.values) == FeatureSchema().names
    assert all(math.isfinite(x) for x in v.values.values())


# -- oracle suite --------------------------------------------------------------------

def _ref(s, lam=0.01):
    events = [(e.label, e.start, e.end) for e in s.included().events]
    return brute.features(events, s.alphabet.codes, lam)


def test_matches_brute_force(rng):
    for i in range(40):
        m = int(rng.integers(1, 120))
        s = random_sequence(rng, m, codes=("p", "s", "k", "g") if i % 2 else "chkmprsage")
        v = assemble_feature_vector(s)
        ref = _ref(s)
        assert set(ref) == set(v.values)
        for name, expected in ref.items():
            assert abs(v[name] - expected) <= 1e-9, name


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000), m=st.integers(1, 60))
def test_normalisations_sum_to_one(seed, m):
    s = random_sequence(np.random.default_rng(seed), m)
    v = assemble_feature_vector(s)
    codes = s.alphabet.codes
    assert abs(sum(v[f"freq_{g}"] for g in codes) - 1) <= 1e-12
    assert abs(sum(v[f"decay_{g}"] for g in codes) - 1) <= 1e-12
    for a in codes:
        row = sum(v[f"trans_{a}_{b}"] for b in codes)
        assert row == 0 or abs(row - 1) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), m=st.integers(1, 40), shift=st.integers(0, 10_000))
def test_time_shift_invariance(seed, m, shift):
    rng = np.random.default_rng(seed)
    # quarter-second grid keeps all arithmetic exact
    labels = rng.choice(list("pskg"), size=m)
    starts = np.cumsum(rng.integers(1, 20, size=m)) / 4.0
    durs = rng.integers(0, 20, size=m) / 4.0
    s = as_sequence(labels, starts, durs)
    v = assemble_feature_vector(s)
    w = assemble_feature_vector(s.shifted(float(shift)))
    assert v == w


def test_appending_never_decreases_duration_sum(rng):
    s = random_sequence(rng, 10)
    before = assemble_feature_vector(s)["duration_sum"]
    last = s.events[-1]
    longer = GestureSequence("r", s.events + (GestureEvent(last.end, last.end + 0.5, "p"),))
    assert assemble_feature_vector(longer)["duration_sum"] >= before


# -- matrices ------------------------------------------------------------------------

def test_matrix_round_trip(tmp_path, rng):
    m = featurize([random_sequence(rng, 15, case_id=f"c{i}") for i in (3, 1, 2)])
    assert m.case_ids == ("c1", "c2", "c3")
    path = tmp_path / "m.csv"
    path.write_text(format_matrix(m))
    again = parse_matrix(path)
    assert again.names == m.names and np.array_equal(again.values, m.values)
    assert format_matrix(again) == path.read_text()


def test_matrix_validation():
    with pytest.raises(ValidationError):
        FeatureMatrix(("a",), ("x", "x"), [[1.0, 2.0]])
    with pytest.raises(ValidationError):
        FeatureMatrix(("a",), ("x",), [[float("nan")]])
    with pytest.raises(ValidationError):
        FeatureMatrix(("a", "b"), ("x",), [[1.0], [2.0]], outcomes=[0, 2])


def test_matrix_select(rng):
    m = featurize([random_sequence(rng, 10, case_id=f"c{i}") for i in range(3)])
    sub = m.select(["freq_p", "entropy"])
    assert sub.names == ("freq_p", "entropy")
    assert np.array_equal(sub.values[:, 1], m.column("entropy"))
