"""Seeded synthetic gesture sequences, probability streams, and cohorts.

A first-order Markov chain over the alphabet drives gesture order,
durations are log-normal, and frames are rendered as softmax of a scaled
one-hot logit plus Gaussian noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .core import (DEFAULT_ALPHABET, FrameProbabilityStream, GestureAlphabet, GestureEvent,
                   GestureSequence, OutcomeTable, ValidationError, frame_labels_from_sequence)


@dataclass(frozen=True)
class SynthConfig:
    alphabet: GestureAlphabet = DEFAULT_ALPHABET
    n_events: int = 270
    mean_duration: float = 2.0
    duration_spread: float = 0.3
    # "uniform": equal probability over every *other* class
    transitions: str | tuple[tuple[float, ...], ...] = "uniform"
    fps: float = 6.0
    noise_sigma: float = 0.05
    softmax_temperature: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_events < 1:
            raise ValidationError("n_events must be >= 1")
        if not self.mean_duration > 0 or self.duration_spread < 0:
            raise ValidationError("need mean_duration > 0 and duration_spread >= 0")
        if not self.fps > 0 or not self.softmax_temperature > 0:
            raise ValidationError("fps and softmax_temperature must be positive")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if not isinstance(self.transitions, str):
            object.__setattr__(self, "transitions",
                               tuple(tuple(float(v) for v in row) for row in self.transitions))
        self.transition_matrix()

    @property
    def dt(self) -> float:
        return 1.0 / self.fps

    def transition_matrix(self) -> np.ndarray:
        k = len(self.alphabet)
        if isinstance(self.transitions, str):
            if self.transitions != "uniform":
                raise ValidationError(f"unknown transitions value {self.transitions!r}")
            P = np.full((k, k), 1.0 / (k - 1))
            np.fill_diagonal(P, 0.0)
            return P
        P = np.array(self.transitions, dtype=float)
        if P.shape != (k, k):
            raise ValidationError(f"transition matrix must be {k}x{k}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
            raise ValidationError("transition matrix rows must be non-negative and sum to 1")
        return P


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def generate_sequence(config: SynthConfig, case_id: str = "synth",
                      class_duration_scale: Mapping[str, float] | None = None) -> GestureSequence:
    """Contiguous Markov-chain gesture sequence starting at t = 0."""
    rng = _rng(config.seed)
    codes = config.alphabet.codes
    k = len(codes)
    P = config.transition_matrix()
    cum = np.cumsum(P, axis=1)
    sigma = config.duration_spread
    mu = math.log(config.mean_duration) - 0.5 * sigma ** 2
    scale = np.array([float((class_duration_scale or {}).get(c, 1.0)) for c in codes])

    state = int(rng.integers(k))
    t = 0.0
    events = []
    for i in range(config.n_events):
        if i:
            state = min(int(np.searchsorted(cum[state], rng.random(), side="right")), k - 1)
        dur = float(rng.lognormal(mu, sigma)) * scale[state]
        events.append(GestureEvent(t, t + dur, codes[state]))
        t += dur
    return GestureSequence(case_id, tuple(events), config.alphabet)


def render_stream(seq: GestureSequence, config: SynthConfig) -> FrameProbabilityStream:
    """Frames every ``1/fps`` s over the sequence span; softmax(onehot/T + noise)."""
    rng = _rng([config.seed, 1])
    dt = config.dt
    t0 = seq.events[0].start
    n = max(1, int(math.ceil((seq.duration) / dt - 1e-9)))
    labels = frame_labels_from_sequence(seq, dt, t0, n)
    codes = config.alphabet.codes
    idx = {c: i for i, c in enumerate(codes)}
    logits = np.zeros((n, len(codes)))
    for i, lab in enumerate(labels):
        if lab is not None:
            logits[i, idx[lab]] = 1.0 / config.softmax_temperature
    if config.noise_sigma > 0:
        logits += rng.normal(0.0, config.noise_sigma, size=logits.shape)
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    return FrameProbabilityStream(seq.case_id, dt, probs, t0, config.alphabet)


@dataclass(frozen=True)
class OutcomeModel:
    """Differences planted in the good-outcome group.

    ``freq_effect[g]``: log-multiplier on transition weight *into* g.
    ``self_transition[g]``: self-transition probability of g.
    ``duration_effect[g]``: multiplier on mean duration of g.
    """

    freq_effect: Mapping[str, float] = field(default_factory=dict)
    self_transition: Mapping[str, float] = field(default_factory=dict)
    duration_effect: Mapping[str, float] = field(default_factory=dict)

    def apply(self, config: SynthConfig) -> tuple[SynthConfig, dict[str, float]]:
        codes = config.alphabet.codes
        P = config.transition_matrix()
        for g, eff in self.freq_effect.items():
            P[:, codes.index(g)] *= math.exp(eff)
        for g, prob in self.self_transition.items():
            i = codes.index(g)
            off = np.delete(P[i], i)
            off = off / off.sum() * (1.0 - prob) if off.sum() > 0 else off
            P[i] = np.insert(off, i, prob)
        P = P / P.sum(axis=1, keepdims=True)
        return replace(config, transitions=tuple(map(tuple, P))), dict(self.duration_effect)


def generate_cohort(config: SynthConfig, n_cases: int, outcome_model: OutcomeModel | None = None
                    ) -> tuple[dict[str, GestureSequence], OutcomeTable]:
    """Cases ``case000..``; odd indices are good outcome (1) and carry the planted effects.

    Case i uses seed ``config.seed + i`` so cases can be generated in any order.
    """
    if n_cases < 2:
        raise ValidationError("n_cases must be >= 2")
    outcome_model = outcome_model or OutcomeModel()
    good_config, good_scale = outcome_model.apply(config)
    width = max(3, len(str(n_cases - 1)))
    cases: dict[str, GestureSequence] = {}
    outcomes: dict[str, int] = {}
    for i in range(n_cases):
        cid = f"case{i:0{width}d}"
        y = i % 2
        base = good_config if y else config
        cases[cid] = generate_sequence(replace(base, seed=config.seed + i), cid,
                                       good_scale if y else None)
        outcomes[cid] = y
    return cases, OutcomeTable(outcomes)
