"""Two-sample tests, effect sizes, feature ranking, and cross-source concordance.

Everything here is pure Python/numpy; the Student t tail probability is
computed from a continued-fraction regularized incomplete beta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import FeatureMatrix

_FPMIN = 1e-300
_EPS = 1e-16
_MAX_ITER = 10000


class DegenerateVarianceError(ValueError):
    pass


# -- special functions -------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b) (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def _front(a: float, b: float, x: float) -> float:
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    return math.exp(log_front)


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    if x < (a + 1.0) / (a + b + 2.0):
        return _front(a, b, x) * _betacf(a, b, x) / a
    return 1.0 - _front(b, a, 1.0 - x) * _betacf(b, a, 1.0 - x) / b


def t_sf2(t: float, df: float) -> float:
    """Two-tailed tail probability P(|T| >= |t|) for Student's t with ``df`` dof."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, betainc(df / 2.0, 0.5, x))


# -- two-sample statistics ---------------------------------------------------

def _moments(x: Sequence[float], pivot: float = 0.0) -> tuple[int, float, float]:
    """Count, mean of ``x - pivot``, and sum of squared deviations."""
    arr = np.asarray(x, dtype=float) - pivot
    n = len(arr)
    mean = math.fsum(arr) / n
    ss = math.fsum((arr - mean) ** 2)
    return n, mean, ss


def _pivot(a, b) -> float:
    # shift by a data value so large offsets stay out of the mean difference;
    # order-free so swapping the samples negates results exactly
    heads = [float(x[0]) for x in (np.asarray(a, dtype=float), np.asarray(b, dtype=float)) if x.size]
    c = min(heads, default=0.0)
    return c if math.isfinite(c) else 0.0


def t_test_two_sample(a, b, equal_var: bool = True) -> tuple[float, float]:
    """Two-tailed two-sample t-test (Student pooled by default, Welch optional).

    Returns ``(t, p)``. When the pooled variance is zero, identical means
    give ``(0.0, 1.0)`` and differing means raise ``DegenerateVarianceError``.
    """
    c = _pivot(a, b)
    na, ma, ssa = _moments(a, c)
    nb, mb, ssb = _moments(b, c)
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least 2 values")
    diff = ma - mb
    if equal_var:
        df = na + nb - 2
        var = (ssa + ssb) / df
        se2 = var * (1.0 / na + 1.0 / nb)
    else:
        va, vb = ssa / (na - 1) / na, ssb / (nb - 1) / nb
        se2 = va + vb
        df = se2 ** 2 / (va ** 2 / (na - 1) + vb ** 2 / (nb - 1)) if se2 > 0 else 1.0
    if se2 <= 0:
        if diff == 0:
            return 0.0, 1.0
        raise DegenerateVarianceError("degenerate variance: zero spread with differing means")
    t = diff / math.sqrt(se2)
    return t, t_sf2(t, df)


def pooled_sd(a, b) -> float:
    na, _, ssa = _moments(a)
    nb, _, ssb = _moments(b)
    if na + nb < 3:
        raise ValueError("need at least 3 values in total")
    return math.sqrt((ssa + ssb) / (na + nb - 2))


def cohens_d(poor, good) -> float:
    """``(mean_good - mean_poor) / pooled_sd``; positive means higher in the good group."""
    c = _pivot(poor, good)
    _, mp_, _ = _moments(poor, c)
    _, mg, _ = _moments(good, c)
    sd = pooled_sd(poor, good)
    if sd == 0:
        if mg == mp_:
            return 0.0
        raise DegenerateVarianceError("zero pooled standard deviation")
    return (mg - mp_) / sd


def pearson_r(x, y) -> tuple[float, float]:
    """Sample correlation and its two-tailed p-value (t with n - 2 dof)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n != len(y) or n < 3:
        raise ValueError("need two equal-length vectors with at least 3 values")
    dx = x - math.fsum(x) / n
    dy = y - math.fsum(y) / n
    sxx, syy = math.fsum(dx * dx), math.fsum(dy * dy)
    if sxx == 0 or syy == 0:
        raise DegenerateVarianceError("zero variance")
    r = math.fsum(dx * dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, t_sf2(t, n - 2)


# -- ranking and concordance -------------------------------------------------

@dataclass(frozen=True)
class RankedFeature:
    name: str
    p: float
    d: float
    t: float
    degenerate: bool
    mean_poor: float
    sd_poor: float
    mean_good: float
    sd_good: float


def _group_stats(x: np.ndarray) -> tuple[float, float]:
    return float(x.mean()), float(x.std(ddof=1)) if len(x) > 1 else 0.0


def _split(matrix: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    if matrix.outcomes is None:
        raise ValueError("matrix has no outcomes attached")
    y = matrix.outcomes
    if min((y == 0).sum(), (y == 1).sum()) < 2:
        raise ValueError("need at least 2 cases in each outcome group")
    return matrix.values[y == 0], matrix.values[y == 1]


def rank_features(matrix: FeatureMatrix, equal_var: bool = True) -> list[RankedFeature]:
    """Features by ascending p; ties by |d| descending then name.

    Features whose test is degenerate (zero spread) go last with p = 1.
    """
    poor, good = _split(matrix)
    ranked = []
    for j, name in enumerate(matrix.names):
        a, b = poor[:, j], good[:, j]
        degenerate = False
        try:
            t, p = t_test_two_sample(b, a, equal_var)
            d = cohens_d(a, b)
        except DegenerateVarianceError:
            t, p, d, degenerate = 0.0, 1.0, 0.0, True
        if pooled_sd(a, b) == 0:
            degenerate = True
        ranked.append(RankedFeature(name, p, d, t, degenerate, *_group_stats(a), *_group_stats(b)))
    ranked.sort(key=lambda r: (r.degenerate, r.p, -abs(r.d), r.name))
    return ranked


@dataclass
class ConcordanceReport:
    ranked_a: list[RankedFeature]
    ranked_b: list[RankedFeature]
    k: int
    overlap: list[str]
    paired_d: dict[str, tuple[float, float]] = field(default_factory=dict)
    delta_d_avg: float | None = None
    pearson_r_of_d: float | None = None
    pearson_p_of_d: float | None = None
    correlation_defined: bool = False

    @property
    def overlap_k(self) -> int:
        return len(self.overlap)

    @property
    def signs_concordant(self) -> bool:
        return all(np.sign(da) == np.sign(db) for da, db in self.paired_d.values())

    def rows(self) -> list[dict]:
        """One row per feature, in source-a rank order."""
        b = {r.name: r for r in self.ranked_b}
        overlap = set(self.overlap)
        return [{"feature": r.name, "p_a": r.p, "p_b": b[r.name].p, "d_a": r.d,
                 "d_b": b[r.name].d, "in_overlap": r.name in overlap} for r in self.ranked_a]

    def summary(self) -> dict:
        return {
            "k": self.k,
            "overlap_k": self.overlap_k,
            "overlap": list(self.overlap),
            "delta_d_avg": self.delta_d_avg,
            "pearson_r_of_d": self.pearson_r_of_d,
            "pearson_p_of_d": self.pearson_p_of_d,
            "correlation_defined": self.correlation_defined,
            "signs_concordant": self.signs_concordant,
        }


def concordance(matrix_a: FeatureMatrix, matrix_b: FeatureMatrix, k: int = 50,
                equal_var: bool = True) -> ConcordanceReport:
    """Compare top-k p-value rankings and effect sizes of two feature sources."""
    if matrix_a.names != matrix_b.names:
        raise ValueError("matrices must share feature names in the same order")
    if matrix_a.case_ids != matrix_b.case_ids or not np.array_equal(matrix_a.outcomes,
                                                                    matrix_b.outcomes):
        raise ValueError("matrices must share case ids and outcomes")
    if not 1 <= k <= len(matrix_a.names):
        raise ValueError(f"k must be in [1, {len(matrix_a.names)}]")
    ra = rank_features(matrix_a, equal_var)
    rb = rank_features(matrix_b, equal_var)
    top_b = {r.name for r in rb[:k]}
    overlap = [r.name for r in ra[:k] if r.name in top_b]
    d_b = {r.name: r.d for r in rb}
    paired = {r.name: (r.d, d_b[r.name]) for r in ra if r.name in set(overlap)}
    report = ConcordanceReport(ra, rb, k, overlap, paired)
    if paired:
        da = np.array([v[0] for v in paired.values()])
        db = np.array([v[1] for v in paired.values()])
        report.delta_d_avg = float(np.mean(np.abs(da - db)))
        try:
            report.pearson_r_of_d, report.pearson_p_of_d = pearson_r(da, db)
            report.correlation_defined = True
        except (ValueError, DegenerateVarianceError):
            pass
    return report
