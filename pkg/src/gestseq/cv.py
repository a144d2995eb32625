"""Stratified k-fold cross-validation with a pluggable classifier.

The default classifier is an L2-regularised logistic regression fit by
full-batch gradient descent on features standardised with training-fold
statistics only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .core import OutcomeTable, ValidationError
from .features import FeatureMatrix


@dataclass(frozen=True)
class CvConfig:
    k: int = 5
    seed: int = 0
    standardize: bool = True
    l2: float = 1.0
    max_iters: int = 5000
    tolerance: float = 1e-6
    ci: str = "normal"
    n_bootstrap: int = 2000

    def __post_init__(self):
        if self.k < 2:
            raise ValidationError("k must be >= 2")
        if self.l2 < 0:
            raise ValidationError("l2 must be >= 0")
        if self.ci not in ("normal", "bootstrap"):
            raise ValidationError("ci must be 'normal' or 'bootstrap'")


@dataclass
class CvReport:
    fold_accuracies: list[float]
    mean_accuracy: float
    ci95: tuple[float, float]
    folds: list[list[str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "ci95": list(self.ci95),
            "folds": self.folds,
        }


class Classifier(Protocol):
    def fit(self, X: np.ndarray, y: np.ndarray) -> "Classifier": ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...


def stratified_folds(outcomes: OutcomeTable | dict, k: int = 5, seed: int = 0) -> list[list[str]]:
    """Split case ids into k folds, keeping class counts within one of proportional.

    Cases of each class are shuffled and dealt round-robin; the dealing
    position carries over between classes so fold sizes stay balanced.
    """
    if not isinstance(outcomes, OutcomeTable):
        outcomes = OutcomeTable(dict(outcomes))
    if k < 2:
        raise ValidationError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: list[list[str]] = [[] for _ in range(k)]
    offset = 0
    for label in (0, 1):
        ids = sorted(c for c, y in outcomes.entries.items() if y == label)
        if len(ids) < k:
            raise ValidationError(
                f"outcome class {label} has {len(ids)} case(s), fewer than k={k} folds")
        for i, j in enumerate(rng.permutation(len(ids))):
            folds[(offset + i) % k].append(ids[j])
        offset = (offset + len(ids)) % k
    return [sorted(f) for f in folds]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean log-loss plus ``l2 / (2n) * ||w||^2`` (intercept unpenalised)."""
    z = X @ w + b
    n = len(y)
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w) / n)


def logistic_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
                  ) -> tuple[np.ndarray, float]:
    n = len(y)
    r = _sigmoid(X @ w + b) - y
    return X.T @ r / n + l2 * w / n, float(r.mean())


@dataclass
class LogisticBaseline:
    l2: float = 1.0
    max_iters: int = 5000
    tolerance: float = 1e-6
    standardize: bool = True
    coef_: np.ndarray | None = None
    intercept_: float = 0.0
    mean_: np.ndarray | None = None
    scale_: np.ndarray | None = None
    n_iter_: int = 0

    def _transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean_) / self.scale_

    def fit(self, X, y) -> "LogisticBaseline":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("non-finite training data")
        active = X.std(axis=0) > 0
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            sd = X.std(axis=0)
            self.scale_ = np.where(active, sd, 1.0)
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Z = self._transform(X)[:, active]
        n = len(y)
        w = np.zeros(Z.shape[1])
        b = 0.0
        # step 1/L with L the gradient Lipschitz bound
        smax = np.linalg.norm(Z, 2) ** 2 if Z.size else 0.0
        step = 1.0 / (0.25 * (smax + n) / n + self.l2 / n)
        for it in range(1, self.max_iters + 1):
            gw, gb = logistic_grad(w, b, Z, y, self.l2)
            if math.sqrt(gw @ gw + gb * gb) <= self.tolerance:
                break
            w -= step * gw
            b -= step * gb
        self.n_iter_ = it if self.max_iters else 0
        coef = np.zeros(X.shape[1])
        coef[active] = w
        self.coef_ = coef
        self.intercept_ = b
        return self

    def decision_function(self, X) -> np.ndarray:
        return self._transform(np.asarray(X, dtype=float)) @ self.coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(int)


def fit_baseline(train: FeatureMatrix, config: CvConfig = CvConfig()) -> LogisticBaseline:
    if train.outcomes is None:
        raise ValidationError("training matrix has no outcomes")
    counts = np.bincount(train.outcomes, minlength=2)
    if counts.min() < 2:
        raise ValidationError(f"need >= 2 training cases per class, have {counts.tolist()}")
    return LogisticBaseline(config.l2, config.max_iters, config.tolerance,
                            config.standardize).fit(train.values, train.outcomes)


def _ci(accs: np.ndarray, config: CvConfig) -> tuple[float, float]:
    mean = float(accs.mean())
    if config.ci == "bootstrap":
        rng = np.random.default_rng(config.seed)
        boots = rng.choice(accs, size=(config.n_bootstrap, len(accs)), replace=True).mean(axis=1)
        lo, hi = np.percentile(boots, [2.5, 97.5])
        return min(float(lo), mean), max(float(hi), mean)
    half = 1.96 * float(accs.std(ddof=1)) / math.sqrt(len(accs))
    return mean - half, mean + half


def cross_validate(matrix: FeatureMatrix, config: CvConfig = CvConfig(),
                   classifier_factory: Callable[[CvConfig], Classifier] | None = None
                   ) -> CvReport:
    """Fit on k-1 folds, score accuracy on the held-out fold, for every fold."""
    if matrix.outcomes is None:
        raise ValidationError("matrix has no outcomes")
    table = OutcomeTable(dict(zip(matrix.case_ids, (int(v) for v in matrix.outcomes))))
    folds = stratified_folds(table, config.k, config.seed)
    index = {c: i for i, c in enumerate(matrix.case_ids)}
    if classifier_factory is None:
        def classifier_factory(cfg):
            return LogisticBaseline(cfg.l2, cfg.max_iters, cfg.tolerance, cfg.standardize)
    accs = []
    for fold in folds:
        test = np.array(sorted(index[c] for c in fold))
        train = np.setdiff1d(np.arange(len(matrix.case_ids)), test)
        model = classifier_factory(config)
        model.fit(matrix.values[train], matrix.outcomes[train])
        pred = np.asarray(model.predict(matrix.values[test]))
        accs.append(float(np.mean(pred == matrix.outcomes[test])))
    arr = np.array(accs)
    return CvReport(accs, float(arr.mean()), _ci(arr, config), folds)
