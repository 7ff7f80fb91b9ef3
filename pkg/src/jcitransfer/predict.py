"""Feature subset ranking, separating-set selection and prediction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .admg import JciBackground, SeparationQuery, VarId
from .solver import confidence_from_losses, hypothesis_space
from .stats import InsufficientSamples, WeightedConstraint

Scorer = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class SubsetScore:
    subset: tuple[int, ...]
    risk: float


@dataclass(frozen=True)
class TransferDecision:
    """Either a certified subset (``subset`` set) or an abstention (``subset`` None)."""

    subset: tuple[int, ...] | None
    confidence: float = 0.0
    source_cv_risk: float = float("nan")

    @property
    def abstained(self) -> bool:
        return self.subset is None

    @classmethod
    def abstain(cls) -> "TransferDecision":
        return cls(None)


def _design(x: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(x.shape[0]), x])


def ols_fit(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients with intercept first (minimum-norm if rank deficient)."""
    coef, *_ = np.linalg.lstsq(_design(x), y, rcond=None)
    return coef


def ols_predict(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    return _design(x) @ coef


def fold_ids(features: np.ndarray, y: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Fold labels that depend on row content, not row position.

    Rows are put in a canonical (lexicographic) order before the seeded
    shuffle, so permuting the input rows permutes the labels along with them.
    """
    table = np.column_stack([features, y])
    canon = np.lexsort(table.T[::-1])
    perm = np.random.default_rng(seed).permutation(len(y))
    labels = np.empty(len(y), dtype=int)
    labels[canon[perm]] = np.arange(len(y)) % n_folds
    return labels


def cv_ols_risk(x: np.ndarray, y: np.ndarray, folds: np.ndarray) -> float:
    """K-fold cross-validated mean squared error of OLS with intercept."""
    sq = np.empty(len(y))
    for k in np.unique(folds):
        test = folds == k
        coef = ols_fit(x[~test], y[~test])
        sq[test] = (ols_predict(coef, x[test]) - y[test]) ** 2
    return float(sq.mean())


def forest_oob_scorer(random_state: int = 0) -> Scorer:
    """Out-of-bag MSE of a random forest regressor (needs scikit-learn)."""
    from sklearn.ensemble import RandomForestRegressor

    def score(x: np.ndarray, y: np.ndarray) -> float:
        if x.shape[1] == 0:
            return float(np.var(y))
        forest = RandomForestRegressor(oob_score=True, random_state=random_state)
        forest.fit(x, y)
        return float(np.mean((forest.oob_prediction_ - y) ** 2))

    return score


def all_subsets(candidates: Sequence[int]) -> list[tuple[int, ...]]:
    cands = sorted(candidates)
    return [s for k in range(len(cands) + 1) for s in itertools.combinations(cands, k)]


def rank_subsets(
    source: np.ndarray,
    y: int,
    candidates: Sequence[int],
    n_folds: int = 5,
    seed: int = 0,
    scorer: Scorer | None = None,
) -> list[SubsetScore]:
    """Score every subset of ``candidates`` for predicting column ``y`` on source rows.

    The default scorer is K-fold CV mean squared error of OLS, with one fold
    assignment shared by all subsets. Sorted by risk, then subset size, then
    column indices; risks within 1e-9 of var(y) of each other are ties.
    """
    source = np.asarray(source, dtype=float)
    if len(candidates) > 10:
        raise ValueError(f"{len(candidates)} candidate features is too many to enumerate")
    need = (n_folds + 1) * (len(candidates) + 1)
    if source.shape[0] < need:
        raise InsufficientSamples(f"{source.shape[0]} source rows, need at least {need}")
    target = source[:, y]
    folds = fold_ids(source[:, sorted(candidates)], target, n_folds, seed)
    scores = []
    for subset in all_subsets(candidates):
        x = source[:, list(subset)]
        risk = scorer(x, target) if scorer else cv_ols_risk(x, target, folds)
        scores.append(SubsetScore(subset, max(risk, 0.0)))
    # risks closer than 1e-9 of var(y) count as ties, so rounding noise cannot beat the size rule
    scale = float(np.var(target)) or 1.0
    return sorted(scores, key=lambda s: (round(s.risk / scale, 9), len(s.subset), s.subset))


def select_separating(
    ranked: Iterable[SubsetScore],
    constraints: Sequence[WeightedConstraint],
    bg: JciBackground,
    universe: Sequence[VarId],
) -> TransferDecision:
    """First subset in ranked order whose separation of c1 and y is certified."""
    space = hypothesis_space(tuple(universe), bg)
    losses = space.losses(constraints)
    for score in ranked:
        q = SeparationQuery(bg.c1, bg.y, frozenset(score.subset))
        conf = confidence_from_losses(losses, space.separated(q))
        if conf.value > 0:
            return TransferDecision(score.subset, conf.value, score.risk)
    return TransferDecision.abstain()


def fit_predict(source: np.ndarray, y: int, subset: Sequence[int], target: np.ndarray) -> np.ndarray:
    cols = list(subset)
    coef = ols_fit(source[:, cols], source[:, y])
    return ols_predict(coef, target[:, cols])


def evaluate(pred: Sequence[float], truth: Sequence[float]) -> float:
    pred, truth = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean((pred - truth) ** 2))


def baseline(ranked: Sequence[SubsetScore], source: np.ndarray, y: int, target: np.ndarray) -> np.ndarray:
    """Predict with the top-ranked subset, ignoring certification."""
    return fit_predict(source, y, ranked[0].subset, target)
