"""Boosted decision stumps predicting log-cost from annotation values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from droptune.space import Coordinate, SearchSpace


def features(space: SearchSpace, c: Sequence[int]) -> np.ndarray:
    """log2(1 + value) per parameter, then a constant bias component."""
    vals = [p.values[i] for p, i in zip(space.params, c)]
    return np.array([math.log2(1 + v) for v in vals] + [1.0])


def feature_matrix(space: SearchSpace, coords: Sequence[Sequence[int]]) -> np.ndarray:
    if not coords:
        return np.zeros((0, space.dimension + 1))
    table = [np.log2(1.0 + np.array(p.values, dtype=float)) for p in space.params]
    idx = np.asarray(coords, dtype=np.int64).reshape(len(coords), space.dimension)
    cols = [table[d][idx[:, d]] for d in range(space.dimension)]
    cols.append(np.ones(len(coords)))
    return np.column_stack(cols)


@dataclass(frozen=True)
class StumpEnsemble:
    base: float
    stumps: tuple[tuple[int, float, float, float], ...] = ()
    rounds: int = 50
    learning_rate: float = 0.3

    def predict_cost(self, X) -> np.ndarray:
        """Predicted cost (not log) for each row of X."""
        return np.exp(self.predict(X))

    def predict(self, X) -> np.ndarray:
        """Predicted log-cost for each row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(X.shape[0], self.base)
        for f, thr, left, right in self.stumps:
            out += np.where(X[:, f] <= thr, left, right)
        return out


class _Splits:
    """Per-feature sort orders and admissible cut positions, computed once per fit."""

    def __init__(self, X: np.ndarray):
        self.order = np.argsort(X, axis=0, kind="stable")
        self.xs = np.take_along_axis(X, self.order, axis=0)
        self.cut = self.xs[1:] > self.xs[:-1]
        n = X.shape[0]
        self.nl = np.arange(1, n, dtype=float)[:, None]
        self.nr = n - self.nl


def _best_stump(splits: _Splits, r: np.ndarray):
    """Least-squares stump for residuals r; the first feature and cut win ties."""
    n = r.shape[0]
    if n < 2 or not splits.cut.any():
        return None
    total = r.sum()
    csum = np.cumsum(r[splits.order], axis=0)[:-1]
    sr = total - csum
    gain = csum * csum / splits.nl + sr * sr / splits.nr - total * total / n
    gain = np.where(splits.cut, gain, -np.inf)
    pos = np.argmax(gain, axis=0)
    per_feature = gain[pos, np.arange(gain.shape[1])]
    f = int(np.argmax(per_feature))
    if not per_feature[f] > 1e-12 * max(1.0, float(r @ r)):
        return None
    k = int(pos[f])
    xs = splits.xs[:, f]
    nl = k + 1
    return (f, float((xs[k] + xs[k + 1]) / 2), float(csum[k, f] / nl),
            float(sr[k, f] / (n - nl)))


def fit(samples: Sequence[tuple[Sequence[float], float]], rounds: int = 50,
        learning_rate: float = 0.3) -> StumpEnsemble:
    """Least-squares boosting of depth-1 stumps on log-cost.

    Rows with non-finite or non-positive cost are dropped. Rows are sorted
    into a canonical order first, so the result does not depend on input order.
    """
    rows = [(tuple(float(v) for v in x), float(y)) for x, y in samples
            if math.isfinite(y) and y > 0]
    if len(rows) < 2:
        raise ValueError(f"need at least 2 samples with finite cost, got {len(rows)}")
    rows.sort()
    X = np.array([x for x, _ in rows])
    y = np.log(np.array([c for _, c in rows]))
    base = float(y.mean())
    pred = np.full(len(y), base)
    splits = _Splits(X)
    stumps = []
    for _ in range(rounds):
        st = _best_stump(splits, y - pred)
        if st is None:
            break
        f, thr, lm, rm = st
        left, right = learning_rate * lm, learning_rate * rm
        pred += np.where(X[:, f] <= thr, left, right)
        stumps.append((f, thr, left, right))
    return StumpEnsemble(base, tuple(stumps), rounds, learning_rate)


def fit_samples(space: SearchSpace, samples, **kw) -> StumpEnsemble:
    """Fit on measured Samples of `space`; invalid ones are skipped."""
    pts = [(features(space, s.coordinate), s.cost) for s in samples]
    return fit(pts, **kw)


def rank(model: StumpEnsemble, candidates: Sequence[Coordinate], space: SearchSpace,
         k: int) -> list[Coordinate]:
    """The k candidates with lowest predicted cost; ties keep input order."""
    if k > len(candidates):
        raise ValueError(f"k={k} exceeds the {len(candidates)} candidates")
    if k <= 0:
        return []
    pred = model.predict(feature_matrix(space, candidates))
    order = np.argsort(pred, kind="stable")[:k]
    return [tuple(candidates[i]) for i in order]
