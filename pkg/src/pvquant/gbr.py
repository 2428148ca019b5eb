"""Per-quantile gradient-boosted regression trees on the pinball loss.

One independent learner per (quantile level, horizon step). Each learner
starts from the empirical q-quantile of its targets; every stage fits a
depth-limited tree to the negative pinball gradient (variance-reduction
splits) and then resets each leaf to the empirical q-quantile of the current
residuals in that leaf.

Trees of one learner are stored in flat node pools; ``roots[m]`` is the node
index of stage ``m``'s root and leaves have ``feature == -1``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import QuantileLevels, QuantileMatrix, enforce_monotonicity
from .errors import EmptySampleSet, InvalidQuantile, ShapeMismatch, UntrainedModel

log = logging.getLogger(__name__)

_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class GbrConfig:
    learning_rate: float = 1e-2
    max_depth: int = 5
    n_estimators: int = 500
    min_samples_leaf: int = 5

    def __post_init__(self):
        if not (self.learning_rate > 0 and self.max_depth > 0 and self.n_estimators > 0 and self.min_samples_leaf > 0):
            raise ValueError(f"all GBR settings must be positive: {self}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "n_estimators": self.n_estimators,
            "min_samples_leaf": self.min_samples_leaf,
        }


@njit(cache=True)
def _quantile_rank(n, q):
    k = int(np.ceil(n * q - 1e-9))
    if k < 1:
        k = 1
    if k > n:
        k = n
    return k - 1


def empirical_quantile(x, q: float) -> float:
    """Smallest sample value whose empirical CDF reaches ``q`` (a pinball minimizer)."""
    s = np.sort(np.asarray(x, dtype=float).ravel())
    if s.size == 0:
        raise EmptySampleSet("empirical quantile of an empty sample")
    return float(s[_quantile_rank(s.size, q)])


@njit(cache=True)
def _grow_tree(X, order, grad, resid, q, max_depth, min_leaf, feat, thr, left, right, val, base):
    n, p = X.shape
    max_nodes = 2 ** (max_depth + 1) - 1
    node_of = np.zeros(n, np.int64)
    cnt = np.zeros(max_nodes)
    tot = np.zeros(max_nodes)
    run_cnt = np.zeros(max_nodes)
    run_sum = np.zeros(max_nodes)
    last_x = np.zeros(max_nodes)
    best_gain = np.zeros(max_nodes)
    best_feat = np.full(max_nodes, -1, np.int64)
    best_thr = np.zeros(max_nodes)
    feat[base] = -1
    left[base] = -1
    right[base] = -1
    n_nodes = 1
    lo, hi = 0, 1
    for depth in range(max_depth):
        for m in range(lo, hi):
            cnt[m] = 0.0
            tot[m] = 0.0
            best_gain[m] = _MIN_GAIN
            best_feat[m] = -1
        for i in range(n):
            m = node_of[i]
            if m >= lo:
                cnt[m] += 1.0
                tot[m] += grad[i]
        for j in range(p):
            for m in range(lo, hi):
                run_cnt[m] = 0.0
                run_sum[m] = 0.0
            for t in range(n):
                i = order[j, t]
                m = node_of[i]
                if m < lo:
                    continue
                x = X[i, j]
                nl = run_cnt[m]
                if nl > 0 and x > last_x[m]:
                    nr = cnt[m] - nl
                    if nl >= min_leaf and nr >= min_leaf:
                        sl = run_sum[m]
                        sr = tot[m] - sl
                        gain = sl * sl / nl + sr * sr / nr - tot[m] * tot[m] / cnt[m]
                        if gain > best_gain[m]:
                            best_gain[m] = gain
                            best_feat[m] = j
                            best_thr[m] = last_x[m]
                run_cnt[m] = nl + 1.0
                run_sum[m] += grad[i]
                last_x[m] = x
        new_lo = n_nodes
        for m in range(lo, hi):
            if best_feat[m] >= 0:
                g = base + m
                feat[g] = best_feat[m]
                thr[g] = best_thr[m]
                left[g] = base + n_nodes
                right[g] = base + n_nodes + 1
                for c in range(2):
                    feat[base + n_nodes + c] = -1
                    left[base + n_nodes + c] = -1
                    right[base + n_nodes + c] = -1
                n_nodes += 2
        if n_nodes == new_lo:
            break
        for i in range(n):
            m = node_of[i]
            if m >= lo and best_feat[m] >= 0:
                if X[i, best_feat[m]] <= best_thr[m]:
                    node_of[i] = left[base + m] - base
                else:
                    node_of[i] = right[base + m] - base
        lo, hi = new_lo, n_nodes
    # leaf values: q-quantile of the residuals falling in each leaf
    idx = np.argsort(node_of, kind="mergesort")
    s = 0
    while s < n:
        m = node_of[idx[s]]
        e = s
        while e < n and node_of[idx[e]] == m:
            e += 1
        r = np.empty(e - s)
        for t in range(s, e):
            r[t - s] = resid[idx[t]]
        r.sort()
        val[base + m] = r[_quantile_rank(e - s, q)]
        s = e
    return n_nodes, node_of


@njit(cache=True)
def mean_pinball(y, pred, q):
    s = 0.0
    for i in range(y.size):
        e = y[i] - pred[i]
        s += q * e if e > 0 else (q - 1.0) * e
    return s / y.size


@njit(cache=True)
def _fit_learner(X, order, y, q, lr, n_est, max_depth, min_leaf, init):
    n = X.shape[0]
    max_nodes = 2 ** (max_depth + 1) - 1
    cap = max_nodes * n_est
    feat = np.empty(cap, np.int64)
    thr = np.zeros(cap)
    left = np.empty(cap, np.int64)
    right = np.empty(cap, np.int64)
    val = np.zeros(cap)
    roots = np.empty(n_est, np.int64)
    trace = np.empty(n_est + 1)
    pred = np.full(n, init)
    grad = np.empty(n)
    resid = np.empty(n)

    trace[0] = mean_pinball(y, pred, q)
    base = 0
    for m in range(n_est):
        for i in range(n):
            resid[i] = y[i] - pred[i]
            grad[i] = q if resid[i] > 0 else q - 1.0
        used, node_of = _grow_tree(X, order, grad, resid, q, max_depth, min_leaf, feat, thr, left, right, val, base)
        for i in range(n):
            pred[i] += lr * val[base + node_of[i]]
        roots[m] = base
        base += used
        trace[m + 1] = mean_pinball(y, pred, q)
    return feat[:base].copy(), thr[:base].copy(), left[:base].copy(), right[:base].copy(), val[:base].copy(), roots, trace


@njit(cache=True)
def _predict_learner(X, feat, thr, left, right, val, roots, init, lr, n_stages):
    n = X.shape[0]
    out = np.full(n, init)
    for i in range(n):
        acc = 0.0
        for m in range(n_stages):
            node = roots[m]
            while feat[node] >= 0:
                if X[i, feat[node]] <= thr[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += val[node]
        out[i] += lr * acc
    return out


@dataclass
class TreeLearner:
    """Boosted trees for a single (quantile, step) pair."""

    init: float
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    loss_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_stages(self) -> int:
        return len(self.roots)

    def tree_depth(self, stage: int) -> int:
        def depth(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(depth(self.left[node]), depth(self.right[node]))

        return depth(int(self.roots[stage]))

    def predict(self, X, learning_rate: float, n_stages: int | None = None) -> np.ndarray:
        n_stages = self.n_stages if n_stages is None else n_stages
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _predict_learner(
            X, self.feature, self.threshold, self.left, self.right, self.value,
            self.roots, self.init, learning_rate, n_stages,
        )


@dataclass
class QuantileGbr:
    """All learners for one quantile level, one per horizon step."""

    q: float
    config: GbrConfig
    learners: list[TreeLearner]

    def predict(self, X, n_stages: int | None = None) -> np.ndarray:
        """(N, T) predictions in target units."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if not self.learners:
            raise UntrainedModel("quantile model has no learners")
        cols = [lrn.predict(X, self.config.learning_rate, n_stages) for lrn in self.learners]
        return np.stack(cols, axis=1)


def _design(samples) -> np.ndarray:
    X = np.asarray(samples.inputs, dtype=np.float64)
    past = getattr(samples, "past_pv", None)
    if past is not None:
        X = np.concatenate([X, np.asarray(past, dtype=np.float64)], axis=1)
    return np.ascontiguousarray(X)


def fit_quantile_gbr(samples, q: float, cfg: GbrConfig = GbrConfig(), X=None, order=None) -> QuantileGbr:
    """Fit one boosted learner per horizon step for quantile level ``q``.

    ``samples`` needs ``inputs``, ``targets`` and optionally ``past_pv``
    (appended to the features).
    """
    if not 0.0 < q < 1.0:
        raise InvalidQuantile(f"quantile level must lie in (0, 1), got {q}")
    Y = np.asarray(samples.targets, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise EmptySampleSet("cannot fit GBR on an empty sample set")
    if X is None:
        X = _design(samples)
    if order is None:
        order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    learners = []
    for t in range(Y.shape[1]):
        y = np.ascontiguousarray(Y[:, t])
        init = empirical_quantile(y, q)
        f, th, lf, rt, v, roots, trace = _fit_learner(
            X, order, y, float(q), cfg.learning_rate, cfg.n_estimators,
            cfg.max_depth, cfg.min_samples_leaf, init,
        )
        learners.append(TreeLearner(init, f, th, lf, rt, v, roots, trace))
    return QuantileGbr(float(q), cfg, learners)


@dataclass
class GbrModel:
    levels: QuantileLevels
    config: GbrConfig
    per_quantile: list[QuantileGbr]

    @property
    def n_steps(self) -> int:
        return len(self.per_quantile[0].learners) if self.per_quantile else 0


def fit_gbr(samples, levels: QuantileLevels, cfg: GbrConfig = GbrConfig()) -> GbrModel:
    X = _design(samples)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    models = [fit_quantile_gbr(samples, q, cfg, X=X, order=order) for q in levels]
    return GbrModel(levels, cfg, models)


def gbr_predict_array(model: GbrModel, samples_or_X, capacity: float = 1.0) -> np.ndarray:
    """(N, T, Q) forecasts, scaled by ``capacity``, clipped at zero/capacity and sorted per row."""
    if model is None or not model.per_quantile:
        raise UntrainedModel("GBR model is not trained")
    X = samples_or_X if isinstance(samples_or_X, np.ndarray) else _design(samples_or_X)
    X = np.atleast_2d(X)
    z = np.stack([m.predict(X) for m in model.per_quantile], axis=2) * capacity
    return np.sort(np.clip(z, 0.0, capacity), axis=-1)


def gbr_predict(model: GbrModel, x, steps, capacity: float = 1.0) -> QuantileMatrix:
    """Forecast for one input row as a monotone :class:`QuantileMatrix`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeMismatch("gbr_predict takes a single flat input row")
    z = gbr_predict_array(model, x[None], capacity)[0]
    return enforce_monotonicity(QuantileMatrix(tuple(steps), z, model.levels, capacity=capacity))
