"""Regularised gradient-boosted decision trees.

Second-order boosting on histogram-binned features: trees grow level-wise
with one vectorised gradient/hessian histogram pass per level, leaf
weights are shrunk by an L1 soft-threshold and an L2 denominator term, and
rows can be subsampled per tree. Supports squared-error regression and
binary logistic classification.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import NotFittedError, SchemaError


def _soft_threshold(g: np.ndarray, alpha: float) -> np.ndarray:
    return np.sign(g) * np.maximum(np.abs(g) - alpha, 0.0)


class _Tree:
    """Flat-array binary tree; feature < 0 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, n_nodes: int) -> None:
        self.feature = np.full(n_nodes, -1, dtype=np.int32)
        self.threshold = np.zeros(n_nodes)
        self.left = np.zeros(n_nodes, dtype=np.int32)
        self.right = np.zeros(n_nodes, dtype=np.int32)
        self.value = np.zeros(n_nodes)

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(X.shape[0], dtype=np.int32)
        active = self.feature[idx] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            nodes = idx[rows]
            goes_left = X[rows, self.feature[nodes]] < self.threshold[nodes]
            idx[rows] = np.where(goes_left, self.left[nodes],
                                 self.right[nodes])
            active = self.feature[idx] >= 0
        return self.value[idx]


class BoostedTrees(BaseEstimator):
    """Boosted regression/classification trees with L1/L2 leaf regularisation.

    Parameters mirror the common booster vocabulary: ``n_estimators`` trees
    of depth at most ``max_depth`` are added with step size
    ``learning_rate``; ``subsample`` rows feed each tree; ``reg_alpha`` and
    ``reg_lambda`` are the L1/L2 penalties on leaf weights.
    """

    def __init__(self, objective: str = "squared_error", n_estimators: int = 100,
                 learning_rate: float = 0.3, max_depth: int = 6,
                 subsample: float = 1.0, reg_alpha: float = 0.0,
                 reg_lambda: float = 1.0, booster: str = "gbtree",
                 n_bins: int = 64, min_child_weight: float = 1e-3,
                 random_state: int = 42) -> None:
        if objective not in ("squared_error", "binary_logistic"):
            raise SchemaError(f"unknown objective {objective!r}")
        if booster != "gbtree":
            raise SchemaError(f"unsupported base learner {booster!r}")
        if not 0.0 < subsample <= 1.0:
            raise SchemaError("subsample must be in (0, 1]")
        self.objective = objective
        self.n_estimators = int(n_estimators)
        self.learning_rate = float(learning_rate)
        self.max_depth = int(max_depth)
        self.subsample = float(subsample)
        self.reg_alpha = float(reg_alpha)
        self.reg_lambda = float(reg_lambda)
        self.booster = booster
        self.n_bins = int(n_bins)
        self.min_child_weight = float(min_child_weight)
        self.random_state = int(random_state)

    # -- fitting ---------------------------------------------------------

    def fit(self, X: np.ndarray, y: np.ndarray) -> "BoostedTrees":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
            raise SchemaError("X must be 2-D and aligned with y")
        rng = np.random.default_rng(
            np.random.SeedSequence((self.random_state, 0xB0057)))
        n, m = X.shape

        self._edges = [
            np.unique(np.quantile(X[:, j],
                                  np.linspace(0, 1, self.n_bins + 1)[1:-1]))
            for j in range(m)
        ]
        self._edge_counts = np.array([e.size for e in self._edges])
        codes = self._bin(X)

        if self.objective == "binary_logistic":
            p0 = min(max(y.mean(), 1e-6), 1.0 - 1e-6)
            self._base = float(np.log(p0 / (1.0 - p0)))
        else:
            self._base = float(y.mean())
        raw = np.full(n, self._base)

        self._trees: list[_Tree] = []
        for _ in range(self.n_estimators):
            grad, hess = self._grad_hess(raw, y)
            if self.subsample < 1.0:
                rows = np.flatnonzero(rng.random(n) < self.subsample)
                if rows.size == 0:
                    rows = rng.integers(n, size=1)
            else:
                rows = np.arange(n)
            tree = self._grow(codes[rows], grad[rows], hess[rows])
            self._trees.append(tree)
            raw = raw + self.learning_rate * tree.predict(X)
        self._n_features = m
        return self

    def _grad_hess(self, raw: np.ndarray, y: np.ndarray):
        if self.objective == "binary_logistic":
            p = 1.0 / (1.0 + np.exp(-raw))
            return p - y, np.maximum(p * (1.0 - p), 1e-12)
        return raw - y, np.ones_like(y)

    def _bin(self, X: np.ndarray) -> np.ndarray:
        codes = np.empty(X.shape, dtype=np.int64)
        for j, edges in enumerate(self._edges):
            codes[:, j] = np.searchsorted(edges, X[:, j], side="right")
        return codes

    def _leaf_values(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        return -_soft_threshold(g, self.reg_alpha) / (h + self.reg_lambda)

    def _scores(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        shrunk = _soft_threshold(g, self.reg_alpha)
        return shrunk * shrunk / (h + self.reg_lambda)

    def _grow(self, codes: np.ndarray, grad: np.ndarray,
              hess: np.ndarray) -> _Tree:
        """Level-wise growth: one histogram pass per depth level covers
        every open node at that level."""
        n, m = codes.shape
        n_bins = int(self._edge_counts.max(initial=0)) + 1
        if n_bins < 2:  # every feature is constant; only a root leaf exists
            tree = _Tree(1)
            tree.value[0] = float(self._leaf_values(
                np.float64(grad.sum()), float(hess.sum())))
            return tree
        # Split candidates exist only below each feature's real edge count.
        bin_ok = np.arange(n_bins - 1)[None, :] < \
            self._edge_counts[:, None]  # (m, n_bins-1)

        nodes: list[dict] = [{}]  # parallel to _Tree arrays, grown per level
        node_of_row = np.zeros(n, dtype=np.int64)
        open_nodes = [0]
        node_stats = {0: (float(grad.sum()), float(hess.sum()))}
        children: dict[int, tuple[int, int]] = {}
        splits: dict[int, tuple[int, float]] = {}
        leaf_value: dict[int, float] = {}

        for depth in range(self.max_depth + 1):
            if not open_nodes:
                break
            k = len(open_nodes)
            active = np.isin(node_of_row, open_nodes)
            rows = np.flatnonzero(active)
            if depth >= self.max_depth or rows.size == 0:
                for node in open_nodes:
                    g_sum, h_sum = node_stats[node]
                    leaf_value[node] = float(
                        self._leaf_values(np.float64(g_sum), h_sum))
                break

            slots = np.searchsorted(np.array(open_nodes),
                                    node_of_row[rows])
            flat = (slots[:, None] * m + np.arange(m)[None, :]) * n_bins \
                + codes[rows]
            size = k * m * n_bins
            g_hist = np.bincount(flat.ravel(),
                                 weights=np.repeat(grad[rows], m),
                                 minlength=size).reshape(k, m, n_bins)
            h_hist = np.bincount(flat.ravel(),
                                 weights=np.repeat(hess[rows], m),
                                 minlength=size).reshape(k, m, n_bins)

            g_left = np.cumsum(g_hist, axis=2)[:, :, :-1]
            h_left = np.cumsum(h_hist, axis=2)[:, :, :-1]
            g_tot = np.array([node_stats[nd][0] for nd in open_nodes])
            h_tot = np.array([node_stats[nd][1] for nd in open_nodes])
            g_right = g_tot[:, None, None] - g_left
            h_right = h_tot[:, None, None] - h_left

            gains = self._scores(g_left, h_left) \
                + self._scores(g_right, h_right) \
                - self._scores(g_tot, h_tot)[:, None, None]
            invalid = (h_left < self.min_child_weight) | \
                (h_right < self.min_child_weight) | ~bin_ok[None, :, :]
            gains[invalid] = -np.inf

            flat_gains = gains.reshape(k, -1)
            best_flat = np.argmax(flat_gains, axis=1)
            best_gain = flat_gains[np.arange(k), best_flat]

            next_open: list[int] = []
            will_split = {}
            for i, node in enumerate(open_nodes):
                if best_gain[i] <= 1e-12:
                    g_sum, h_sum = node_stats[node]
                    leaf_value[node] = float(
                        self._leaf_values(np.float64(g_sum), h_sum))
                    continue
                feat, b = divmod(int(best_flat[i]), n_bins - 1)
                left_id = len(nodes)
                nodes.append({})
                right_id = len(nodes)
                nodes.append({})
                children[node] = (left_id, right_id)
                splits[node] = (feat, float(self._edges[feat][b]))
                will_split[node] = (i, feat, b, left_id, right_id)
                node_stats[left_id] = (float(g_left[i, feat, b]),
                                       float(h_left[i, feat, b]))
                node_stats[right_id] = (float(g_right[i, feat, b]),
                                        float(h_right[i, feat, b]))
                next_open += [left_id, right_id]

            if will_split:
                parents = node_of_row[rows]
                new_assign = parents.copy()
                for node, (i, feat, b, left_id, right_id) in \
                        will_split.items():
                    mask = parents == node
                    goes_left = codes[rows[mask], feat] <= b
                    new_assign[mask] = np.where(goes_left, left_id, right_id)
                node_of_row[rows] = new_assign
            open_nodes = next_open

        tree = _Tree(len(nodes))
        for node, (feat, thr) in splits.items():
            tree.feature[node] = feat
            tree.threshold[node] = thr
            tree.left[node], tree.right[node] = children[node]
        for node, value in leaf_value.items():
            tree.value[node] = value
        return tree

    # -- prediction ------------------------------------------------------

    def _raw(self, X: np.ndarray) -> np.ndarray:
        if not hasattr(self, "_trees"):
            raise NotFittedError("BoostedTrees used before fit")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self._n_features:
            raise SchemaError(
                f"expected {self._n_features} features, got shape {X.shape}"
            )
        raw = np.full(X.shape[0], self._base)
        for tree in self._trees:
            raw = raw + self.learning_rate * tree.predict(X)
        return raw

    def predict(self, X: np.ndarray) -> np.ndarray:
        raw = self._raw(X)
        if self.objective == "binary_logistic":
            return (raw >= 0.0).astype(np.float64)
        return raw

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.objective != "binary_logistic":
            raise SchemaError("probabilities only exist for classification")
        p = 1.0 / (1.0 + np.exp(-self._raw(X)))
        return np.column_stack([1.0 - p, p])
