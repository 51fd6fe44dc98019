"""Feed-forward networks for the deep rows of the model grid.

Four fixed architectures are registered; the fourth is the in-house layout
(three 64-unit hidden layers, leaky rectifier, stochastic gradient descent
with plain momentum, dropout 0.2 after each hidden layer, exponentially
decayed learning rate, and early stopping after 10 stagnant epochs). The
implementation is plain numpy with hand-written backpropagation so the
gradients can be checked against finite differences, and an untrained
frozen copy of any architecture doubles as the deep baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NotFittedError, SchemaError


@dataclass(frozen=True)
class NNArchitecture:
    id: int
    hidden_units: tuple[int, ...]
    activation: str  # "sigmoid" | "relu" | "leaky-relu"
    leaky_slope: float
    optimizer: str  # "adaptive-moment" | "rms-propagation" | "sgd-with-momentum"
    dropout_rate: float
    lr_schedule: str  # "fixed" | "exponential-decay"
    early_stop_patience: int

    @property
    def hidden_layers(self) -> int:
        return len(self.hidden_units)


ARCHITECTURES: dict[int, NNArchitecture] = {
    1: NNArchitecture(1, (8, 8), "sigmoid", 0.0, "adaptive-moment",
                      0.0, "fixed", 10),
    2: NNArchitecture(2, (512, 512, 512), "relu", 0.0, "rms-propagation",
                      0.0, "fixed", 10),
    3: NNArchitecture(3, (128, 64), "relu", 0.0, "adaptive-moment",
                      0.0, "fixed", 10),
    4: NNArchitecture(4, (64, 64, 64), "leaky-relu", 0.01, "sgd-with-momentum",
                      0.2, "exponential-decay", 10),
}


def get_architecture(arch_id: int) -> NNArchitecture:
    try:
        return ARCHITECTURES[arch_id]
    except KeyError:
        raise ConfigError(f"unknown architecture id {arch_id}; valid: 1-4") \
            from None


class _Adam:
    def __init__(self, shapes):
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            p -= lr * m_hat / (np.sqrt(v_hat) + eps)


class _RmsProp:
    def __init__(self, shapes):
        self.sq = [np.zeros(s) for s in shapes]

    def step(self, params, grads, lr):
        rho, eps = 0.9, 1e-8
        for i, (p, g) in enumerate(zip(params, grads)):
            self.sq[i] = rho * self.sq[i] + (1 - rho) * g * g
            p -= lr * g / (np.sqrt(self.sq[i]) + eps)


class _Momentum:
    """Plain momentum (no lookahead step)."""

    def __init__(self, shapes, momentum=0.9):
        self.vel = [np.zeros(s) for s in shapes]
        self.momentum = momentum

    def step(self, params, grads, lr):
        for i, (p, g) in enumerate(zip(params, grads)):
            self.vel[i] = self.momentum * self.vel[i] - lr * g
            p += self.vel[i]


_OPTIMIZERS = {
    "adaptive-moment": _Adam,
    "rms-propagation": _RmsProp,
    "sgd-with-momentum": _Momentum,
}

_DEFAULT_LR = {
    "adaptive-moment": 1e-3,
    "rms-propagation": 1e-3,
    "sgd-with-momentum": 1e-2,
}


class FeedForwardNet:
    """Fully connected network with a linear (regression, squared error) or
    sigmoid (classification, binary cross-entropy) head.

    Regression targets are standardised internally during fit and predictions
    mapped back, so the squared-error updates stay well-scaled regardless of
    the target's magnitude.
    """

    def __init__(self, arch: NNArchitecture, task: str, seed: int = 42,
                 learning_rate: float | None = None, epochs: int = 100,
                 batch_size: int = 32, decay_rate: float = 0.96,
                 val_fraction: float = 0.1) -> None:
        if task not in ("regression", "classification"):
            raise ConfigError(f"unknown task {task!r}")
        self.arch = arch
        self.task = task
        self.seed = seed
        self.learning_rate = learning_rate or _DEFAULT_LR[arch.optimizer]
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.decay_rate = float(decay_rate)
        self.val_fraction = float(val_fraction)

    # -- parameters ------------------------------------------------------

    def init_params(self, n_features: int,
                    rng: np.random.Generator) -> list[np.ndarray]:
        """Interleaved [W0, b0, W1, b1, ...] with activation-matched scales."""
        sizes = [n_features, *self.arch.hidden_units, 1]
        params: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if self.arch.activation == "sigmoid":
                scale = np.sqrt(2.0 / (fan_in + fan_out))
            else:
                scale = np.sqrt(2.0 / fan_in)
            params.append(rng.normal(0.0, scale, (fan_in, fan_out)))
            params.append(np.zeros(fan_out))
        return params

    def _activate(self, z: np.ndarray) -> np.ndarray:
        if self.arch.activation == "sigmoid":
            return 1.0 / (1.0 + np.exp(-z))
        if self.arch.activation == "relu":
            return np.maximum(z, 0.0)
        return np.where(z > 0.0, z, self.arch.leaky_slope * z)

    def _activate_grad(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        if self.arch.activation == "sigmoid":
            return a * (1.0 - a)
        if self.arch.activation == "relu":
            return (z > 0.0).astype(z.dtype)
        return np.where(z > 0.0, 1.0, self.arch.leaky_slope)

    def make_dropout_masks(self, n_rows: int,
                           rng: np.random.Generator) -> list[np.ndarray] | None:
        """One inverted-dropout mask per hidden layer (None when rate is 0)."""
        rate = self.arch.dropout_rate
        if rate <= 0.0:
            return None
        return [
            (rng.random((n_rows, units)) >= rate) / (1.0 - rate)
            for units in self.arch.hidden_units
        ]

    # -- forward / backward ----------------------------------------------

    def forward(self, X: np.ndarray, params: list[np.ndarray],
                masks: list[np.ndarray] | None = None) -> np.ndarray:
        h = X
        n_hidden = len(self.arch.hidden_units)
        for layer in range(n_hidden):
            z = h @ params[2 * layer] + params[2 * layer + 1]
            h = self._activate(z)
            if masks is not None:
                h = h * masks[layer]
        out = (h @ params[-2] + params[-1]).ravel()
        if self.task == "classification":
            return 1.0 / (1.0 + np.exp(-out))
        return out

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray,
                       params: list[np.ndarray],
                       masks: list[np.ndarray] | None = None
                       ) -> tuple[float, list[np.ndarray]]:
        """Loss plus analytic gradients for every weight and bias.

        ``masks`` pins the dropout pattern so the loss is a deterministic
        function of the parameters (required for finite-difference checks).
        """
        n = X.shape[0]
        n_hidden = len(self.arch.hidden_units)
        h = X
        pre: list[np.ndarray] = []
        post: list[np.ndarray] = [X]
        for layer in range(n_hidden):
            z = h @ params[2 * layer] + params[2 * layer + 1]
            a = self._activate(z)
            if masks is not None:
                a = a * masks[layer]
            pre.append(z)
            post.append(a)
            h = a
        raw = (h @ params[-2] + params[-1]).ravel()

        if self.task == "classification":
            p = np.clip(1.0 / (1.0 + np.exp(-raw)), 1e-12, 1.0 - 1e-12)
            loss = float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
            delta = ((p - y) / n)[:, None]
        else:
            resid = raw - y
            loss = float(np.mean(resid * resid))
            delta = (2.0 * resid / n)[:, None]

        grads: list[np.ndarray] = [np.empty(0)] * len(params)
        grads[-2] = post[-1].T @ delta
        grads[-1] = delta.sum(axis=0)
        back = delta @ params[-2].T
        for layer in range(n_hidden - 1, -1, -1):
            if masks is not None:
                back = back * masks[layer]
            back = back * self._activate_grad(pre[layer],
                                              self._activate(pre[layer]))
            grads[2 * layer] = post[layer].T @ back
            grads[2 * layer + 1] = back.sum(axis=0)
            if layer > 0:
                back = back @ params[2 * layer].T
        return loss, grads

    # -- training --------------------------------------------------------

    def fit(self, X: np.ndarray, y: np.ndarray) -> "FeedForwardNet":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
            raise SchemaError("X must be 2-D with at least 2 aligned rows")
        if self.task == "regression":
            self._y_mean = float(y.mean())
            self._y_scale = float(y.std()) or 1.0
            y = (y - self._y_mean) / self._y_scale
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, 0x4E)))
        params = self.init_params(X.shape[1], rng)

        n = X.shape[0]
        n_val = max(1, int(round(self.val_fraction * n))) if n >= 10 else 0
        perm = rng.permutation(n)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
        X_tr, y_tr = X[train_idx], y[train_idx]
        X_val, y_val = X[val_idx], y[val_idx]

        optimizer = _OPTIMIZERS[self.arch.optimizer]([p.shape for p in params])
        best_val = np.inf
        best_params = [p.copy() for p in params]
        stagnant = 0
        for epoch in range(self.epochs):
            lr = self.learning_rate
            if self.arch.lr_schedule == "exponential-decay":
                lr = lr * self.decay_rate**epoch
            order = rng.permutation(X_tr.shape[0])
            for start in range(0, order.size, self.batch_size):
                batch = order[start:start + self.batch_size]
                masks = self.make_dropout_masks(batch.size, rng)
                _, grads = self.loss_and_grads(X_tr[batch], y_tr[batch],
                                               params, masks)
                optimizer.step(params, grads, lr)
            monitor_X, monitor_y = (X_val, y_val) if n_val else (X_tr, y_tr)
            val_loss, _ = self.loss_and_grads(monitor_X, monitor_y, params)
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                best_params = [p.copy() for p in params]
                stagnant = 0
            else:
                stagnant += 1
                if stagnant >= self.arch.early_stop_patience:
                    break
        self.params_ = best_params
        return self

    def _check_ready(self, X: np.ndarray) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise NotFittedError("network used before fit")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.params_[0].shape[0]:
            raise SchemaError(
                f"expected {self.params_[0].shape[0]} features, "
                f"got shape {X.shape}"
            )
        return X

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = self._check_ready(X)
        out = self.forward(X, self.params_)
        if self.task == "classification":
            return (out >= 0.5).astype(np.float64)
        if hasattr(self, "_y_mean"):
            return self._y_mean + self._y_scale * out
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.task != "classification":
            raise SchemaError("probabilities only exist for classification")
        X = self._check_ready(X)
        p = self.forward(X, self.params_)
        return np.column_stack([1.0 - p, p])


def frozen_network(arch: NNArchitecture, task: str, n_features: int,
                   seed: int = 42) -> FeedForwardNet:
    """The deep baseline: the same architecture with freshly initialised,
    never-trained weights frozen for prediction."""
    net = FeedForwardNet(arch, task, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xF0)))
    net.params_ = net.init_params(n_features, rng)
    return net
