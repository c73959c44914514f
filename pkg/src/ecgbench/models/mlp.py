"""Small dense network (ReLU hidden layers, sigmoid output) trained with Adam on BCE."""

from __future__ import annotations

import numpy as np

from .base import MlpConfig, Standardizer, TrainedModel, check_training_data, sigmoid

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-7


def init_params(sizes, rng: np.random.Generator) -> list[np.ndarray]:
    """Glorot-uniform weights and zero biases: ``[W1, b1, W2, b2, ...]``."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params, X) -> np.ndarray:
    """Output logits, shape (n,)."""
    h = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        h = h @ params[2 * k] + params[2 * k + 1]
        if k < n_layers - 1:
            h = np.maximum(h, 0.0)
    return h[:, 0]


def bce_with_logits(z, y) -> float:
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def loss_and_grad(params, X, y):
    """Mean binary cross-entropy and its gradient with respect to every parameter."""
    n_layers = len(params) // 2
    acts = [X]
    pre = []
    h = X
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        pre.append(z)
        h = np.maximum(z, 0.0) if k < n_layers - 1 else z
        acts.append(h)
    logits = h[:, 0]
    loss = bce_with_logits(logits, y)

    grads = [None] * len(params)
    delta = ((sigmoid(logits) - y) / len(y))[:, None]
    for k in range(n_layers - 1, -1, -1):
        grads[2 * k] = acts[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k:
            delta = (delta @ params[2 * k].T) * (pre[k - 1] > 0)
    return loss, grads


class Adam:
    def __init__(self, params, lr):
        self.lr = lr
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        b1, b2 = ADAM_BETAS
        self.t += 1
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


class MlpModel(TrainedModel):
    kind = "mlp"

    def __init__(self, schema, config: MlpConfig, params, scaler: Standardizer,
                 diagnostics=None):
        super().__init__(schema, config, diagnostics)
        self.params = [np.asarray(p, dtype=np.float64) for p in params]
        self.scaler = scaler

    @classmethod
    def train(cls, config: MlpConfig, X, y, schema, epochs: int = None) -> "MlpModel":
        X, y = check_training_data(X, y)
        y = y.astype(np.float64)
        epochs = epochs or config.resolved_epochs()
        rng = np.random.default_rng(config.seed)
        scaler = Standardizer.fit(X)
        Z = scaler.transform(X)

        # held-out slice for the validation loss curve only
        order = rng.permutation(len(Z))
        n_val = int(round(config.validation_fraction * len(Z)))
        val, fit = order[:n_val], order[n_val:]
        params = init_params((Z.shape[1],) + tuple(config.hidden) + (1,), rng)
        opt = Adam(params, config.learning_rate)
        history, val_history = [], []
        for _ in range(epochs):
            perm = fit[rng.permutation(len(fit))]
            total = 0.0
            for a in range(0, len(perm), config.batch_size):
                b = perm[a:a + config.batch_size]
                loss, grads = loss_and_grad(params, Z[b], y[b])
                opt.step(params, grads)
                total += loss * len(b)
            history.append(total / max(len(perm), 1))
            if n_val:
                val_history.append(bce_with_logits(forward(params, Z[val]), y[val]))
        diag = {"epochs": epochs, "loss": history, "val_loss": val_history}
        return cls(schema, config, params, scaler, diag)

    def _score(self, X):
        return sigmoid(forward(self.params, self.scaler.transform(X)))

    def arrays(self) -> dict:
        out = {"mean": self.scaler.mean, "scale": self.scaler.scale}
        for i, p in enumerate(self.params):
            out[f"p{i}"] = p
        return out

    @classmethod
    def from_arrays(cls, schema, config, arrays, diagnostics=None):
        n = sum(1 for k in arrays if k.startswith("p"))
        params = [arrays[f"p{i}"] for i in range(n)]
        return cls(schema, config, params, Standardizer(arrays["mean"], arrays["scale"]),
                   diagnostics)
