"""Small feedforward network mapping controller gains to rollout summaries.

Provides the learned feature transform for the GP kernels: a tanh MLP
trained with plain momentum SGD on mean squared error, deterministic for a
given seed. Inputs are unit-cube points; outputs are de-standardized back
to physical summary units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MLPSpec:
    input_dim: int
    output_dim: int
    hidden: tuple = (128, 128)
    activation: str = "tanh"

    def __post_init__(self):
        if len(self.hidden) < 1:
            raise ValueError("need at least one hidden layer")
        if self.activation != "tanh":
            raise ValueError("only the hyperbolic tangent activation is supported")
        if self.output_dim < 1 or self.input_dim < 1:
            raise ValueError("dimensions must be positive")

    @property
    def layer_sizes(self) -> list:
        return [self.input_dim, *self.hidden, self.output_dim]


@dataclass
class MLPWeights:
    spec: MLPSpec
    layers: list               # [(W, b), ...] with W shaped (out, in)
    out_mean: np.ndarray       # output standardization statistics
    out_std: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = self.spec.layer_sizes
        for i, (W, b) in enumerate(self.layers):
            if W.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i} shape inconsistent with spec")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite weights")


def _forward_std(layers, X):
    """Forward pass in standardized output space; returns activations too."""
    acts = [X]
    a = X
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        z = a @ W.T + b
        a = z if i == last else np.tanh(z)
        acts.append(a)
    return a, acts


def nn_forward(weights: MLPWeights, x) -> np.ndarray:
    """De-standardized summary prediction for one unit-cube point."""
    x = np.asarray(x, float).reshape(-1)
    if x.shape != (weights.spec.input_dim,):
        raise ValueError("input dimension mismatch")
    out, _ = _forward_std(weights.layers, x[None])
    return out[0] * weights.out_std + weights.out_mean


def nn_loss(weights: MLPWeights, X, Y_std) -> float:
    """Half mean squared error in standardized output space."""
    X = np.atleast_2d(X)
    Y_std = np.atleast_2d(Y_std)
    if X.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    pred, _ = _forward_std(weights.layers, X)
    return float(0.5 * np.sum((pred - Y_std) ** 2) / X.shape[0])


def nn_grad(weights: MLPWeights, X, Y_std) -> list:
    """Exact loss gradient, same layer structure as the weights."""
    X = np.atleast_2d(X)
    Y_std = np.atleast_2d(Y_std)
    if X.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    layers = weights.layers
    pred, acts = _forward_std(layers, X)
    n = X.shape[0]
    delta = (pred - Y_std) / n
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        a_in = acts[i]
        grads[i] = (delta.T @ a_in, delta.sum(0))
        if i > 0:
            delta = (delta @ layers[i][0]) * (1.0 - acts[i] ** 2)
    return grads


def _init_layers(spec: MLPSpec, rng) -> list:
    sizes = spec.layer_sizes
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(1.0 / fan_in)
        layers.append((rng.uniform(-scale, scale, (fan_out, fan_in)),
                       np.zeros(fan_out)))
    return layers


def split_indices(n: int):
    """90/10 train/validation split by Sobol index (every 10th point held out)."""
    idx = np.arange(n)
    val = idx[idx % 10 == 9]
    train = idx[idx % 10 != 9]
    return train, val


def train(points: np.ndarray, summaries: np.ndarray,
          hidden: tuple = (128, 128), epochs: int = 200, batch_size: int = 64,
          step_size: float = 1.0e-2, momentum: float = 0.9, seed: int = 0,
          fingerprint: str = "") -> MLPWeights:
    """Momentum-SGD training; returns the best-validation-loss weights.

    Receives only controller points and their summaries, so the learned
    transform is agnostic to any cost definition. On divergence the step
    size is halved and training restarts, at most 3 times.
    """
    points = np.atleast_2d(np.asarray(points, float))
    summaries = np.atleast_2d(np.asarray(summaries, float))
    n, d = points.shape
    out_dim = summaries.shape[1]
    if n < 10 * out_dim:
        raise ValueError("need at least 10 rows per output dimension")
    spec = MLPSpec(input_dim=d, output_dim=out_dim, hidden=tuple(hidden))

    tr_idx, va_idx = split_indices(n)
    out_mean = summaries[tr_idx].mean(0)
    out_std = summaries[tr_idx].std(0)
    out_std = np.where(out_std < 1.0e-12, 1.0, out_std)
    Y = (summaries - out_mean) / out_std
    Xt, Yt = points[tr_idx], Y[tr_idx]
    Xv, Yv = points[va_idx], Y[va_idx]

    step = step_size
    for attempt in range(4):
        rng = np.random.default_rng(seed)
        layers = _init_layers(spec, rng)
        vel = [(np.zeros_like(W), np.zeros_like(b)) for W, b in layers]
        w = MLPWeights(spec, layers, out_mean, out_std)
        best_val = nn_loss(w, Xv, Yv) if len(va_idx) else np.inf
        best_layers = [(W.copy(), b.copy()) for W, b in layers]
        final_loss = np.nan
        diverged = False
        for epoch in range(epochs):
            order = rng.permutation(len(tr_idx))
            for start in range(0, len(order), batch_size):
                sel = order[start:start + batch_size]
                g = nn_grad(w, Xt[sel], Yt[sel])
                for i in range(len(layers)):
                    vW = momentum * vel[i][0] - step * g[i][0]
                    vb = momentum * vel[i][1] - step * g[i][1]
                    vel[i] = (vW, vb)
                    layers[i] = (layers[i][0] + vW, layers[i][1] + vb)
            final_loss = nn_loss(w, Xt, Yt)
            if not np.isfinite(final_loss):
                diverged = True
                break
            if len(va_idx):
                val = nn_loss(w, Xv, Yv)
                if val < best_val:
                    best_val = val
                    best_layers = [(W.copy(), b.copy()) for W, b in layers]
        if not diverged:
            break
        step *= 0.5
    else:
        raise RuntimeError("training diverged even after 3 step-size halvings")

    if not len(va_idx):
        best_layers = layers
        best_val = final_loss
    meta = {"epochs": epochs, "batch_size": batch_size, "step_size": step,
            "momentum": momentum, "seed": seed, "rows": n,
            "final_train_loss": float(final_loss),
            "best_val_loss": float(best_val),
            "dataset_fingerprint": fingerprint}
    return MLPWeights(spec, best_layers, out_mean, out_std, meta)


def save_weights(w: MLPWeights, path) -> None:
    payload = {
        "input_dim": w.spec.input_dim, "output_dim": w.spec.output_dim,
        "hidden": list(w.spec.hidden),
        "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in w.layers],
        "out_mean": w.out_mean.tolist(), "out_std": w.out_std.tolist(),
        "meta": w.meta,
    }
    with open(path, "w") as f:
        json.dump(payload, f)


def load_weights(path) -> MLPWeights:
    with open(path) as f:
        p = json.load(f)
    spec = MLPSpec(p["input_dim"], p["output_dim"], tuple(p["hidden"]))
    layers = [(np.array(l["W"]), np.array(l["b"])) for l in p["layers"]]
    return MLPWeights(spec, layers, np.array(p["out_mean"]),
                      np.array(p["out_std"]), p.get("meta", {}))


def nn_transform(weights: MLPWeights):
    """Transform handle phi(x) for the GP kernels."""
    return lambda x: nn_forward(weights, x)
