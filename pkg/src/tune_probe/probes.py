"""Softmax probes over pooled, PCA-reduced vectors.

Linear probe:     p = softmax(W y + b)
Nonlinear probe:  p = softmax(W2 r(W1 y + b1) + b2), where r is layer
normalization (biased variance, eps 1e-5, learned gain/bias) followed by
leaky ReLU with slope 0.01.

Training minimizes mean cross-entropy with Adam. Gradients are exact
analytic backpropagation; there is no autodiff here, and the
finite-difference tests hold every parameter group to it.

Reproducibility: parameter init draws from (seed, 0) and the shuffle of
epoch e from (seed, 1, e), so a run is a pure function of (data, config).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .latent_store import read_matrix, write_matrix

LEAK = 0.01
LN_EPS = 1e-5
PROBE_KINDS = ("linear", "nonlinear")
_P_FLOOR = 1e-12


@dataclass
class LinearProbe:
    W: np.ndarray  # (d_c, d_in)
    b: np.ndarray  # (d_c,)

    kind = "linear"

    @property
    def d_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}


@dataclass
class NonlinearProbe:
    W1: np.ndarray  # (d_h, d_in)
    b1: np.ndarray  # (d_h,)
    ln_gain: np.ndarray  # (d_h,)
    ln_bias: np.ndarray  # (d_h,)
    W2: np.ndarray  # (d_c, d_h)
    b2: np.ndarray  # (d_c,)

    kind = "nonlinear"

    @property
    def d_in(self) -> int:
        return self.W1.shape[1]

    @property
    def d_hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {
            "W1": self.W1, "b1": self.b1,
            "ln_gain": self.ln_gain, "ln_bias": self.ln_bias,
            "W2": self.W2, "b2": self.b2,
        }


Probe = LinearProbe | NonlinearProbe


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 64
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


def softmax(z: np.ndarray) -> np.ndarray:
    """Probabilities proportional to exp(z), stable under large logits."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward_linear(probe: LinearProbe, y: np.ndarray) -> np.ndarray:
    y = _check_input(y, probe.d_in)
    return softmax(y @ probe.W.T + probe.b)


def forward_nonlinear(probe: NonlinearProbe, y: np.ndarray) -> np.ndarray:
    probs, _ = _forward_nonlinear_cached(probe, _check_input(y, probe.d_in))
    return probs


def forward(probe: Probe, y: np.ndarray) -> np.ndarray:
    if isinstance(probe, LinearProbe):
        return forward_linear(probe, y)
    return forward_nonlinear(probe, y)


def predict(probe: Probe, y: np.ndarray) -> np.ndarray:
    return np.argmax(forward(probe, y), axis=-1)


def _check_input(y: np.ndarray, d_in: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != d_in:
        raise ValueError(f"input dim {y.shape[-1]} does not match probe dim {d_in}")
    return np.atleast_2d(y)


def _forward_nonlinear_cached(probe: NonlinearProbe, Y: np.ndarray):
    Z = Y @ probe.W1.T + probe.b1
    mu = Z.mean(axis=-1, keepdims=True)
    var = Z.var(axis=-1, keepdims=True)  # biased, as in layer normalization
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    Xhat = (Z - mu) * inv_std
    H = probe.ln_gain * Xhat + probe.ln_bias
    A = np.where(H > 0, H, LEAK * H)
    probs = softmax(A @ probe.W2.T + probe.b2)
    return probs, (Y, Xhat, inv_std, H, A)


def cross_entropy(probabilities: np.ndarray, true_class) -> float:
    """Mean -log p[true] over the batch; p is floored at 1e-12."""
    p = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(true_class, dtype=np.intp))
    if labels.shape[0] != p.shape[0]:
        raise ValueError(f"{p.shape[0]} prediction rows but {labels.shape[0]} labels")
    if labels.min() < 0 or labels.max() >= p.shape[1]:
        raise ValueError(f"class index out of range for {p.shape[1]} classes")
    picked = p[np.arange(p.shape[0]), labels]
    return float(-np.log(np.maximum(picked, _P_FLOOR)).mean())


def gradients(probe: Probe, Y: np.ndarray, labels: np.ndarray):
    """(mean loss, dict of gradients) of mean cross-entropy over the batch."""
    Y = _check_input(Y, probe.d_in)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.intp))
    n = Y.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    onehot = np.zeros((n, probe.n_classes))
    onehot[np.arange(n), labels] = 1.0

    if isinstance(probe, LinearProbe):
        probs = forward_linear(probe, Y)
        loss = cross_entropy(probs, labels)
        G = (probs - onehot) / n
        return loss, {"W": G.T @ Y, "b": G.sum(axis=0)}

    probs, (Y, Xhat, inv_std, H, A) = _forward_nonlinear_cached(probe, Y)
    loss = cross_entropy(probs, labels)
    dlogits = (probs - onehot) / n
    dW2 = dlogits.T @ A
    db2 = dlogits.sum(axis=0)
    dA = dlogits @ probe.W2
    dH = dA * np.where(H > 0, 1.0, LEAK)
    dgain = (dH * Xhat).sum(axis=0)
    dbias = dH.sum(axis=0)
    dXhat = dH * probe.ln_gain
    # Layer-norm backward with biased variance.
    dZ = inv_std * (
        dXhat
        - dXhat.mean(axis=-1, keepdims=True)
        - Xhat * (dXhat * Xhat).mean(axis=-1, keepdims=True)
    )
    dW1 = dZ.T @ Y
    db1 = dZ.sum(axis=0)
    return loss, {
        "W1": dW1, "b1": db1,
        "ln_gain": dgain, "ln_bias": dbias,
        "W2": dW2, "b2": db2,
    }


def init_linear(d_in: int, n_classes: int, rng: np.random.Generator) -> LinearProbe:
    a = 1.0 / np.sqrt(d_in)
    return LinearProbe(
        W=rng.uniform(-a, a, size=(n_classes, d_in)),
        b=rng.uniform(-a, a, size=n_classes),
    )


def init_nonlinear(
    d_in: int, d_hidden: int, n_classes: int, rng: np.random.Generator
) -> NonlinearProbe:
    if d_hidden < 1:
        raise ValueError(f"hidden dim must be >= 1, got {d_hidden}")
    a1 = 1.0 / np.sqrt(d_in)
    a2 = 1.0 / np.sqrt(d_hidden)
    return NonlinearProbe(
        W1=rng.uniform(-a1, a1, size=(d_hidden, d_in)),
        b1=rng.uniform(-a1, a1, size=d_hidden),
        ln_gain=np.ones(d_hidden),
        ln_bias=np.zeros(d_hidden),
        W2=rng.uniform(-a2, a2, size=(n_classes, d_hidden)),
        b2=rng.uniform(-a2, a2, size=n_classes),
    )


def init_probe(
    kind: str, d_in: int, n_classes: int, seed: int, d_hidden: int | None = None
) -> Probe:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    if kind == "linear":
        return init_linear(d_in, n_classes, rng)
    if kind == "nonlinear":
        if d_hidden is None:
            raise ValueError("nonlinear probe needs d_hidden")
        return init_nonlinear(d_in, d_hidden, n_classes, rng)
    raise ValueError(f"unknown probe kind {kind!r}; known: {PROBE_KINDS}")


def train(
    kind: str,
    Y: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    cfg: TrainConfig,
    d_hidden: int | None = None,
) -> tuple[Probe, list[float]]:
    """Mini-batch Adam training. Returns the probe and per-epoch mean loss.

    The last partial batch is kept. With epochs=0 the probe is returned
    at its initialization.
    """
    Y = np.asarray(Y, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise ValueError(f"expected a nonempty (n, d) feature matrix, got {Y.shape}")
    if labels.shape != (Y.shape[0],):
        raise ValueError("labels must align with feature rows")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"labels out of range for {n_classes} classes")

    probe = init_probe(kind, Y.shape[1], n_classes, cfg.seed, d_hidden)
    params = probe.params()
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    step = 0
    n = Y.shape[0]
    losses: list[float] = []
    for epoch in range(cfg.epochs):
        shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, epoch]))
        perm = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            loss, grads = gradients(probe, Y[batch], labels[batch])
            epoch_loss += loss * batch.size
            step += 1
            bc1 = 1.0 - cfg.beta1**step
            bc2 = 1.0 - cfg.beta2**step
            for key, g in grads.items():
                m[key] = cfg.beta1 * m[key] + (1.0 - cfg.beta1) * g
                v[key] = cfg.beta2 * v[key] + (1.0 - cfg.beta2) * g * g
                params[key] -= cfg.learning_rate * (m[key] / bc1) / (
                    np.sqrt(v[key] / bc2) + cfg.adam_eps
                )
        mean_loss = epoch_loss / n
        if not np.isfinite(mean_loss):
            raise FloatingPointError(
                f"training diverged at epoch {epoch}: loss {mean_loss}"
            )
        losses.append(mean_loss)
    return probe, losses


def save_probe(probe: Probe, directory: str | os.PathLike, meta: dict | None = None) -> None:
    """Checkpoint: one matrix file per parameter plus a metadata sidecar."""
    os.makedirs(directory, exist_ok=True)
    for key, value in probe.params().items():
        write_matrix(np.atleast_2d(value), os.path.join(directory, f"{key}.ltnt"))
    info = {"kind": probe.kind, "n_classes": probe.n_classes, "d_in": probe.d_in}
    if isinstance(probe, NonlinearProbe):
        info["d_hidden"] = probe.d_hidden
    info.update(meta or {})
    with open(os.path.join(directory, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(info, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_probe(directory: str | os.PathLike) -> tuple[Probe, dict]:
    with open(os.path.join(directory, "meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)

    def mat(name: str) -> np.ndarray:
        arr, _ = read_matrix(os.path.join(directory, f"{name}.ltnt"))
        return arr.astype(np.float64)

    if meta["kind"] == "linear":
        probe: Probe = LinearProbe(W=mat("W"), b=mat("b")[0])
    elif meta["kind"] == "nonlinear":
        probe = NonlinearProbe(
            W1=mat("W1"), b1=mat("b1")[0],
            ln_gain=mat("ln_gain")[0], ln_bias=mat("ln_bias")[0],
            W2=mat("W2"), b2=mat("b2")[0],
        )
    else:
        raise ValueError(f"unknown probe kind {meta['kind']!r} in {directory}")
    return probe, meta
