"""Minimal dense neural components with exact manual gradients.

Linear layers, SiLU, inverted dropout, masked softmax cross-entropy, and
Adam, all in float64 numpy.  Backward passes are written by hand and are
checked against central finite differences in the test suite; there is no
autodiff anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

__all__ = [
    "LinearLayer",
    "AdamState",
    "init_linear",
    "silu",
    "silu_grad",
    "mlp_forward",
    "backward_mlp",
    "softmax_cross_entropy",
    "adam_step",
    "array_to_doc",
    "doc_to_array",
]


@dataclass(eq=False)
class LinearLayer:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int) -> LinearLayer:
    """Glorot-uniform weights, zero bias."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    return LinearLayer(W=W, b=np.zeros(fan_out))


def silu(x):
    return x * expit(x)


def silu_grad(x):
    s = expit(x)
    return s * (1.0 + x * (1.0 - s))


def _dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    # inverted scaling keeps the expectation of the output unchanged
    return (rng.random(shape) >= rate) / (1.0 - rate)


def mlp_forward(layers, X, dropout_rate: float = 0.0, rng=None, training: bool = False):
    """Forward pass: dropout on every layer input, SiLU between layers.

    No activation follows the last layer.  Returns (output, cache); the
    cache feeds backward_mlp exactly once.
    """
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {dropout_rate}")
    if training and dropout_rate > 0.0 and rng is None:
        raise ValueError("training with dropout requires an rng")
    A = np.asarray(X, dtype=np.float64)
    inputs, preacts, masks = [], [], []
    for i, layer in enumerate(layers):
        if A.shape[1] != layer.W.shape[0]:
            raise ValueError(
                f"layer {i}: input width {A.shape[1]} does not match "
                f"weight fan-in {layer.W.shape[0]}"
            )
        if training and dropout_rate > 0.0:
            mask = _dropout_mask(rng, A.shape, dropout_rate)
            A = A * mask
        else:
            mask = None
        masks.append(mask)
        inputs.append(A)
        H = A @ layer.W + layer.b
        preacts.append(H)
        A = silu(H) if i < len(layers) - 1 else H
    cache = {
        "layers": list(layers),
        "inputs": inputs,
        "preacts": preacts,
        "masks": masks,
        "consumed": False,
    }
    return A, cache


def backward_mlp(cache, upstream):
    """Gradients of mlp_forward: per-layer (dW, db) plus the input gradient."""
    if cache["consumed"]:
        raise RuntimeError("stale cache: backward_mlp already consumed it")
    cache["consumed"] = True
    layers = cache["layers"]
    grads = [None] * len(layers)
    up = np.asarray(upstream, dtype=np.float64)
    for i in range(len(layers) - 1, -1, -1):
        if i < len(layers) - 1:
            up = up * silu_grad(cache["preacts"][i])
        A = cache["inputs"][i]
        dW = A.T @ up
        db = up.sum(axis=0)
        grads[i] = (dW, db)
        up = up @ layers[i].W.T
        if cache["masks"][i] is not None:
            up = up * cache["masks"][i]
    return grads, up


def softmax_cross_entropy(logits, labels, mask):
    """Masked mean negative log-likelihood and its logits gradient.

    Softmax is row-stabilized by max subtraction.  The gradient is
    (softmax - onehot) / |mask| on masked rows and zero elsewhere.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    idx = np.asarray(mask, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("mask must be nonempty")
    z = logits[idx]
    y = labels[idx]
    if np.any(y < 0) or np.any(y >= logits.shape[1]):
        raise ValueError("label outside the class range")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    loss = float(-log_probs[np.arange(idx.size), y].mean())
    grad = np.zeros_like(logits)
    soft = np.exp(log_probs)
    soft[np.arange(idx.size), y] -= 1.0
    grad[idx] = soft / idx.size
    return loss, grad


@dataclass(eq=False)
class AdamState:
    """Adam moments plus hyperparameters, shaped like the parameter list."""

    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(state: AdamState, params, grads, weight_decay: float = 0.0,
              decay_mask=None):
    """One Adam update with bias correction; parameters update in place.

    Classic L2: decayed gradients (g + wd * p) feed the moment estimates.
    decay_mask selects which parameters receive decay (default: all).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and state must align")
    if decay_mask is None:
        decay_mask = [True] * len(params)
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != np.shape(g):
            raise ValueError(f"parameter {i}: shape {p.shape} vs gradient {np.shape(g)}")
        if weight_decay != 0.0 and decay_mask[i]:
            g = g + weight_decay * p
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def array_to_doc(arr: np.ndarray) -> dict:
    """Shape header plus row-major values; floats survive JSON exactly."""
    return {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).ravel().tolist()}


def doc_to_array(doc: dict) -> np.ndarray:
    return np.asarray(doc["data"], dtype=np.float64).reshape(doc["shape"])
