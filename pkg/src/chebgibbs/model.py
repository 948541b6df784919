"""Damped Chebyshev node-classification models and their training loop.

Two architectures share the filter machinery:

* the decoupled model: an MLP transforms features, then a learnable damped
  Chebyshev filter of the renormalized adjacency propagates the class
  scores, then softmax.  The adjacency sign follows graph homophily, so
  heterophilous graphs start from a high-pass filter.
* the coupled ablation layer: damped Chebyshev propagation of the scaled
  Laplacian inside each layer, followed by a shared weight and activation,
  mirroring the classic coupled construction for damping ablations.

Gradients are manual; every path is checked against finite differences in
the tests.  Training is full-batch Adam with early stopping on validation
loss and restoration of the best epoch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph_core import (
    Graph,
    SparseOperator,
    estimate_lambda_max,
    node_homophily,
    renormalized_adjacency,
    scaled_laplacian,
    select_gso,
    sym_norm_laplacian,
)
from .nn_core import (
    AdamState,
    LinearLayer,
    adam_step,
    array_to_doc,
    backward_mlp,
    doc_to_array,
    init_linear,
    mlp_forward,
    silu,
    silu_grad,
    softmax_cross_entropy,
)
from .poly_filters import DAMPINGS, FilterSpec, apply_poly_filter, cheb_terms

__all__ = [
    "ModelParams",
    "TrainConfig",
    "AblationParams",
    "init_params",
    "build_gso",
    "forward",
    "backward",
    "train",
    "evaluate",
    "chebnet_gibbs_layer",
    "train_ablation",
    "evaluate_ablation",
    "save_checkpoint",
    "load_checkpoint",
    "history_to_csv",
]

GSO_MODES = ("auto", "pos", "neg")
LAMBDA_MAX_MODES = ("power", "fixed2")
COEFF_INITS = ("ones", "normal")
ACTIVATIONS = ("relu", "silu")


@dataclass(eq=False)
class ModelParams:
    """MLP weights plus the learnable per-order filter coefficients.

    The live coefficient vector is spec.coefficients; `coeffs` is a view of
    it, so optimizer updates keep the filter spec current.
    """

    mlp: list
    spec: FilterSpec
    gso_sign: int = 1

    def __post_init__(self):
        if self.spec.basis != "chebyshev":
            raise ValueError("the decoupled model requires the Chebyshev basis")
        if self.gso_sign not in (1, -1):
            raise ValueError(f"gso_sign must be +1 or -1, got {self.gso_sign}")

    @property
    def coeffs(self) -> np.ndarray:
        return self.spec.coefficients


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the standard recipe
    (order 10, learning rate 1e-2, L2 5e-4, hidden width 64, patience 30)."""

    lr: float = 1e-2
    l2_rate: float = 5e-4
    dropout_rate: float = 0.6
    hidden_dim: int = 64
    K: int = 10
    max_epochs: int = 1000
    patience: int = 30
    seed: int = 0
    damping: str = "jackson"
    lanczos_m: int = 1
    gso_mode: str = "auto"
    homophily_threshold: float = 0.5
    homophily_train_only: bool = False
    lambda_max_mode: str = "power"
    coeff_init: str = "ones"
    activation: str = "relu"

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.max_epochs != 0 and self.max_epochs < self.patience:
            raise ValueError("max_epochs must be 0 or >= patience")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")
        if self.K < 0 or self.hidden_dim < 1:
            raise ValueError("K must be >= 0 and hidden_dim >= 1")
        if self.damping not in DAMPINGS:
            raise ValueError(f"unknown damping {self.damping!r}")
        if self.gso_mode not in GSO_MODES:
            raise ValueError(f"gso_mode must be one of {GSO_MODES}")
        if self.lambda_max_mode not in LAMBDA_MAX_MODES:
            raise ValueError(f"lambda_max_mode must be one of {LAMBDA_MAX_MODES}")
        if self.coeff_init not in COEFF_INITS:
            raise ValueError(f"coeff_init must be one of {COEFF_INITS}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")


def init_params(rng: np.random.Generator, in_dim: int, n_classes: int,
                config: TrainConfig) -> ModelParams:
    """Two-layer MLP (Glorot uniform) and coefficients initialized to one."""
    layers = [
        init_linear(rng, in_dim, config.hidden_dim),
        init_linear(rng, config.hidden_dim, n_classes),
    ]
    if config.coeff_init == "ones":
        coeffs = np.ones(config.K + 1)
    else:
        coeffs = rng.standard_normal(config.K + 1) / (config.K + 1)
    spec = FilterSpec("chebyshev", config.K, config.damping, config.lanczos_m, coeffs)
    return ModelParams(mlp=layers, spec=spec, gso_sign=1)


def build_gso(graph: Graph, labels, config: TrainConfig,
              train_mask=None) -> tuple[SparseOperator, int]:
    """Renormalized adjacency with the homophily-driven sign.

    Mode 'auto' measures node homophily (optionally on training labels
    only) and negates the operator below the threshold; 'pos' and 'neg'
    force the sign.
    """
    if config.gso_mode == "pos":
        return renormalized_adjacency(graph, 1.0), 1
    if config.gso_mode == "neg":
        return renormalized_adjacency(graph, 1.0).negated(), -1
    mask = train_mask if config.homophily_train_only else None
    h = node_homophily(graph, labels, mask=mask).h
    sign = 1 if h >= config.homophily_threshold else -1
    return select_gso(graph, h, config.homophily_threshold), sign


def _softmax_rows(P: np.ndarray) -> np.ndarray:
    z = P - P.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: ModelParams, S: SparseOperator, X: np.ndarray,
            rng=None, training: bool = False, dropout_rate: float = 0.0):
    """Class probabilities: softmax of the damped filter applied to MLP output.

    The cache keeps the K+1 propagated term matrices (class-score width, so
    cheap) for the coefficient gradients, plus the MLP cache.
    """
    Z, mlp_cache = mlp_forward(params.mlp, X, dropout_rate, rng, training)
    g = params.spec.damping_vector()
    terms = list(cheb_terms(S, Z, params.spec.K))
    c = params.coeffs * g
    P = np.zeros_like(Z)
    for k, term in enumerate(terms):
        P += c[k] * term
    probs = _softmax_rows(P)
    cache = {
        "mlp": mlp_cache,
        "terms": terms,
        "logits": P,
        "damping": g,
        "S": S,
        "consumed": False,
    }
    return probs, cache


def backward(params: ModelParams, cache, labels, mask):
    """Gradients of the masked cross-entropy for all parameters.

    Coefficient k receives g_k <T_k(S) Z, G>; the feature path reuses the
    filter itself since polynomials of a symmetric operator are symmetric.
    Returns (mlp_grads, coeff_grad).
    """
    if cache["consumed"]:
        raise RuntimeError("stale cache: backward already consumed it")
    cache["consumed"] = True
    _, G = softmax_cross_entropy(cache["logits"], labels, mask)
    g = cache["damping"]
    dw = np.array([g[k] * np.sum(term * G) for k, term in enumerate(cache["terms"])])
    dZ = apply_poly_filter(params.spec, cache["S"], G)
    mlp_grads, _ = backward_mlp(cache["mlp"], dZ)
    return mlp_grads, dw


def _flat_params(params: ModelParams) -> list:
    flat = []
    for layer in params.mlp:
        flat.extend([layer.W, layer.b])
    flat.append(params.coeffs)
    return flat


def _flat_grads(mlp_grads, dw) -> list:
    flat = []
    for dW, db in mlp_grads:
        flat.extend([dW, db])
    flat.append(dw)
    return flat


def _accuracy(probs: np.ndarray, labels, mask) -> float:
    idx = np.asarray(mask, dtype=np.int64)
    preds = np.argmax(probs[idx], axis=1)  # ties resolve to the lowest class
    return float(np.mean(preds == np.asarray(labels)[idx]))


def _require_mask(dataset, name: str) -> np.ndarray:
    idx = np.asarray(dataset.splits.get(name, []), dtype=np.int64)
    if idx.size == 0:
        raise ValueError(f"dataset has an empty {name!r} split")
    return idx


def train(dataset, config: TrainConfig):
    """Full-batch Adam with early stopping on validation loss.

    Deterministic for a fixed seed.  Returns the parameters of the best
    validation epoch and the per-epoch history.
    """
    train_idx = _require_mask(dataset, "train")
    val_idx = _require_mask(dataset, "val")
    X = np.asarray(dataset.X, dtype=np.float64)
    y = np.asarray(dataset.y, dtype=np.int64)
    n_classes = int(y.max()) + 1

    rng = np.random.default_rng(config.seed)
    S, sign = build_gso(dataset.graph, y, config, train_mask=train_idx)
    params = init_params(rng, X.shape[1], n_classes, config)
    params.gso_sign = sign

    history = []
    if config.max_epochs == 0:
        return params, history

    flat = _flat_params(params)
    # L2 on weight matrices and filter coefficients, never on biases
    decay_mask = [True, False, True, False, True]
    opt = AdamState.for_params(flat, lr=config.lr)

    best_val = np.inf
    best_snapshot = None
    bad_epochs = 0
    for epoch in range(1, config.max_epochs + 1):
        probs, cache = forward(params, S, X, rng=rng, training=True,
                               dropout_rate=config.dropout_rate)
        train_loss, _ = softmax_cross_entropy(cache["logits"], y, train_idx)
        train_acc = _accuracy(probs, y, train_idx)
        mlp_grads, dw = backward(params, cache, y, train_idx)
        adam_step(opt, flat, _flat_grads(mlp_grads, dw),
                  weight_decay=config.l2_rate, decay_mask=decay_mask)

        val_probs, val_cache = forward(params, S, X, training=False)
        val_loss, _ = softmax_cross_entropy(val_cache["logits"], y, val_idx)
        val_acc = _accuracy(val_probs, y, val_idx)
        history.append({
            "epoch": epoch,
            "train_loss": train_loss,
            "train_acc": train_acc,
            "val_loss": val_loss,
            "val_acc": val_acc,
        })

        if val_loss < best_val:
            best_val = val_loss
            best_snapshot = [p.copy() for p in flat]
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    if best_snapshot is not None:
        for p, snap in zip(flat, best_snapshot):
            p[...] = snap
    return params, history


def evaluate(params: ModelParams, dataset, mask) -> float:
    """Accuracy of argmax predictions over the masked nodes."""
    idx = np.asarray(mask, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("mask must be nonempty")
    S = renormalized_adjacency(dataset.graph, 1.0)
    if params.gso_sign < 0:
        S = S.negated()
    probs, _ = forward(params, S, np.asarray(dataset.X, dtype=np.float64))
    return _accuracy(probs, dataset.y, idx)


# ---------------------------------------------------------------------------
# coupled ablation layer: damped propagation inside the layer


def _activation_fns(name: str):
    if name == "relu":
        return (lambda x: np.maximum(x, 0.0)), (lambda x: (x > 0.0).astype(np.float64))
    if name == "silu":
        return silu, silu_grad
    raise ValueError(f"activation must be one of {ACTIVATIONS}")


def _ones_filter(damping: str, K: int, m: int) -> FilterSpec:
    return FilterSpec("chebyshev", K, damping, m, np.ones(K + 1))


def chebnet_gibbs_layer(S: SparseOperator, Z: np.ndarray, W: LinearLayer,
                        damping: str = "none", K: int = 0, m: int = 1,
                        activation: str = "relu") -> np.ndarray:
    """Coupled layer: damped Chebyshev sum, shared weight, then activation."""
    act, _ = _activation_fns(activation)
    Q = apply_poly_filter(_ones_filter(damping, K, m), S, np.asarray(Z, dtype=np.float64))
    return act(Q @ W.W + W.b)


@dataclass(eq=False)
class AblationParams:
    layers: list
    damping: str
    K: int
    m: int = 1
    activation: str = "relu"
    lambda_max: float = 2.0


def _ablation_forward(p: AblationParams, S: SparseOperator, X: np.ndarray,
                      rng=None, training: bool = False, dropout_rate: float = 0.0):
    act, _ = _activation_fns(p.activation)
    spec = _ones_filter(p.damping, p.K, p.m)
    w1, w2 = p.layers

    def maybe_drop(A):
        if training and dropout_rate > 0.0:
            mask = (rng.random(A.shape) >= dropout_rate) / (1.0 - dropout_rate)
            return A * mask, mask
        return A, None

    X0, mask0 = maybe_drop(np.asarray(X, dtype=np.float64))
    Q0 = apply_poly_filter(spec, S, X0)
    H1 = Q0 @ w1.W + w1.b
    Z1 = act(H1)
    Z1d, mask1 = maybe_drop(Z1)
    Q1 = apply_poly_filter(spec, S, Z1d)
    P = Q1 @ w2.W + w2.b
    cache = {"Q0": Q0, "H1": H1, "Q1": Q1, "mask1": mask1, "spec": spec, "S": S,
             "logits": P, "consumed": False}
    return P, cache


def _ablation_backward(p: AblationParams, cache, labels, mask):
    if cache["consumed"]:
        raise RuntimeError("stale cache: ablation backward already consumed it")
    cache["consumed"] = True
    _, act_grad = _activation_fns(p.activation)
    w1, w2 = p.layers
    _, G = softmax_cross_entropy(cache["logits"], labels, mask)
    dW2 = cache["Q1"].T @ G
    db2 = G.sum(axis=0)
    dQ1 = G @ w2.W.T
    dZ1 = apply_poly_filter(cache["spec"], cache["S"], dQ1)
    if cache["mask1"] is not None:
        dZ1 = dZ1 * cache["mask1"]
    dH1 = dZ1 * act_grad(cache["H1"])
    dW1 = cache["Q0"].T @ dH1
    db1 = dH1.sum(axis=0)
    return [(dW1, db1), (dW2, db2)]


def _laplacian_gso(graph: Graph, config: TrainConfig) -> tuple[SparseOperator, float]:
    L = sym_norm_laplacian(graph)
    lam = 2.0 if config.lambda_max_mode == "fixed2" else estimate_lambda_max(L)
    return scaled_laplacian(L, lam), lam


def train_ablation(dataset, config: TrainConfig):
    """Train the two-layer coupled ablation network on the scaled Laplacian."""
    train_idx = _require_mask(dataset, "train")
    val_idx = _require_mask(dataset, "val")
    X = np.asarray(dataset.X, dtype=np.float64)
    y = np.asarray(dataset.y, dtype=np.int64)
    n_classes = int(y.max()) + 1

    rng = np.random.default_rng(config.seed)
    S, lam = _laplacian_gso(dataset.graph, config)
    params = AblationParams(
        layers=[init_linear(rng, X.shape[1], config.hidden_dim),
                init_linear(rng, config.hidden_dim, n_classes)],
        damping=config.damping, K=config.K, m=config.lanczos_m,
        activation=config.activation, lambda_max=lam,
    )

    history = []
    if config.max_epochs == 0:
        return params, history

    flat = [params.layers[0].W, params.layers[0].b,
            params.layers[1].W, params.layers[1].b]
    decay_mask = [True, False, True, False]
    opt = AdamState.for_params(flat, lr=config.lr)

    best_val = np.inf
    best_snapshot = None
    bad_epochs = 0
    for epoch in range(1, config.max_epochs + 1):
        P, cache = _ablation_forward(params, S, X, rng=rng, training=True,
                                     dropout_rate=config.dropout_rate)
        train_loss, _ = softmax_cross_entropy(P, y, train_idx)
        train_acc = _accuracy(_softmax_rows(P), y, train_idx)
        grads = _ablation_backward(params, cache, y, train_idx)
        adam_step(opt, flat, [g for pair in grads for g in pair],
                  weight_decay=config.l2_rate, decay_mask=decay_mask)

        Pv, _ = _ablation_forward(params, S, X, training=False)
        val_loss, _ = softmax_cross_entropy(Pv, y, val_idx)
        val_acc = _accuracy(_softmax_rows(Pv), y, val_idx)
        history.append({
            "epoch": epoch,
            "train_loss": train_loss,
            "train_acc": train_acc,
            "val_loss": val_loss,
            "val_acc": val_acc,
        })

        if val_loss < best_val:
            best_val = val_loss
            best_snapshot = [p.copy() for p in flat]
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    if best_snapshot is not None:
        for p, snap in zip(flat, best_snapshot):
            p[...] = snap
    return params, history


def evaluate_ablation(params: AblationParams, dataset, mask) -> float:
    idx = np.asarray(mask, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("mask must be nonempty")
    L = sym_norm_laplacian(dataset.graph)
    S = scaled_laplacian(L, params.lambda_max)
    P, _ = _ablation_forward(params, S, np.asarray(dataset.X, dtype=np.float64))
    return _accuracy(_softmax_rows(P), dataset.y, idx)


# ---------------------------------------------------------------------------
# checkpoints and history serialization


def save_checkpoint(params: ModelParams, path) -> None:
    """JSON checkpoint; float values round-trip exactly."""
    doc = {
        "layers": [{"W": array_to_doc(l.W), "b": array_to_doc(l.b)} for l in params.mlp],
        "coeffs": array_to_doc(params.coeffs),
        "spec": {
            "basis": params.spec.basis,
            "K": params.spec.K,
            "damping": params.spec.damping,
            "m": params.spec.m,
        },
        "gso_sign": params.gso_sign,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> ModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    layers = [LinearLayer(W=doc_to_array(l["W"]), b=doc_to_array(l["b"]))
              for l in doc["layers"]]
    spec = FilterSpec(
        basis=doc["spec"]["basis"],
        K=int(doc["spec"]["K"]),
        damping=doc["spec"]["damping"],
        m=int(doc["spec"]["m"]),
        coefficients=doc_to_array(doc["coeffs"]),
    )
    return ModelParams(mlp=layers, spec=spec, gso_sign=int(doc["gso_sign"]))


def history_to_csv(history, path) -> None:
    """Per-epoch rows: epoch, train_loss, val_loss, val_acc."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_loss,val_acc\n")
        for rec in history:
            fh.write(f"{rec['epoch']},{rec['train_loss']:.17g},"
                     f"{rec['val_loss']:.17g},{rec['val_acc']:.17g}\n")
