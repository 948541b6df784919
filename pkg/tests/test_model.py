"""Decoupled model forward/backward, training loop, and the coupled layer."""

import numpy as np
import pytest

from chebgibbs.data_io import Dataset, random_split, sbm_generate
from chebgibbs.graph_core import build_graph, renormalized_adjacency
from chebgibbs.model import (
    AblationParams,
    ModelParams,
    TrainConfig,
    _ablation_backward,
    _ablation_forward,
    backward,
    chebnet_gibbs_layer,
    evaluate,
    forward,
    history_to_csv,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
)
from chebgibbs.nn_core import LinearLayer, backward_mlp, init_linear, mlp_forward, silu, softmax_cross_entropy
from chebgibbs.poly_filters import FilterSpec, damping_vector, cheb_terms
from chebgibbs.spectral_oracle import apply_filter_spectral, eigendecompose
from chebgibbs.graph_core import SparseOperator
import scipy.sparse as sparse


def random_instance(seed, n=16, f=3, classes=3, K=4, hidden=5, damping="jackson"):
    rng = np.random.default_rng(seed)
    edges = [(i, (i + 1) % n) for i in range(n)]
    for _ in range(n):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.append((min(u, v), max(u, v)))
    with pytest.warns(UserWarning):
        g = build_graph(n, edges)
    S = renormalized_adjacency(g, 1.0)
    config = TrainConfig(K=K, hidden_dim=hidden, damping=damping, dropout_rate=0.0)
    params = init_params(rng, f, classes, config)
    params.coeffs[:] = rng.standard_normal(K + 1)
    X = rng.standard_normal((n, f))
    y = rng.integers(0, classes, size=n)
    mask = rng.choice(n, size=n // 2, replace=False)
    return params, S, X, y, mask, rng


def zero_operator(n):
    return SparseOperator(n, sparse.csr_matrix((n, n)), True)


def fd_grad(loss, arr, h=1e-5):
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + h
        hi = loss()
        arr[idx] = orig - h
        lo = loss()
        arr[idx] = orig
        g[idx] = (hi - lo) / (2 * h)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), 1e-8))


class TestForward:
    def test_unit_first_coefficient_is_mlp_softmax(self):
        params, S, X, *_ = random_instance(0)
        params.coeffs[:] = 0.0
        params.coeffs[0] = 1.0
        probs, _ = forward(params, S, X)
        Z, _ = mlp_forward(params.mlp, X)
        expect = np.exp(Z - Z.max(1, keepdims=True))
        expect /= expect.sum(1, keepdims=True)
        assert np.max(np.abs(probs - expect)) <= 1e-12

    def test_zero_operator_keeps_only_first_term(self):
        params, S, X, *_ = random_instance(1)
        probs, _ = forward(params, zero_operator(S.n), X)
        Z, _ = mlp_forward(params.mlp, X)
        P = params.coeffs[0] * Z  # g_0 = 1 and T_0 = I; all others vanish
        expect = np.exp(P - P.max(1, keepdims=True))
        expect /= expect.sum(1, keepdims=True)
        assert np.max(np.abs(probs - expect)) <= 1e-12

    def test_matches_spectral_oracle(self):
        params, S, X, *_ = random_instance(2, n=24)
        probs, cache = forward(params, S, X)
        Z, _ = mlp_forward(params.mlp, X)
        es = eigendecompose(S.to_dense())
        g = params.spec.damping_vector()

        def response(lams):
            theta = np.arccos(np.clip(lams, -1, 1))
            return sum(params.coeffs[k] * g[k] * np.cos(k * theta)
                       for k in range(params.spec.K + 1))

        P = apply_filter_spectral(es, response, Z)
        expect = np.exp(P - P.max(1, keepdims=True))
        expect /= expect.sum(1, keepdims=True)
        assert np.max(np.abs(probs - expect)) <= 1e-8

    def test_rows_are_probability_vectors(self):
        params, S, X, *_ = random_instance(3)
        probs, _ = forward(params, S, X)
        assert np.all(probs >= 0)
        assert np.max(np.abs(probs.sum(axis=1) - 1.0)) <= 1e-12

    def test_parity_reparameterization(self):
        params, S, X, *_ = random_instance(4)
        probs_pos, _ = forward(params, S, X)
        signs = (-1.0) ** np.arange(params.spec.K + 1)
        flipped = ModelParams(
            mlp=params.mlp,
            spec=FilterSpec("chebyshev", params.spec.K, params.spec.damping,
                            params.spec.m, params.coeffs * signs),
            gso_sign=-params.gso_sign,
        )
        probs_neg, _ = forward(flipped, S.negated(), X)
        assert np.max(np.abs(probs_pos - probs_neg)) <= 1e-10

    def test_damped_contribution_ratio_is_exactly_the_factor(self):
        params, S, X, *_ = random_instance(5)
        Z, _ = mlp_forward(params.mlp, X)
        g = damping_vector("jackson", params.spec.K)
        for k, term in enumerate(cheb_terms(S, Z, params.spec.K)):
            undamped = np.linalg.norm(params.coeffs[k] * term)
            damped = np.linalg.norm(params.coeffs[k] * g[k] * term)
            assert np.isfinite(damped)
            if undamped > 0:
                assert damped / undamped == pytest.approx(g[k], rel=1e-12)


class TestBackward:
    def test_gradients_match_finite_differences(self):
        params, S, X, y, mask, _ = random_instance(6)
        _, cache = forward(params, S, X)
        mlp_grads, dw = backward(params, cache, y, mask)

        def loss():
            _, c = forward(params, S, X)
            return softmax_cross_entropy(c["logits"], y, mask)[0]

        for (dW, db), layer in zip(mlp_grads, params.mlp):
            assert rel_err(dW, fd_grad(loss, layer.W)) <= 1e-4
            assert rel_err(db, fd_grad(loss, layer.b)) <= 1e-4
        assert rel_err(dw, fd_grad(loss, params.coeffs)) <= 1e-4

    def test_near_perfect_predictions_give_vanishing_gradients(self):
        params, S, X, y, mask, _ = random_instance(7, classes=2)
        # make the MLP output a huge margin toward the true class
        Z = np.zeros((S.n, 2))
        Z[np.arange(S.n), y] = 60.0
        params.mlp = [LinearLayer(W=np.zeros((X.shape[1], 2)), b=np.zeros(2))]
        params.coeffs[:] = 0.0
        params.coeffs[0] = 1.0
        X_id = Z  # single identity-like layer: bias carries the logits
        params.mlp[0].W = np.eye(2)
        probs, cache = forward(params, zero_operator(S.n), X_id[:, :2])
        mlp_grads, dw = backward(params, cache, y, mask)
        assert np.max(np.abs(dw)) <= 1e-8
        assert all(np.max(np.abs(dW)) <= 1e-8 for dW, _ in mlp_grads)

    def test_order_zero_reduces_to_scaled_mlp(self):
        params, S, X, y, mask, rng = random_instance(8, K=0)
        w0 = 1.7
        params.coeffs[0] = w0
        _, cache = forward(params, S, X)
        mlp_grads, dw = backward(params, cache, y, mask)

        Z, mlp_cache = mlp_forward(params.mlp, X)
        _, G = softmax_cross_entropy(w0 * Z, y, mask)
        ref_grads, _ = backward_mlp(mlp_cache, w0 * G)
        for (dW, db), (rW, rb) in zip(mlp_grads, ref_grads):
            assert np.max(np.abs(dW - rW)) <= 1e-12
            assert np.max(np.abs(db - rb)) <= 1e-12
        assert dw[0] == pytest.approx(float(np.sum(Z * G)), abs=1e-12)

    def test_stale_cache_rejected(self):
        params, S, X, y, mask, _ = random_instance(9)
        _, cache = forward(params, S, X)
        backward(params, cache, y, mask)
        with pytest.raises(RuntimeError, match="stale cache"):
            backward(params, cache, y, mask)


def separable_dataset(n=60, seed=0):
    """Two linearly separable classes on an empty graph (identity GSO)."""
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    X = np.zeros((n, 2))
    X[y == 0, 0] = 1.0
    X[y == 1, 1] = 1.0
    X += 0.05 * rng.standard_normal((n, 2))
    ds = Dataset(graph=build_graph(n, []), X=X, y=y, splits={}, name="separable")
    return random_split(ds, (0.6, 0.2, 0.2), seed=seed)


class TestTrain:
    def test_learns_linearly_separable_instance(self):
        ds = separable_dataset()
        config = TrainConfig(max_epochs=200, patience=200, dropout_rate=0.0,
                             K=2, hidden_dim=8, gso_mode="pos", seed=1)
        params, history = train(ds, config)
        assert evaluate(params, ds, ds.splits["train"]) >= 0.99
        assert len(history) <= 200

    def test_zero_epochs_returns_initial_params(self):
        ds = separable_dataset()
        config = TrainConfig(max_epochs=0, seed=2)
        params, history = train(ds, config)
        assert history == []
        assert np.array_equal(params.coeffs, np.ones(config.K + 1))

    def test_same_seed_gives_identical_histories(self):
        ds = separable_dataset()
        config = TrainConfig(max_epochs=40, patience=40, K=2, hidden_dim=8,
                             dropout_rate=0.3, seed=3, gso_mode="pos")
        _, h1 = train(ds, config)
        _, h2 = train(ds, config)
        assert h1 == h2

    def test_empty_split_rejected(self):
        ds = separable_dataset()
        ds.splits = {"train": [], "val": [1], "test": [2]}
        with pytest.raises(ValueError, match="empty 'train'"):
            train(ds, TrainConfig())

    def test_early_stopping_restores_best_epoch(self):
        ds = separable_dataset()
        config = TrainConfig(max_epochs=300, patience=5, K=2, hidden_dim=8,
                             dropout_rate=0.5, seed=4, gso_mode="pos")
        params, history = train(ds, config)
        assert len(history) < 300  # patience actually triggered


class TestEvaluate:
    def test_perfect_predictions(self):
        ds = separable_dataset()
        config = TrainConfig(max_epochs=200, patience=200, dropout_rate=0.0,
                             K=2, hidden_dim=8, gso_mode="pos", seed=5)
        params, _ = train(ds, config)
        acc = evaluate(params, ds, np.arange(ds.n))
        assert acc >= 0.99

    def test_uniform_logits_tie_break_to_class_zero(self):
        ds = separable_dataset()
        config = TrainConfig(K=1, hidden_dim=4, max_epochs=0, seed=6)
        params, _ = train(ds, config)
        for layer in params.mlp:
            layer.W[:] = 0.0
            layer.b[:] = 0.0
        acc = evaluate(params, ds, np.arange(ds.n))
        assert acc == pytest.approx(np.mean(ds.y == 0))

    def test_empty_mask_rejected(self):
        ds = separable_dataset()
        params, _ = train(ds, TrainConfig(max_epochs=0, seed=7))
        with pytest.raises(ValueError, match="nonempty"):
            evaluate(params, ds, [])


class TestChebnetGibbsLayer:
    def test_order_zero_is_plain_layer(self):
        rng = np.random.default_rng(10)
        Z = rng.standard_normal((6, 3))
        W = init_linear(rng, 3, 2)
        S = zero_operator(6)
        out = chebnet_gibbs_layer(S, Z, W, damping="none", K=0, activation="relu")
        assert np.max(np.abs(out - np.maximum(Z @ W.W + W.b, 0.0))) <= 1e-12

    def test_zero_operator_first_order(self):
        rng = np.random.default_rng(11)
        Z = rng.standard_normal((5, 3))
        W = init_linear(rng, 3, 2)
        out = chebnet_gibbs_layer(zero_operator(5), Z, W, damping="jackson", K=1,
                                  activation="silu")
        assert np.max(np.abs(out - silu(Z @ W.W + W.b))) <= 1e-12

    def test_preactivation_matches_spectral_oracle(self):
        params, S, X, *_ = random_instance(12, n=20)
        rng = np.random.default_rng(13)
        Z = rng.standard_normal((20, 3))
        W = init_linear(rng, 3, 2)
        K = 5
        out = chebnet_gibbs_layer(S, Z, W, damping="jackson", K=K, activation="relu")
        es = eigendecompose(S.to_dense())
        g = damping_vector("jackson", K)

        def response(lams):
            theta = np.arccos(np.clip(lams, -1, 1))
            return sum(g[k] * np.cos(k * theta) for k in range(K + 1))

        pre = apply_filter_spectral(es, response, Z) @ W.W + W.b
        assert np.max(np.abs(out - np.maximum(pre, 0.0))) <= 1e-8


class TestAblationGradients:
    def test_finite_differences(self):
        params, S, X, y, mask, rng = random_instance(14, n=12, classes=2)
        ab = AblationParams(
            layers=[init_linear(rng, X.shape[1], 4), init_linear(rng, 4, 2)],
            damping="jackson", K=3, activation="relu",
        )
        _, cache = _ablation_forward(ab, S, X)
        grads = _ablation_backward(ab, cache, y, mask)

        def loss():
            P, _ = _ablation_forward(ab, S, X)
            return softmax_cross_entropy(P, y, mask)[0]

        for (dW, db), layer in zip(grads, ab.layers):
            assert rel_err(dW, fd_grad(loss, layer.W)) <= 1e-4
            assert rel_err(db, fd_grad(loss, layer.b)) <= 1e-4


class TestSerialization:
    def test_checkpoint_round_trip_exact(self, tmp_path):
        params, *_ = random_instance(15)
        path = tmp_path / "ckpt.json"
        save_checkpoint(params, path)
        back = load_checkpoint(path)
        assert back.gso_sign == params.gso_sign
        assert back.spec.damping == params.spec.damping
        assert np.array_equal(back.coeffs, params.coeffs)
        for a, b in zip(back.mlp, params.mlp):
            assert np.array_equal(a.W, b.W)
            assert np.array_equal(a.b, b.b)

    def test_history_csv(self, tmp_path):
        ds = separable_dataset()
        config = TrainConfig(max_epochs=30, patience=30, K=1, hidden_dim=4,
                             dropout_rate=0.0, seed=8, gso_mode="pos")
        _, history = train(ds, config)
        path = tmp_path / "history.csv"
        history_to_csv(history, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss,val_acc"
        assert len(lines) == len(history) + 1


class TestConfigValidation:
    def test_patience_and_epochs(self):
        with pytest.raises(ValueError, match="patience"):
            TrainConfig(patience=0)
        with pytest.raises(ValueError, match="max_epochs"):
            TrainConfig(max_epochs=10, patience=30)
        TrainConfig(max_epochs=0)  # explicitly allowed: no training

    def test_enum_fields(self):
        with pytest.raises(ValueError, match="damping"):
            TrainConfig(damping="fejer")
        with pytest.raises(ValueError, match="gso_mode"):
            TrainConfig(gso_mode="both")

    def test_model_params_validation(self):
        spec = FilterSpec("monomial", 1, "none", 1, np.ones(2))
        with pytest.raises(ValueError, match="Chebyshev"):
            ModelParams(mlp=[], spec=spec)
        good = FilterSpec("chebyshev", 1, "none", 1, np.ones(2))
        with pytest.raises(ValueError, match="gso_sign"):
            ModelParams(mlp=[], spec=good, gso_sign=0)
