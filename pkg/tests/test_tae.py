"""Tests for the autoencoder and its distance-matching loss.

Gradient correctness is checked against central finite differences and
the forward pass against a scalar-loop reimplementation.
"""

import numpy as np
import pytest

from mapperbench.errors import InvalidArgumentError, TrainingDivergedError
from mapperbench import tae


def _forward_oracle(params, X):
    """Scalar-loop MLP forward, no vectorized matmul."""
    A = [list(row) for row in X]
    latent = None
    for li, layer in enumerate(params.layers):
        fan_in, fan_out = layer.W.shape
        out = []
        for row in A:
            new = []
            for c in range(fan_out):
                s = layer.b[c]
                for k in range(fan_in):
                    s += row[k] * layer.W[k, c]
                if layer.activation == "relu" and s < 0:
                    s = 0.0
                new.append(s)
            out.append(new)
        A = out
        if li + 1 == params.n_encoder_layers:
            latent = [list(r) for r in A]
    return np.array(latent), np.array(A)


def test_init_shapes_and_bounds():
    cfg = tae.TaeConfig(hidden=(5, 3), latent_dim=2, seed=7)
    params = tae.init_params(11, cfg)
    dims = [(11, 5), (5, 3), (3, 2), (2, 3), (3, 5), (5, 11)]
    assert [l.W.shape for l in params.layers] == dims
    assert params.n_encoder_layers == 3
    for l in params.layers:
        bound = np.sqrt(6.0 / sum(l.W.shape))
        assert np.all(np.abs(l.W) <= bound)
        assert np.all(l.b == 0.0)
    # hidden layers relu, the latent and output layers linear
    assert [l.activation for l in params.layers] == [
        "relu", "relu", "identity", "relu", "relu", "identity",
    ]


def test_init_deterministic():
    cfg = tae.TaeConfig(seed=3)
    a = tae.init_params(6, cfg)
    b = tae.init_params(6, cfg)
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.W, lb.W)


def test_forward_matches_scalar_oracle():
    rng = np.random.default_rng(0)
    for trial in range(5):
        cfg = tae.TaeConfig(hidden=(4, 3), latent_dim=2, seed=trial)
        params = tae.init_params(5, cfg)
        X = rng.normal(size=(7, 5))
        Z, X_hat = tae.forward(params, X)
        Z_ref, X_hat_ref = _forward_oracle(params, X)
        np.testing.assert_allclose(Z, Z_ref, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(X_hat, X_hat_ref, rtol=1e-12, atol=1e-12)


def test_encode_matches_forward():
    rng = np.random.default_rng(1)
    cfg = tae.TaeConfig(hidden=(6,), latent_dim=3, seed=2)
    params = tae.init_params(4, cfg)
    X = rng.normal(size=(10, 4))
    Z, _ = tae.forward(params, X)
    np.testing.assert_array_equal(tae.encode(params, X), Z)


def test_forward_rejects_wrong_width():
    params = tae.init_params(4, tae.TaeConfig())
    with pytest.raises(InvalidArgumentError):
        tae.forward(params, np.zeros((3, 5)))
    with pytest.raises(InvalidArgumentError):
        tae.encode(params, np.zeros(4))


def test_topo_loss_zero_when_embedding_is_input():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(12, 3))
    value, grad = tae.topo_loss(X, X.copy())
    assert value == pytest.approx(0.0, abs=1e-18)
    np.testing.assert_allclose(grad, 0.0, atol=1e-12)


def test_topo_loss_positive_when_scaled():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(10, 3))
    value, _ = tae.topo_loss(X, 2.0 * X)
    assert value > 0.0


def test_topo_loss_hand_computed_pair():
    # Two points: both MSTs have the single edge (0, 1).
    X = np.array([[0.0], [3.0]])
    Z = np.array([[0.0], [7.0]])
    value, grad = tae.topo_loss(X, Z)
    # each direction contributes 0.5 * (7 - 3)^2 = 8
    assert value == pytest.approx(16.0, rel=1e-12)
    # d/dz1 of 2 * 0.5 * (|z1 - z0| - 3)^2 at z1=7: 2 * 4 = 8
    np.testing.assert_allclose(grad, [[-8.0], [8.0]], rtol=1e-12)


def test_topo_loss_symmetric_in_arguments():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(11, 5))
    Z = rng.normal(size=(11, 2))
    assert tae.topo_loss(X, Z)[0] == pytest.approx(tae.topo_loss(Z, X)[0], rel=1e-12)


def test_zero_network_maps_to_zero():
    params = tae.init_params(3, tae.TaeConfig(hidden=(4,), latent_dim=2))
    for l in params.layers:
        l.W[:] = 0.0
    Z, X_hat = tae.forward(params, np.random.default_rng(15).normal(size=(6, 3)))
    assert np.all(Z == 0.0)
    assert np.all(X_hat == 0.0)


def test_identity_linear_network_reconstructs_exactly():
    eye = np.eye(3)
    layers = [
        tae.Layer(eye.copy(), np.zeros(3), "identity"),
        tae.Layer(eye.copy(), np.zeros(3), "identity"),
    ]
    params = tae.MlpParams(layers, n_encoder_layers=1, latent_dim=3)
    X = np.random.default_rng(16).normal(size=(5, 3))
    Z, X_hat = tae.forward(params, X)
    np.testing.assert_array_equal(X_hat, X)
    np.testing.assert_array_equal(Z, X)


def test_topo_loss_permutation_invariant():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(15, 4))
    Z = rng.normal(size=(15, 2))
    base, _ = tae.topo_loss(X, Z)
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(15)
        permuted, _ = tae.topo_loss(X[perm], Z[perm])
        assert permuted == pytest.approx(base, rel=1e-9)


def test_topo_loss_gradient_finite_difference():
    rng = np.random.default_rng(7)
    h = 1e-6
    for trial in range(5):
        X = rng.normal(size=(9, 4))
        Z = rng.normal(size=(9, 2))
        _, grad = tae.topo_loss(X, Z)
        fd = np.zeros_like(Z)
        for r in range(Z.shape[0]):
            for c in range(Z.shape[1]):
                zp = Z.copy()
                zp[r, c] += h
                zm = Z.copy()
                zm[r, c] -= h
                fd[r, c] = (tae.topo_loss(X, zp)[0] - tae.topo_loss(X, zm)[0]) / (2 * h)
        denom = np.maximum(np.abs(fd) + np.abs(grad), 1e-8)
        assert np.max(np.abs(fd - grad) / denom) < 1e-5


def test_full_gradient_finite_difference():
    # every weight and bias of a small net, central differences
    rng = np.random.default_rng(8)
    h = 1e-5
    for trial in range(3):
        cfg = tae.TaeConfig(hidden=(4,), latent_dim=2, topo_weight=0.7, seed=trial)
        params = tae.init_params(3, cfg)
        # move off the init point so relu patterns are generic
        for l in params.layers:
            l.W += 0.05 * rng.normal(size=l.W.shape)
            l.b += 0.05 * rng.normal(size=l.b.shape)
        X = rng.normal(size=(8, 3))
        _, grads = tae.loss_and_grads(params, X, cfg.topo_weight)
        worst = 0.0
        for li, layer in enumerate(params.layers):
            for arr, g in ((layer.W, grads[li][0]), (layer.b, grads[li][1])):
                flat = arr.ravel()
                gflat = g.ravel()
                for k in range(flat.size):
                    orig = flat[k]
                    flat[k] = orig + h
                    up = tae.total_loss(params, X, cfg.topo_weight)
                    flat[k] = orig - h
                    down = tae.total_loss(params, X, cfg.topo_weight)
                    flat[k] = orig
                    fd = (up - down) / (2 * h)
                    denom = max(abs(fd) + abs(gflat[k]), 1e-6)
                    worst = max(worst, abs(fd - gflat[k]) / denom)
        assert worst < 1e-4


def test_loss_breakdown_invariant():
    rng = np.random.default_rng(9)
    cfg = tae.TaeConfig(hidden=(4,), latent_dim=2, topo_weight=0.3, seed=0)
    params = tae.init_params(5, cfg)
    X = rng.normal(size=(12, 5))
    breakdown, _ = tae.loss_and_grads(params, X, cfg.topo_weight)
    assert breakdown.total == pytest.approx(
        breakdown.recon + cfg.topo_weight * (breakdown.topo_x_to_z + breakdown.topo_z_to_x),
        rel=1e-12,
    )
    assert breakdown.recon >= 0
    assert breakdown.topo_x_to_z >= 0
    assert breakdown.topo_z_to_x >= 0


def test_train_reduces_reconstruction_without_topo():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(64, 6))
    cfg = tae.TaeConfig(
        hidden=(16,), latent_dim=3, topo_weight=0.0, batch_size=16,
        epochs=40, learning_rate=1e-2, seed=0,
    )
    params, log = tae.train(cfg, X)
    assert len(log) == cfg.epochs
    assert log[-1]["recon"] < 0.5 * log[0]["recon"]
    # invariant holds in the averaged log rows too
    for row in log:
        assert row["total"] == pytest.approx(
            row["recon"] + cfg.topo_weight * (row["topo_x_to_z"] + row["topo_z_to_x"]),
            rel=1e-9, abs=1e-12,
        )


def test_train_reduces_total_with_topo():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(64, 2))
    cfg = tae.TaeConfig(
        hidden=(8,), latent_dim=2, topo_weight=1.0, batch_size=32,
        epochs=60, learning_rate=1e-2, seed=1,
    )
    params, log = tae.train(cfg, X)
    assert log[-1]["total"] < 0.5 * log[0]["total"]


def test_train_bit_identical_across_runs():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(40, 4))
    cfg = tae.TaeConfig(hidden=(6,), latent_dim=2, batch_size=20, epochs=5, seed=9)
    p1, log1 = tae.train(cfg, X)
    p2, log2 = tae.train(cfg, X)
    for a, b in zip(p1.layers, p2.layers):
        assert np.array_equal(a.W, b.W)
        assert np.array_equal(a.b, b.b)
    assert log1 == log2


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_train_diverged_reports_location():
    X = np.full((8, 3), 1e200)
    cfg = tae.TaeConfig(hidden=(4,), latent_dim=2, batch_size=8, epochs=2, seed=0)
    with pytest.raises(TrainingDivergedError) as exc:
        tae.train(cfg, X)
    assert exc.value.epoch == 0
    assert exc.value.batch_index == 0


def test_train_rejects_too_small_dataset():
    with pytest.raises(InvalidArgumentError):
        tae.train(tae.TaeConfig(batch_size=64), np.zeros((10, 3)))


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        tae.TaeConfig(batch_size=1)
    with pytest.raises(InvalidArgumentError):
        tae.TaeConfig(topo_weight=-0.1)
    with pytest.raises(InvalidArgumentError):
        tae.TaeConfig(latent_dim=0)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    X = rng.normal(size=(32, 5))
    cfg = tae.TaeConfig(hidden=(6, 4), latent_dim=2, batch_size=16, epochs=3, seed=4)
    params, log = tae.train(cfg, X)
    path = tmp_path / "model.json"
    tae.save_checkpoint(path, params, cfg, log)
    loaded, cfg2, log2 = tae.load_checkpoint(path)
    assert cfg2 == cfg
    assert log2 == log
    assert loaded.n_encoder_layers == params.n_encoder_layers
    for a, b in zip(params.layers, loaded.layers):
        assert np.array_equal(a.W, b.W)
        assert np.array_equal(a.b, b.b)
        assert a.activation == b.activation
    # loaded params produce identical embeddings
    np.testing.assert_array_equal(tae.encode(params, X), tae.encode(loaded, X))
