"""Autoencoder with a connectivity-preserving distance loss.

A plain MLP autoencoder (ReLU hidden layers, linear outputs) trained on
mean-squared reconstruction error plus a regularizer that matches
pairwise distances along the minimum-spanning-tree edges of each batch:
the MST of a distance filtration is exactly its zero-dimensional
persistence pairing, so penalizing distance mismatch along the input-MST
and latent-MST edges pushes the encoder to keep the batch's connectivity
structure. The pairings are recomputed per batch and treated as constants
during differentiation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from mapperbench.errors import InvalidArgumentError, TrainingDivergedError
from mapperbench.numerics import minimum_spanning_tree, pairwise_distances

CHECKPOINT_SCHEMA_VERSION = 1


@dataclass
class TaeConfig:
    hidden: tuple[int, ...] = (32, 32)
    latent_dim: int = 2
    topo_weight: float = 1.0
    batch_size: int = 64
    epochs: int = 100
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise InvalidArgumentError("batch_size must be >= 2 (MST needs 2 points)")
        if self.topo_weight < 0:
            raise InvalidArgumentError("topo_weight must be >= 0")
        if self.latent_dim < 1:
            raise InvalidArgumentError("latent_dim must be >= 1")
        if self.epochs < 1:
            raise InvalidArgumentError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "latent_dim": self.latent_dim,
            "topo_weight": self.topo_weight,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaeConfig":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", (32, 32)))
        return cls(**d)


@dataclass
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: str  # "relu" or "identity"


@dataclass
class MlpParams:
    """Encoder layers followed by decoder layers."""

    layers: list[Layer]
    n_encoder_layers: int
    latent_dim: int

    @property
    def input_dim(self) -> int:
        return self.layers[0].W.shape[0]

    def copy(self) -> "MlpParams":
        return MlpParams(
            [Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers],
            self.n_encoder_layers,
            self.latent_dim,
        )


@dataclass
class TopoLossBreakdown:
    recon: float
    topo_x_to_z: float
    topo_z_to_x: float
    total: float


def init_params(input_dim: int, config: TaeConfig) -> MlpParams:
    """Glorot-uniform weights, zero biases, seeded."""
    rng = np.random.default_rng(config.seed)
    enc_dims = [input_dim, *config.hidden, config.latent_dim]
    dec_dims = [config.latent_dim, *reversed(config.hidden), input_dim]
    layers = []
    for dims in (enc_dims, dec_dims):
        for i in range(len(dims) - 1):
            fan_in, fan_out = dims[i], dims[i + 1]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            last = i == len(dims) - 2
            layers.append(Layer(W, np.zeros(fan_out), "identity" if last else "relu"))
    return MlpParams(layers, len(enc_dims) - 1, config.latent_dim)


def _forward_cached(params: MlpParams, X: np.ndarray):
    """Forward pass keeping pre-activations for backprop."""
    acts = [X]
    pres = []
    A = X
    for layer in params.layers:
        S = A @ layer.W + layer.b
        pres.append(S)
        A = np.maximum(S, 0.0) if layer.activation == "relu" else S
        acts.append(A)
    Z = acts[params.n_encoder_layers]
    return Z, A, acts, pres


def forward(params: MlpParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Encode then decode a batch; returns (latent, reconstruction)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise InvalidArgumentError(
            f"batch width {X.shape} does not match input dim {params.input_dim}"
        )
    Z, X_hat, _, _ = _forward_cached(params, X)
    return Z, X_hat


def encode(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """Encoder half of the forward pass."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise InvalidArgumentError(
            f"batch width {X.shape} does not match input dim {params.input_dim}"
        )
    A = X
    for layer in params.layers[: params.n_encoder_layers]:
        S = A @ layer.W + layer.b
        A = np.maximum(S, 0.0) if layer.activation == "relu" else S
    return A


def _mst_pairs(D: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    edges = minimum_spanning_tree(D)
    i = np.array([e[0] for e in edges], dtype=int)
    j = np.array([e[1] for e in edges], dtype=int)
    return i, j


def _topo_terms(X: np.ndarray, Z: np.ndarray):
    """Two directional distance-matching terms and the gradient w.r.t. Z.

    Pairings are the MST edge sets of the input batch and the latent
    batch; both are held fixed while differentiating, so only the latent
    distances carry gradient.
    """
    if len(X) < 2:
        raise InvalidArgumentError("topo loss needs a batch of >= 2 points")
    if len(X) != len(Z):
        raise InvalidArgumentError("X and Z must have the same number of rows")
    DX = pairwise_distances(X)
    DZ = pairwise_distances(Z)
    grad = np.zeros_like(Z)
    terms = []
    for pi, pj in (_mst_pairs(DX), _mst_pairs(DZ)):
        dx = DX[pi, pj]
        dz = DZ[pi, pj]
        diff = dz - dx
        terms.append(0.5 * float(np.dot(diff, diff)))
        # d||z_i - z_j|| / dz_i = (z_i - z_j) / d_z; zero-length latent
        # edges get a zero subgradient.
        delta = Z[pi] - Z[pj]
        safe = np.where(dz < 1e-30, 1.0, dz)
        coeff = np.where(dz < 1e-30, 0.0, diff / safe)
        contrib = coeff[:, None] * delta
        np.add.at(grad, pi, contrib)
        np.add.at(grad, pj, -contrib)
    return terms[0], terms[1], grad


def topo_loss(X: np.ndarray, Z: np.ndarray) -> tuple[float, np.ndarray]:
    """Distance-mismatch loss along both MST pairings and its Z-gradient."""
    t_xz, t_zx, grad = _topo_terms(np.asarray(X, float), np.asarray(Z, float))
    return t_xz + t_zx, grad


def _backward(params: MlpParams, acts, pres, dOut, dZ_extra):
    """Backprop dOut through the net, injecting dZ_extra at the latent layer.

    Returns per-layer (dW, db) in layer order.
    """
    grads = [None] * len(params.layers)
    dA = dOut
    for li in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[li]
        if li + 1 == params.n_encoder_layers and dZ_extra is not None:
            dA = dA + dZ_extra
        if layer.activation == "relu":
            dS = dA * (pres[li] > 0)
        else:
            dS = dA
        grads[li] = (acts[li].T @ dS, dS.sum(axis=0))
        dA = dS @ layer.W.T
    return grads


def loss_and_grads(params: MlpParams, X: np.ndarray, topo_weight: float):
    """Total loss breakdown plus gradients for every layer."""
    Z, X_hat, acts, pres = _forward_cached(params, X)
    n, d = X.shape
    resid = X_hat - X
    recon = float(np.mean(resid**2))
    t_xz, t_zx, dZ_topo = _topo_terms(X, Z)
    total = recon + topo_weight * (t_xz + t_zx)
    dX_hat = 2.0 * resid / (n * d)
    grads = _backward(params, acts, pres, dX_hat, topo_weight * dZ_topo)
    breakdown = TopoLossBreakdown(recon, t_xz, t_zx, total)
    return breakdown, grads


def total_loss(params: MlpParams, X: np.ndarray, topo_weight: float) -> float:
    """Loss value alone; used by finite-difference checks."""
    Z, X_hat, _, _ = _forward_cached(params, X)
    recon = float(np.mean((X_hat - X) ** 2))
    t_xz, t_zx, _ = _topo_terms(X, Z)
    return recon + topo_weight * (t_xz + t_zx)


def train(config: TaeConfig, train_data: np.ndarray):
    """Minibatch Adam over reconstruction + weighted topo loss.

    Shuffling is seeded, so a fixed config gives bit-identical parameters.
    Returns (params, per-epoch loss log). Raises TrainingDivergedError on
    the first non-finite loss, reporting where it happened.
    """
    X = np.asarray(train_data, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError("train_data must be a 2-d matrix")
    n = len(X)
    if n < config.batch_size:
        raise InvalidArgumentError(
            f"train_data has {n} rows, fewer than batch_size={config.batch_size}"
        )
    params = init_params(X.shape[1], config)
    rng = np.random.default_rng(config.seed)

    m_state = [
        (np.zeros_like(l.W), np.zeros_like(l.b)) for l in params.layers
    ]
    v_state = [
        (np.zeros_like(l.W), np.zeros_like(l.b)) for l in params.layers
    ]
    step = 0
    log = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        sums = np.zeros(4)
        batches = 0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            if len(idx) < 2:
                continue  # an MST needs at least two points
            batch = X[idx]
            breakdown, grads = loss_and_grads(params, batch, config.topo_weight)
            if not np.isfinite(breakdown.total):
                raise TrainingDivergedError(epoch, batches, breakdown)
            step += 1
            bc1 = 1.0 - config.beta1**step
            bc2 = 1.0 - config.beta2**step
            for layer, (dW, db), mom, var in zip(
                params.layers, grads, m_state, v_state
            ):
                mW, mb = mom
                vW, vb = var
                mW *= config.beta1
                mW += (1 - config.beta1) * dW
                mb *= config.beta1
                mb += (1 - config.beta1) * db
                vW *= config.beta2
                vW += (1 - config.beta2) * dW**2
                vb *= config.beta2
                vb += (1 - config.beta2) * db**2
                layer.W -= config.learning_rate * (mW / bc1) / (
                    np.sqrt(vW / bc2) + config.adam_eps
                )
                layer.b -= config.learning_rate * (mb / bc1) / (
                    np.sqrt(vb / bc2) + config.adam_eps
                )
            sums += (
                breakdown.recon,
                breakdown.topo_x_to_z,
                breakdown.topo_z_to_x,
                breakdown.total,
            )
            batches += 1
        avg = sums / max(batches, 1)
        log.append(
            {
                "epoch": epoch,
                "recon": avg[0],
                "topo_x_to_z": avg[1],
                "topo_z_to_x": avg[2],
                "total": avg[3],
            }
        )
    return params, log


# ---------------------------------------------------------------------------
# Checkpoints: self-describing JSON with shapes, row-major weights and the
# training config echo.


def save_checkpoint(path, params: MlpParams, config: TaeConfig, log) -> None:
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "latent_dim": params.latent_dim,
        "n_encoder_layers": params.n_encoder_layers,
        "layers": [
            {
                "shape": list(l.W.shape),
                "weights": l.W.ravel().tolist(),
                "bias": l.b.tolist(),
                "activation": l.activation,
            }
            for l in params.layers
        ],
        "config": config.to_dict(),
        "loss_log": log,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> tuple[MlpParams, TaeConfig, list]:
    with open(path) as fh:
        doc = json.load(fh)
    layers = [
        Layer(
            np.array(l["weights"], dtype=float).reshape(l["shape"]),
            np.array(l["bias"], dtype=float),
            l["activation"],
        )
        for l in doc["layers"]
    ]
    params = MlpParams(layers, doc["n_encoder_layers"], doc["latent_dim"])
    return params, TaeConfig.from_dict(doc["config"]), doc.get("loss_log", [])
