"""Filter-function catalog mapping R^d point clouds to low dimension.

Six filters behind one fit/transform contract: PCA (centered top-k
eigenprojection), SVD (uncentered right singular vectors), eccentricity
(max distance to the fitted reference set), Gaussian kernel log-density,
exact t-SNE, and the autoencoder from the tae module. All are
deterministic given their spec, including seeds.

t-SNE has no out-of-sample extension, so its fit embeds train plus an
aux matrix jointly and transform looks rows up by content; every other
filter maps unseen points directly.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from mapperbench import tae as tae_mod
from mapperbench.errors import (
    ConvergenceError,
    InvalidArgumentError,
    OutOfSampleError,
)
from mapperbench.numerics import pairwise_distances, svd_topk, sym_eig_topk

MODEL_SCHEMA_VERSION = 1

FILTER_KINDS = ("pca", "svd", "eccentricity", "kernel_density", "tsne", "tae")

# latent_dim = 1 is forced for the two scalar filters
_SCALAR_KINDS = ("eccentricity", "kernel_density")
_DEFAULT_LATENT = {k: 1 if k in _SCALAR_KINDS else 2 for k in FILTER_KINDS}


@dataclass
class FilterSpec:
    kind: str
    latent_dim: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise InvalidArgumentError(
                f"unknown filter kind {self.kind!r}; expected one of {FILTER_KINDS}"
            )
        if self.latent_dim is None:
            self.latent_dim = _DEFAULT_LATENT[self.kind]
        if self.latent_dim < 1:
            raise InvalidArgumentError("latent_dim must be >= 1")
        if self.kind in _SCALAR_KINDS and self.latent_dim != 1:
            raise InvalidArgumentError(f"{self.kind} filter is scalar; latent_dim must be 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "latent_dim": self.latent_dim, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        return cls(d["kind"], d.get("latent_dim"), dict(d.get("params", {})))


@dataclass
class FilterModel:
    spec: FilterSpec
    out_of_sample: bool
    state: dict

    @property
    def kind(self) -> str:
        return self.spec.kind


def _row_key(row: np.ndarray) -> str:
    """Content key for t-SNE lookup: bytes of the float64 row."""
    return hashlib.sha1(np.ascontiguousarray(row, dtype=float).tobytes()).hexdigest()


def fit(spec: FilterSpec, train: np.ndarray, aux: np.ndarray | None = None) -> FilterModel:
    """Fit a filter on the training matrix.

    For t-SNE, aux must carry every other point that will ever be
    transformed: the joint embedding of train and aux is computed here
    and transform only looks rows up.
    """
    train = np.asarray(train, dtype=float)
    if train.ndim != 2 or len(train) == 0:
        raise InvalidArgumentError("train must be a nonempty 2-d matrix")
    d = train.shape[1]
    if spec.latent_dim >= d:
        raise InvalidArgumentError(
            f"latent_dim {spec.latent_dim} must be < data dimension {d}"
        )

    kind = spec.kind
    if kind == "pca":
        mean = train.mean(axis=0)
        centered = train - mean
        cov = centered.T @ centered / max(len(train) - 1, 1)
        eigvals, basis = sym_eig_topk(cov, spec.latent_dim)
        state = {"mean": mean, "basis": basis, "eigvals": eigvals}
    elif kind == "svd":
        sigma, basis = svd_topk(train, spec.latent_dim)
        state = {"basis": basis, "singular_values": sigma}
    elif kind == "eccentricity":
        state = {"reference": train.copy()}
    elif kind == "kernel_density":
        bandwidth = float(spec.params.get("bandwidth", 1.0))
        if bandwidth <= 0:
            raise InvalidArgumentError("kde bandwidth must be > 0")
        state = {"reference": train.copy(), "bandwidth": bandwidth}
    elif kind == "tsne":
        if aux is None:
            raise InvalidArgumentError(
                "tsne has no out-of-sample map; pass every point to embed via aux"
            )
        aux = np.asarray(aux, dtype=float)
        if aux.size and aux.shape[1] != d:
            raise InvalidArgumentError("aux width must match train width")
        joint = np.vstack([train, aux]) if aux.size else train.copy()
        embedding = tsne_embed(
            joint,
            perplexity=float(spec.params.get("perplexity", 30.0)),
            iters=int(spec.params.get("iters", 1000)),
            lr=float(spec.params.get("lr", 200.0)),
            seed=int(spec.params.get("seed", 0)),
            out_dim=spec.latent_dim,
        )
        keys = [_row_key(r) for r in joint]
        state = {"keys": keys, "embedding": embedding}
    else:  # tae
        config = tae_mod.TaeConfig.from_dict(
            {**spec.params.get("config", {}), "latent_dim": spec.latent_dim}
        )
        params, log = tae_mod.train(config, train)
        state = {"params": params, "config": config, "loss_log": log}
    return FilterModel(spec, out_of_sample=kind != "tsne", state=state)


def transform(model: FilterModel, X: np.ndarray) -> np.ndarray:
    """Map points through the fitted filter; output is n x latent_dim."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError("X must be a 2-d matrix")
    kind = model.kind
    state = model.state
    if kind == "pca":
        return (X - state["mean"]) @ state["basis"]
    if kind == "svd":
        return X @ state["basis"]
    if kind == "eccentricity":
        ref = state["reference"]
        out = np.empty((len(X), 1))
        for start in range(0, len(X), 512):
            block = X[start : start + 512]
            sq = (
                (block**2).sum(1)[:, None]
                + (ref**2).sum(1)[None, :]
                - 2.0 * block @ ref.T
            )
            np.maximum(sq, 0.0, out=sq)
            out[start : start + 512, 0] = np.sqrt(sq.max(axis=1))
        return out
    if kind == "kernel_density":
        ref = state["reference"]
        eps = state["bandwidth"]
        n_ref, d = ref.shape
        const = -np.log(n_ref) - 0.5 * d * np.log(2.0 * np.pi * eps * eps)
        out = np.empty((len(X), 1))
        for start in range(0, len(X), 512):
            block = X[start : start + 512]
            sq = (
                (block**2).sum(1)[:, None]
                + (ref**2).sum(1)[None, :]
                - 2.0 * block @ ref.T
            )
            np.maximum(sq, 0.0, out=sq)
            out[start : start + 512, 0] = logsumexp(-sq / (2.0 * eps * eps), axis=1)
        return out + const
    if kind == "tsne":
        index = {k: i for i, k in enumerate(state["keys"])}
        rows = []
        for r, row in enumerate(X):
            key = _row_key(row)
            if key not in index:
                raise OutOfSampleError(
                    f"row {r} was not part of the joint t-SNE embedding"
                )
            rows.append(index[key])
        return np.asarray(state["embedding"])[rows].copy()
    # tae
    return tae_mod.encode(state["params"], X)


# ---------------------------------------------------------------------------
# Exact t-SNE


def _conditional_p(X: np.ndarray, perplexity: float, max_iter: int = 64):
    """Per-point conditional Gaussians with entropy 2^H = perplexity.

    Binary search on each precision beta until the row entropy matches
    log(perplexity) within 1e-5 * ln 2 (i.e. 1e-5 bits).
    """
    n = len(X)
    sq = (
        (X**2).sum(1)[:, None] + (X**2).sum(1)[None, :] - 2.0 * X @ X.T
    )
    np.maximum(sq, 0.0, out=sq)
    target = np.log(perplexity)
    tol = 1e-5 * np.log(2.0)
    P = np.zeros((n, n))
    for i in range(n):
        di = np.delete(sq[i], i)
        shifted = di - di.min()  # keeps exp() away from total underflow
        beta, lo, hi = 1.0, None, None
        for _ in range(max_iter):
            p = np.exp(-beta * shifted)
            s = p.sum()
            h = np.log(s) + beta * float(shifted @ p) / s
            diff = h - target
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi is None else 0.5 * (lo + hi)
            else:
                hi = beta
                beta = beta / 2.0 if lo is None else 0.5 * (lo + hi)
        else:
            raise ConvergenceError(
                f"perplexity calibration for point {i} did not reach "
                f"|H - log perplexity| < {tol:g} in {max_iter} steps"
            )
        row = np.insert(p / s, i, 0.0)
        P[i] = row
    return P


def tsne_embed(
    X: np.ndarray,
    perplexity: float,
    iters: int,
    lr: float,
    seed: int,
    out_dim: int = 2,
    early_exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    return_history: bool = False,
):
    """Exact t-SNE by full-gradient descent.

    Symmetrized P from perplexity-calibrated conditionals, Student-t Q,
    early exaggeration for the first phase, momentum 0.5 then 0.8, and
    the standard per-coordinate gain schedule. Deterministic per seed.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    if n < 10:
        raise InvalidArgumentError("t-SNE needs at least 10 points")
    if not (5.0 <= perplexity <= (n - 1) / 3.0):
        raise InvalidArgumentError(
            f"perplexity {perplexity} outside [5, (n-1)/3] = [5, {(n - 1) / 3:.2f}]"
        )
    P_cond = _conditional_p(X, perplexity)
    P = (P_cond + P_cond.T) / (2.0 * n)

    rng = np.random.default_rng(seed)
    Y = 1e-4 * rng.standard_normal((n, out_dim))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    exaggeration_iters = min(exaggeration_iters, iters)
    history = []
    for t in range(iters):
        sq = (
            (Y**2).sum(1)[:, None] + (Y**2).sum(1)[None, :] - 2.0 * Y @ Y.T
        )
        num = 1.0 / (1.0 + np.maximum(sq, 0.0))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-12)
        p_eff = P * early_exaggeration if t < exaggeration_iters else P
        W = (p_eff - Q) * num
        grad = 4.0 * (W.sum(1)[:, None] * Y - W @ Y)
        momentum = 0.5 if t < exaggeration_iters else 0.8
        flip = (grad > 0) != (update > 0)
        gains = np.where(flip, gains + 0.2, gains * 0.8)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - lr * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
        if return_history:
            mask = P > 0
            history.append(float(np.sum(P[mask] * (np.log(P[mask]) - np.log(Q[mask])))))
    if return_history:
        return Y, history
    return Y


# ---------------------------------------------------------------------------
# Model files: versioned JSON; the TAE keeps its weights in a separate
# checkpoint file referenced by relative path.


def save_model(path, model: FilterModel) -> None:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "spec": model.spec.to_dict(),
        "out_of_sample": model.out_of_sample,
    }
    kind = model.kind
    state = model.state
    if kind == "pca":
        doc["state"] = {
            "mean": state["mean"].tolist(),
            "basis": state["basis"].tolist(),
            "eigvals": state["eigvals"].tolist(),
        }
    elif kind == "svd":
        doc["state"] = {
            "basis": state["basis"].tolist(),
            "singular_values": state["singular_values"].tolist(),
        }
    elif kind in _SCALAR_KINDS:
        doc["state"] = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in state.items()}
    elif kind == "tsne":
        doc["state"] = {"keys": state["keys"], "embedding": np.asarray(state["embedding"]).tolist()}
    else:  # tae: weights go to a sibling checkpoint file
        checkpoint = os.path.splitext(str(path))[0] + "_checkpoint.json"
        tae_mod.save_checkpoint(checkpoint, state["params"], state["config"], state["loss_log"])
        doc["state"] = {
            "checkpoint": os.path.relpath(checkpoint, os.path.dirname(str(path)) or ".")
        }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> FilterModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise InvalidArgumentError(
            f"unsupported model schema_version {doc.get('schema_version')!r}"
        )
    spec = FilterSpec.from_dict(doc["spec"])
    raw = doc["state"]
    kind = spec.kind
    if kind == "pca":
        state = {
            "mean": np.array(raw["mean"], dtype=float),
            "basis": np.array(raw["basis"], dtype=float),
            "eigvals": np.array(raw["eigvals"], dtype=float),
        }
    elif kind == "svd":
        state = {
            "basis": np.array(raw["basis"], dtype=float),
            "singular_values": np.array(raw["singular_values"], dtype=float),
        }
    elif kind == "eccentricity":
        state = {"reference": np.array(raw["reference"], dtype=float)}
    elif kind == "kernel_density":
        state = {
            "reference": np.array(raw["reference"], dtype=float),
            "bandwidth": float(raw["bandwidth"]),
        }
    elif kind == "tsne":
        state = {
            "keys": list(raw["keys"]),
            "embedding": np.array(raw["embedding"], dtype=float),
        }
    else:
        checkpoint = os.path.join(os.path.dirname(str(path)) or ".", raw["checkpoint"])
        params, config, log = tae_mod.load_checkpoint(checkpoint)
        state = {"params": params, "config": config, "loss_log": log}
    return FilterModel(spec, out_of_sample=kind != "tsne", state=state)
