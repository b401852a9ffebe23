"""Synthetic many-spheres dataset: generation, splitting, scaling, file IO.

The dataset is a family of small hyperspheres translated to random
centers inside one larger enclosing hypersphere, one manifold label per
sphere (the enclosing sphere gets the last label). All randomness flows
from a single seed so regeneration is bit-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from mapperbench.errors import (
    GenerationError,
    InvalidArgumentError,
    StratificationError,
)

DATASET_SCHEMA_VERSION = 1

# Retries per sphere before giving up on placing its center inside the
# enclosing radius.
_MAX_CENTER_RETRIES = 1000


@dataclass(frozen=True)
class SphereSpec:
    """Geometry and size of the generated sphere family.

    ``center_sigma`` is the per-coordinate standard deviation of the
    Gaussian the small-sphere centers are drawn from. The default
    ``2 * small_radius / sqrt(ambient_dim + 1)`` concentrates center norms
    near ``2 * small_radius``, keeping every small sphere comfortably
    inside the enclosing one.
    """

    ambient_dim: int = 101
    small_sphere_count: int = 10
    small_radius: float = 5.0
    big_radius: float = 25.0
    points_per_sphere: int = 600
    seed: int = 0
    center_sigma: float | None = None

    def __post_init__(self):
        if self.ambient_dim < 2:
            raise InvalidArgumentError("ambient_dim must be >= 2")
        if self.points_per_sphere < 1:
            raise InvalidArgumentError("points_per_sphere must be >= 1")
        if self.small_sphere_count < 0:
            raise InvalidArgumentError("small_sphere_count must be >= 0")
        if not self.big_radius > self.small_radius > 0:
            raise InvalidArgumentError("need big_radius > small_radius > 0")

    @property
    def effective_center_sigma(self) -> float:
        if self.center_sigma is not None:
            return self.center_sigma
        return 2.0 * self.small_radius / math.sqrt(self.ambient_dim + 1)

    @property
    def manifold_count(self) -> int:
        return self.small_sphere_count + 1

    def to_dict(self) -> dict:
        return {
            "ambient_dim": self.ambient_dim,
            "small_sphere_count": self.small_sphere_count,
            "small_radius": self.small_radius,
            "big_radius": self.big_radius,
            "points_per_sphere": self.points_per_sphere,
            "seed": self.seed,
            "center_sigma": self.center_sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SphereSpec":
        return cls(**d)


@dataclass
class LabeledPointCloud:
    """N points with one generating-manifold label each."""

    points: np.ndarray
    labels: np.ndarray
    manifold_count: int

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.points.ndim != 2:
            raise InvalidArgumentError("points must be a 2-d matrix")
        if len(self.labels) != len(self.points):
            raise InvalidArgumentError("labels length must match point count")
        if not np.all(np.isfinite(self.points)):
            raise InvalidArgumentError("points contain non-finite values")
        if len(self.labels) and not (
            self.labels.min() >= 0 and self.labels.max() < self.manifold_count
        ):
            raise InvalidArgumentError("labels out of range [0, manifold_count)")

    def __len__(self):
        return len(self.points)


@dataclass
class Split:
    """Train/test partition plus the scaler fitted on the train side."""

    train: LabeledPointCloud
    test: LabeledPointCloud
    scaler_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scaler_std: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _unit_sphere(rng: np.random.Generator, dim: int, n: int) -> np.ndarray:
    """Uniform samples on the unit sphere: Gaussian draw, normalized."""
    X = rng.standard_normal((n, dim))
    norms = np.linalg.norm(X, axis=1)
    # Degenerate all-zero rows have probability zero but would poison the
    # normalization; redraw them.
    while np.any(norms < 1e-12):
        bad = norms < 1e-12
        X[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(X, axis=1)
    return X / norms[:, None]


def sample_unit_sphere(dim: int, n: int, seed: int) -> np.ndarray:
    """n uniform points on the unit sphere in R^dim."""
    if dim < 1 or n < 1:
        raise InvalidArgumentError("dim and n must be >= 1")
    return _unit_sphere(np.random.default_rng(seed), dim, n)


def _draw_centers(rng: np.random.Generator, spec: SphereSpec) -> np.ndarray:
    """Centers for the small spheres, rejected until strictly inside."""
    limit = spec.big_radius - spec.small_radius
    sigma = spec.effective_center_sigma
    centers = np.zeros((spec.small_sphere_count, spec.ambient_dim))
    for j in range(spec.small_sphere_count):
        for _ in range(_MAX_CENTER_RETRIES):
            c = rng.normal(0.0, sigma, spec.ambient_dim)
            if np.linalg.norm(c) + 0.0 < limit:
                centers[j] = c
                break
        else:
            raise GenerationError(
                f"could not place sphere {j} inside radius {spec.big_radius} "
                f"after {_MAX_CENTER_RETRIES} draws "
                f"(center_sigma={sigma:.4g}, small_radius={spec.small_radius})"
            )
    return centers


def sphere_centers(spec: SphereSpec) -> np.ndarray:
    """Recompute the centers generate_spheres(spec) used, from the seed alone."""
    return _draw_centers(np.random.default_rng(spec.seed), spec)


def generate_spheres(spec: SphereSpec) -> LabeledPointCloud:
    """Sample the full labeled cloud described by ``spec``.

    Points are grouped by sphere: all of sphere 0, then sphere 1, ...,
    then the enclosing sphere (label ``small_sphere_count``).
    """
    rng = np.random.default_rng(spec.seed)
    centers = _draw_centers(rng, spec)
    blocks = []
    labels = []
    for j in range(spec.small_sphere_count):
        pts = centers[j] + spec.small_radius * _unit_sphere(
            rng, spec.ambient_dim, spec.points_per_sphere
        )
        blocks.append(pts)
        labels.append(np.full(spec.points_per_sphere, j))
    blocks.append(
        spec.big_radius * _unit_sphere(rng, spec.ambient_dim, spec.points_per_sphere)
    )
    labels.append(np.full(spec.points_per_sphere, spec.small_sphere_count))
    return LabeledPointCloud(
        points=np.vstack(blocks),
        labels=np.concatenate(labels),
        manifold_count=spec.manifold_count,
    )


def split_and_scale(
    cloud: LabeledPointCloud, test_fraction: float, seed: int
) -> Split:
    """Stratified train/test split, then z-score both sides on train stats.

    Features whose train standard deviation falls below 1e-12 are centered
    but not divided (std treated as 1), so constant columns pass through
    as zeros.
    """
    if not 0.0 < test_fraction < 1.0:
        raise InvalidArgumentError("test_fraction must lie in (0, 1)")
    if len(cloud) < 2:
        raise InvalidArgumentError("need at least 2 points to split")
    rng = np.random.default_rng(seed)
    train_idx = []
    test_idx = []
    for label in range(cloud.manifold_count):
        members = np.flatnonzero(cloud.labels == label)
        if len(members) < 2:
            raise StratificationError(
                f"label {label} has {len(members)} point(s); need >= 2"
            )
        n_test = int(round(test_fraction * len(members)))
        n_test = min(max(n_test, 1), len(members) - 1)
        perm = rng.permutation(len(members))
        test_idx.append(members[perm[:n_test]])
        train_idx.append(members[perm[n_test:]])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))

    train_pts = cloud.points[train_idx]
    mean = train_pts.mean(axis=0)
    std = train_pts.std(axis=0)
    std_safe = np.where(std < 1e-12, 1.0, std)

    def scale(P):
        return (P - mean) / std_safe

    train = LabeledPointCloud(
        scale(train_pts), cloud.labels[train_idx], cloud.manifold_count
    )
    test = LabeledPointCloud(
        scale(cloud.points[test_idx]), cloud.labels[test_idx], cloud.manifold_count
    )
    return Split(train=train, test=test, scaler_mean=mean, scaler_std=std_safe)


# ---------------------------------------------------------------------------
# File formats: CSV per cloud (x0..x{d-1},label) plus one JSON manifest.


def save_cloud_csv(cloud: LabeledPointCloud, path) -> None:
    d = cloud.points.shape[1]
    header = ",".join([f"x{i}" for i in range(d)] + ["label"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row, label in zip(cloud.points, cloud.labels):
            # %.17g round-trips float64 exactly, keeping reruns byte-identical.
            fh.write(",".join("%.17g" % v for v in row))
            fh.write(",%d\n" % label)


def load_cloud_csv(path, manifold_count: int) -> LabeledPointCloud:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return LabeledPointCloud(
        points=data[:, :-1],
        labels=data[:, -1].astype(int),
        manifold_count=manifold_count,
    )


def save_manifest(
    path,
    spec: SphereSpec,
    test_fraction: float,
    split_seed: int,
    split: Split,
    config_echo: dict | None = None,
) -> None:
    doc = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "spec": spec.to_dict(),
        "test_fraction": test_fraction,
        "split_seed": split_seed,
        "scaler": {
            "mean": split.scaler_mean.tolist(),
            "std": split.scaler_std.tolist(),
        },
        "train_count": len(split.train),
        "test_count": len(split.test),
        "manifold_count": spec.manifold_count,
    }
    if config_echo is not None:
        doc["config"] = config_echo
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
