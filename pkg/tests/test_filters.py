"""Tests for the filter catalog and the exact t-SNE implementation."""

import numpy as np
import pytest

from mapperbench import filters
from mapperbench.errors import InvalidArgumentError, OutOfSampleError


def _blobs(n_per, centers, spread, seed, dim=4):
    rng = np.random.default_rng(seed)
    chunks, labels = [], []
    for k, c in enumerate(centers):
        center = np.zeros(dim)
        center[: len(c)] = c
        chunks.append(center + spread * rng.normal(size=(n_per, dim)))
        labels.extend([k] * n_per)
    return np.vstack(chunks), np.array(labels)


def test_spec_defaults_and_validation():
    assert filters.FilterSpec("pca").latent_dim == 2
    assert filters.FilterSpec("eccentricity").latent_dim == 1
    assert filters.FilterSpec("kernel_density").latent_dim == 1
    with pytest.raises(InvalidArgumentError):
        filters.FilterSpec("umap")
    with pytest.raises(InvalidArgumentError):
        filters.FilterSpec("eccentricity", latent_dim=2)
    with pytest.raises(InvalidArgumentError):
        filters.FilterSpec("pca", latent_dim=0)


def test_fit_rejects_latent_dim_not_below_data_dim():
    X = np.random.default_rng(0).normal(size=(20, 3))
    with pytest.raises(InvalidArgumentError):
        filters.fit(filters.FilterSpec("pca", latent_dim=3), X)
    with pytest.raises(InvalidArgumentError):
        filters.fit(filters.FilterSpec("pca", latent_dim=4), X)


def test_pca_projection_variances_match_top_eigenvalues():
    rng = np.random.default_rng(1)
    # anisotropic cloud so the spectrum is well separated
    X = rng.normal(size=(300, 6)) * np.array([5.0, 3.0, 1.0, 0.5, 0.2, 0.1])
    model = filters.fit(filters.FilterSpec("pca", latent_dim=2), X)
    Y = filters.transform(model, X)
    proj_var = Y.var(axis=0, ddof=1)
    np.testing.assert_allclose(proj_var, model.state["eigvals"], rtol=1e-6)
    assert proj_var[0] >= proj_var[1]


def test_pca_collinear_data_second_column_flat():
    rng = np.random.default_rng(2)
    t = rng.normal(size=200)
    X = np.column_stack([3.0 * t + 1.0, -2.0 * t + 5.0, 0.0 * t])
    model = filters.fit(filters.FilterSpec("pca", latent_dim=2), X)
    Y = filters.transform(model, X)
    assert Y[:, 1].var() < 1e-10


def test_pca_translation_invariance_of_embedded_train():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 4))
    shift = np.array([10.0, -4.0, 0.5, 2.0])
    a = filters.fit(filters.FilterSpec("pca"), X)
    b = filters.fit(filters.FilterSpec("pca"), X + shift)
    np.testing.assert_allclose(
        filters.transform(a, X), filters.transform(b, X + shift), atol=1e-9
    )


def test_svd_is_uncentered_projection():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(40, 5)) + 7.0  # large mean distinguishes svd from pca
    model = filters.fit(filters.FilterSpec("svd", latent_dim=2), X)
    V = model.state["basis"]
    np.testing.assert_allclose(filters.transform(model, X), X @ V, atol=1e-12)
    # top singular direction of far-offset data is close to the mean direction
    mean_dir = X.mean(0) / np.linalg.norm(X.mean(0))
    assert abs(float(V[:, 0] @ mean_dir)) > 0.99


def test_eccentricity_reference_stored_and_max_distance():
    # symmetric set: vertices of a square plus its centroid
    square = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]])
    model = filters.fit(filters.FilterSpec("eccentricity"), square)
    assert len(model.state["reference"]) == len(square)
    vals = filters.transform(model, square)
    assert vals.shape == (5, 1)
    # centroid sees max distance 1; each vertex sees the opposite vertex at 2
    assert vals[4, 0] == pytest.approx(1.0)
    np.testing.assert_allclose(vals[:4, 0], 2.0)


def test_eccentricity_isometry_invariance():
    rng = np.random.default_rng(5)
    ref = rng.normal(size=(30, 3))
    X = rng.normal(size=(10, 3))
    base = filters.transform(filters.fit(filters.FilterSpec("eccentricity"), ref), X)
    perm = rng.permutation(30)
    permuted = filters.transform(
        filters.fit(filters.FilterSpec("eccentricity"), ref[perm]), X
    )
    np.testing.assert_array_equal(base, permuted)
    shift = np.array([4.0, -1.0, 0.25])
    translated = filters.transform(
        filters.fit(filters.FilterSpec("eccentricity"), ref + shift), X + shift
    )
    np.testing.assert_allclose(base, translated, atol=1e-9)


def test_kde_far_point_has_lower_log_density():
    rng = np.random.default_rng(6)
    ref = rng.normal(size=(50, 3))
    model = filters.fit(filters.FilterSpec("kernel_density"), ref)
    near = ref.mean(0)[None, :]
    far = near + 100.0
    v_near = filters.transform(model, near)[0, 0]
    v_far = filters.transform(model, far)[0, 0]
    assert v_far < v_near


def test_kde_duplicate_reference_point_raises_density_there():
    rng = np.random.default_rng(7)
    ref = rng.normal(size=(20, 3))
    p = ref[3][None, :]
    base = filters.transform(filters.fit(filters.FilterSpec("kernel_density"), ref), p)
    more = filters.transform(
        filters.fit(filters.FilterSpec("kernel_density"), np.vstack([ref, p])), p
    )
    assert more[0, 0] > base[0, 0]


def test_kde_matches_direct_small_case():
    ref = np.array([[0.0, 0.0], [1.0, 0.5], [3.0, -1.0]])
    eps = 0.7
    model = filters.fit(
        filters.FilterSpec("kernel_density", params={"bandwidth": eps}), ref
    )
    x = np.array([[0.5, 0.25]])
    sq = ((x - ref) ** 2).sum(axis=1)
    direct = np.log(np.mean(np.exp(-sq / (2 * eps**2))) / (2 * np.pi * eps**2))
    assert filters.transform(model, x)[0, 0] == pytest.approx(direct, rel=1e-12)


def test_kde_rejects_nonpositive_bandwidth():
    X = np.random.default_rng(8).normal(size=(10, 3))
    with pytest.raises(InvalidArgumentError):
        filters.fit(filters.FilterSpec("kernel_density", params={"bandwidth": 0.0}), X)


def test_transform_shapes_all_kinds():
    rng = np.random.default_rng(9)
    train = rng.normal(size=(40, 6))
    test = rng.normal(size=(15, 6))
    for kind in ("pca", "svd", "eccentricity", "kernel_density"):
        model = filters.fit(filters.FilterSpec(kind), train)
        out = filters.transform(model, test)
        assert out.shape == (15, model.spec.latent_dim)
        assert model.out_of_sample
    tae_spec = filters.FilterSpec(
        "tae", params={"config": {"hidden": [8], "epochs": 2, "batch_size": 16, "seed": 0}}
    )
    model = filters.fit(tae_spec, train)
    assert filters.transform(model, test).shape == (15, 2)
    tsne_spec = filters.FilterSpec("tsne", params={"perplexity": 6.0, "iters": 30})
    model = filters.fit(tsne_spec, train, aux=test)
    assert not model.out_of_sample
    assert filters.transform(model, test).shape == (15, 2)


def test_tsne_requires_aux():
    X = np.random.default_rng(10).normal(size=(30, 4))
    with pytest.raises(InvalidArgumentError):
        filters.fit(filters.FilterSpec("tsne"), X)


def test_tsne_lookup_miss_is_out_of_sample_error():
    rng = np.random.default_rng(11)
    train = rng.normal(size=(25, 4))
    aux = rng.normal(size=(5, 4))
    model = filters.fit(
        filters.FilterSpec("tsne", params={"perplexity": 5.0, "iters": 20}), train, aux
    )
    filters.transform(model, aux)  # present rows resolve
    with pytest.raises(OutOfSampleError):
        filters.transform(model, rng.normal(size=(1, 4)))


def test_conditional_p_rows_sum_to_one():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(40, 3))
    P = filters._conditional_p(X, perplexity=8.0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(np.diag(P) == 0.0)
    # entropy of each row matches the perplexity target
    logP = np.log(np.where(P > 0, P, 1.0))
    H = -np.sum(P * logP, axis=1)
    np.testing.assert_allclose(H, np.log(8.0), atol=1e-5 * np.log(2))


def test_tsne_perplexity_range_enforced():
    X = np.random.default_rng(13).normal(size=(30, 3))
    with pytest.raises(InvalidArgumentError):
        filters.tsne_embed(X, perplexity=4.0, iters=10, lr=200.0, seed=0)
    with pytest.raises(InvalidArgumentError):
        filters.tsne_embed(X, perplexity=11.0, iters=10, lr=200.0, seed=0)
    with pytest.raises(InvalidArgumentError):
        filters.tsne_embed(X[:9], perplexity=5.0, iters=10, lr=200.0, seed=0)


def test_tsne_separates_two_blobs():
    X, labels = _blobs(30, [(-6.0,), (6.0,)], spread=0.7, seed=14)
    Y = filters.tsne_embed(X, perplexity=10.0, iters=400, lr=10.0, seed=0)
    c0 = Y[labels == 0].mean(0)
    c1 = Y[labels == 1].mean(0)
    axis = c1 - c0
    proj = Y @ axis
    assert proj[labels == 0].max() < proj[labels == 1].min()


def test_tsne_kl_non_increasing_after_exaggeration():
    X, _ = _blobs(30, [(-6.0,), (6.0,)], spread=0.7, seed=15)
    Y, history = filters.tsne_embed(
        X, perplexity=10.0, iters=400, lr=5.0, seed=0, return_history=True
    )
    assert len(history) == 400
    tail = history[-50:]
    for a, b in zip(tail, tail[1:]):
        assert b <= a + 1e-6


def test_tsne_deterministic():
    X, _ = _blobs(15, [(-3.0,), (3.0,)], spread=1.0, seed=16)
    a = filters.tsne_embed(X, perplexity=7.0, iters=60, lr=200.0, seed=5)
    b = filters.tsne_embed(X, perplexity=7.0, iters=60, lr=200.0, seed=5)
    np.testing.assert_array_equal(a, b)


def test_model_round_trip_all_kinds(tmp_path):
    rng = np.random.default_rng(17)
    train = rng.normal(size=(32, 5))
    test = rng.normal(size=(8, 5))
    specs = [
        filters.FilterSpec("pca"),
        filters.FilterSpec("svd"),
        filters.FilterSpec("eccentricity"),
        filters.FilterSpec("kernel_density", params={"bandwidth": 0.8}),
        filters.FilterSpec("tsne", params={"perplexity": 5.0, "iters": 25}),
        filters.FilterSpec(
            "tae", params={"config": {"hidden": [6], "epochs": 2, "batch_size": 16, "seed": 1}}
        ),
    ]
    for spec in specs:
        model = filters.fit(spec, train, aux=test if spec.kind == "tsne" else None)
        path = tmp_path / f"{spec.kind}.json"
        filters.save_model(path, model)
        loaded = filters.load_model(path)
        assert loaded.spec == model.spec
        assert loaded.out_of_sample == model.out_of_sample
        np.testing.assert_array_equal(
            filters.transform(model, test), filters.transform(loaded, test)
        )


def test_fit_and_transform_deterministic():
    rng = np.random.default_rng(18)
    train = rng.normal(size=(40, 5))
    test = rng.normal(size=(10, 5))
    for kind in ("pca", "svd", "eccentricity", "kernel_density"):
        a = filters.transform(filters.fit(filters.FilterSpec(kind), train), test)
        b = filters.transform(filters.fit(filters.FilterSpec(kind), train), test)
        np.testing.assert_array_equal(a, b)
