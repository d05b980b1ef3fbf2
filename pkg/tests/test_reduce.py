"""Subspace reducers: PCA, kernel PCA, LDA, and discriminant common vectors."""
import numpy as np
import pytest

from xrayscreen.kernels import KernelSpec, kernel_matrix
from xrayscreen.reduce import (DegenerateDataError, EmptyNullSpaceError,
                               LabeledMatrix, RankError, ReduceError,
                               ShapeMismatchError, SingularScatterError,
                               UndefinedBetweenScatterError, back_project,
                               fit_dcv, fit_kpca, fit_lda, fit_pca, load_model,
                               project, save_model, separability_index,
                               top_components)


def blobs(rng, centers, per_class=6, spread=0.3, dims=None):
    """Gaussian class blobs around the given centers."""
    centers = np.asarray(centers, dtype=np.float64)
    if dims is not None and dims > centers.shape[1]:
        pad = np.zeros((centers.shape[0], dims - centers.shape[1]))
        centers = np.hstack([centers, pad])
    rows, labels = [], []
    for ci, c in enumerate(centers):
        rows.append(c + spread * rng.normal(size=(per_class, centers.shape[1])))
        labels.extend([f"class{ci}"] * per_class)
    return LabeledMatrix(rows=np.vstack(rows), labels=labels)


def align_signs(a, b):
    """Flip columns of ``b`` to match the sign pattern of ``a``."""
    flipped = b.copy()
    for j in range(a.shape[1]):
        i = np.argmax(np.abs(a[:, j]))
        if np.sign(a[i, j]) != np.sign(flipped[i, j]):
            flipped[:, j] *= -1.0
    return flipped


# --- labeled matrix -------------------------------------------------------------


def test_labeled_matrix_validation(rng):
    with pytest.raises(ValueError):
        LabeledMatrix(rows=rng.normal(size=(3, 2)), labels=["a", "b"])
    with pytest.raises(ValueError):
        LabeledMatrix(rows=rng.normal(size=3), labels=["a", "b", "c"])
    lm = LabeledMatrix(rows=rng.normal(size=(4, 2)), labels=["b", "a", "b", "a"])
    assert lm.classes == ["a", "b"]
    idx = lm.class_indices()
    assert list(idx["a"]) == [1, 3]


# --- PCA -------------------------------------------------------------------------


def test_pca_matches_covariance_eigendecomposition(rng):
    X = rng.normal(size=(40, 5))
    lm = LabeledMatrix(rows=X, labels=["x"] * 40)
    model = fit_pca(lm, variance_kept=1.0)
    cov = np.cov(X, rowvar=False, ddof=1)
    ref_vals = np.sort(np.linalg.eigvalsh(cov))[::-1]
    np.testing.assert_allclose(model.eigenvalues, ref_vals[:model.output_dim],
                               rtol=1e-10)
    # Projections reproduce the per-component sample variances.
    proj_var = model.fitted.var(axis=0, ddof=1)
    np.testing.assert_allclose(proj_var, model.eigenvalues, rtol=1e-10)


def test_pca_variance_kept_truncates(rng):
    # Three orthogonal directions with variances dominated by the first two.
    U = np.linalg.qr(rng.normal(size=(30, 3)))[0]
    X = U @ np.diag([50.0, 20.0, 1e-4]) @ np.linalg.qr(rng.normal(size=(3, 3)))[0]
    lm = LabeledMatrix(rows=X, labels=["x"] * 30)
    assert fit_pca(lm, variance_kept=0.99).output_dim == 2
    assert fit_pca(lm, variance_kept=1.0).output_dim == 3


def test_pca_gram_trick_for_wide_data(rng):
    X = rng.normal(size=(10, 200))
    lm = LabeledMatrix(rows=X, labels=["x"] * 10)
    model = fit_pca(lm, variance_kept=1.0)
    assert model.output_dim <= 9
    centered = X - X.mean(axis=0)
    U, S, _ = np.linalg.svd(centered, full_matrices=False)
    scores = U[:, :model.output_dim] * S[:model.output_dim]
    np.testing.assert_allclose(np.abs(model.fitted), np.abs(scores), atol=1e-8)
    np.testing.assert_allclose(model.eigenvalues,
                               (S[:model.output_dim] ** 2) / 9.0, rtol=1e-10)


def test_pca_basis_is_orthonormal_and_sign_fixed(rng):
    X = rng.normal(size=(25, 6))
    model = fit_pca(LabeledMatrix(rows=X, labels=["x"] * 25), variance_kept=1.0)
    gram = model.basis.T @ model.basis
    np.testing.assert_allclose(gram, np.eye(model.output_dim), atol=1e-10)
    picks = np.argmax(np.abs(model.basis), axis=0)
    assert np.all(model.basis[picks, np.arange(model.output_dim)] > 0.0)


def test_pca_round_trip_reconstruction(rng):
    X = rng.normal(size=(20, 4))
    model = fit_pca(LabeledMatrix(rows=X, labels=["x"] * 20), variance_kept=1.0)
    np.testing.assert_allclose(back_project(model, project(model, X)), X,
                               atol=1e-10)


def test_pca_degenerate_and_invalid_inputs(rng):
    with pytest.raises(DegenerateDataError):
        fit_pca(LabeledMatrix(rows=np.ones((5, 3)), labels=["x"] * 5))
    lm = LabeledMatrix(rows=rng.normal(size=(5, 3)), labels=["x"] * 5)
    with pytest.raises(ValueError):
        fit_pca(lm, variance_kept=0.0)
    with pytest.raises(ValueError):
        fit_pca(LabeledMatrix(rows=rng.normal(size=(1, 3)), labels=["x"]))


# --- kernel PCA --------------------------------------------------------------------


def test_linear_kpca_agrees_with_pca(rng):
    X = rng.normal(size=(20, 6))
    lm = LabeledMatrix(rows=X, labels=["x"] * 20)
    pca = fit_pca(lm, variance_kept=1.0)
    kpca = fit_kpca(lm, kernel=KernelSpec("linear"), n_components=3)
    aligned = align_signs(pca.fitted[:, :3], kpca.fitted)
    np.testing.assert_allclose(aligned, pca.fitted[:, :3], atol=1e-8)


def test_kpca_matches_explicit_double_centering(rng):
    X = rng.normal(size=(12, 4))
    lm = LabeledMatrix(rows=X, labels=["x"] * 12)
    spec = KernelSpec("rbf", gamma=0.4)
    model = fit_kpca(lm, kernel=spec, n_components=3)
    K = kernel_matrix(spec, X, X)
    n = len(X)
    ones = np.full((n, n), 1.0 / n)
    Kc = K - ones @ K - K @ ones + ones @ K @ ones
    vals, vecs = np.linalg.eigh(Kc)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    scores = vecs[:, :3] * np.sqrt(vals[:3])
    np.testing.assert_allclose(np.abs(model.fitted), np.abs(scores), atol=1e-8)


def test_kpca_fitted_equals_projected_train(rng):
    X = rng.normal(size=(15, 5))
    lm = LabeledMatrix(rows=X, labels=["x"] * 15)
    model = fit_kpca(lm, kernel=KernelSpec("rbf"), n_components=4)
    np.testing.assert_allclose(project(model, X), model.fitted, atol=1e-9)


def test_kpca_component_bounds(rng):
    lm = LabeledMatrix(rows=rng.normal(size=(6, 3)), labels=["x"] * 6)
    with pytest.raises(ValueError):
        fit_kpca(lm, n_components=6)
    with pytest.raises(ValueError):
        fit_kpca(lm, n_components=0)


def test_kpca_rank_deficient_kernel(rng):
    # Five copies of two distinct rows: the centered Gram has rank 1.
    X = np.vstack([np.zeros((5, 3)), np.ones((5, 3))])
    lm = LabeledMatrix(rows=X, labels=["x"] * 10)
    with pytest.raises(RankError):
        fit_kpca(lm, kernel=KernelSpec("linear"), n_components=4)


def test_kpca_has_no_back_projection(rng):
    lm = LabeledMatrix(rows=rng.normal(size=(8, 3)), labels=["x"] * 8)
    model = fit_kpca(lm, kernel=KernelSpec("rbf"), n_components=2)
    with pytest.raises(ReduceError):
        back_project(model, model.fitted)


# --- LDA -----------------------------------------------------------------------------


def test_lda_output_dim_is_classes_minus_one(rng):
    lm = blobs(rng, [[0, 0], [6, 0], [0, 6]], per_class=8)
    model = fit_lda(lm)
    assert model.output_dim == 2
    assert model.fitted.shape == (24, 2)


def test_lda_separates_blobs(rng):
    lm = blobs(rng, [[0, 0, 0], [8, 0, 0], [0, 8, 0]], per_class=10, spread=0.4)
    model = fit_lda(lm)
    assert separability_index(model.fitted, lm.labels) > 5.0


def test_lda_zero_within_scatter_needs_regularization():
    rows = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    lm = LabeledMatrix(rows=rows, labels=["a", "a", "b", "b"])
    with pytest.raises(SingularScatterError):
        fit_lda(lm, regularization=0.0)
    model = fit_lda(lm, regularization=1e-4)
    assert model.output_dim == 1


def test_lda_high_dimensional_data(rng):
    # d >> n: the within-class scatter is singular without the rank
    # pre-projection plus ridge.
    lm = blobs(rng, [[0] * 2, [5] * 2], per_class=5, dims=100)
    model = fit_lda(lm, regularization=1e-4)
    assert model.output_dim == 1
    assert separability_index(model.fitted, lm.labels) > 3.0


def test_lda_input_validation(rng):
    one_class = LabeledMatrix(rows=rng.normal(size=(4, 2)), labels=["a"] * 4)
    with pytest.raises(ValueError):
        fit_lda(one_class)
    tiny_class = LabeledMatrix(rows=rng.normal(size=(3, 2)),
                               labels=["a", "a", "b"])
    with pytest.raises(ValueError):
        fit_lda(tiny_class)
    lm = blobs(rng, [[0, 0], [1, 1]], per_class=3)
    with pytest.raises(ValueError):
        fit_lda(lm, regularization=-1.0)


# --- DCV -----------------------------------------------------------------------------


def test_dcv_exact_null_collapses_classes(rng):
    lm = blobs(rng, np.eye(3) * 10.0, per_class=5, spread=1.0, dims=60)
    model = fit_dcv(lm, exact_null=True)
    proj = model.fitted
    idx = lm.class_indices()
    intra = max(np.max(np.linalg.norm(proj[i] - proj[i].mean(axis=0), axis=1))
                for i in idx.values())
    centers = np.vstack([proj[i].mean(axis=0) for i in idx.values()])
    inter = np.min([np.linalg.norm(a - b)
                    for i, a in enumerate(centers) for b in centers[i + 1:]])
    assert intra < 1e-8 * inter


def test_dcv_basis_lies_in_within_scatter_null_space(rng):
    lm = blobs(rng, np.eye(3) * 8.0, per_class=4, spread=0.8, dims=50)
    model = fit_dcv(lm, exact_null=True)
    X = lm.rows.copy()
    for idx in lm.class_indices().values():
        X[idx] -= X[idx].mean(axis=0)
    residual = np.abs(X @ model.basis).max()
    assert residual < 1e-8 * np.linalg.norm(X)


def test_dcv_fraction_mode_keeps_discriminative_directions(rng):
    lm = blobs(rng, [[0, 0, 0], [10, 0, 0], [0, 10, 0]], per_class=8, spread=0.5)
    model = fit_dcv(lm, variance_fraction=0.8)
    assert 1 <= model.output_dim <= 2
    assert separability_index(model.fitted, lm.labels) > 2.0


def test_dcv_error_paths(rng):
    single = LabeledMatrix(rows=rng.normal(size=(4, 3)), labels=["a"] * 4)
    with pytest.raises(UndefinedBetweenScatterError):
        fit_dcv(single)
    lm = blobs(rng, [[0, 0], [1, 1]], per_class=3)
    with pytest.raises(ValueError):
        fit_dcv(lm, variance_fraction=1.5)
    # Equal class means with full-rank within scatter leave nothing to keep.
    rows = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0], [0.0, -2.0]])
    degenerate = LabeledMatrix(rows=rows, labels=["a", "a", "b", "b"])
    with pytest.raises(EmptyNullSpaceError):
        fit_dcv(degenerate, exact_null=True)


# --- projection and persistence --------------------------------------------------------


def test_project_shape_contract(rng):
    lm = LabeledMatrix(rows=rng.normal(size=(10, 4)), labels=["x"] * 10)
    model = fit_pca(lm, variance_kept=1.0)
    one = project(model, rng.normal(size=4))
    assert one.shape == (model.output_dim,)
    with pytest.raises(ShapeMismatchError):
        project(model, rng.normal(size=(3, 5)))


@pytest.mark.parametrize("method", ["pca", "kpca", "lda", "dcv"])
def test_model_round_trip_through_json(method, rng, tmp_path):
    lm = blobs(rng, np.eye(3) * 6.0, per_class=5, dims=12)
    model = {
        "pca": lambda: fit_pca(lm, variance_kept=0.95),
        "kpca": lambda: fit_kpca(lm, kernel=KernelSpec("rbf"), n_components=3),
        "lda": lambda: fit_lda(lm, regularization=1e-4),
        "dcv": lambda: fit_dcv(lm, exact_null=True),
    }[method]()
    path = tmp_path / f"{method}.json"
    save_model(model, path)
    back = load_model(path)
    assert back.method == model.method
    assert back.output_dim == model.output_dim
    probe = rng.normal(size=(4, 12))
    np.testing.assert_array_equal(project(back, probe), project(model, probe))


def test_save_model_is_deterministic(rng, tmp_path):
    lm = LabeledMatrix(rows=rng.normal(size=(8, 5)), labels=["x"] * 8)
    model = fit_pca(lm, variance_kept=1.0)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_model(model, a)
    save_model(model, b)
    assert a.read_bytes() == b.read_bytes()


def test_load_model_rejects_unknown_format(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format_version": 99}\n')
    with pytest.raises(ReduceError):
        load_model(path)


# --- point clouds and separability -------------------------------------------------------


def test_top_components_layout_and_truncation(rng):
    lm = blobs(rng, [[0, 0], [5, 5]], per_class=3)
    model = fit_pca(lm, variance_kept=1.0)
    emb = LabeledMatrix(rows=model.fitted, labels=lm.labels,
                        sample_ids=[f"s{i}" for i in range(6)])
    with pytest.warns(UserWarning):
        cloud = top_components(model, emb, n=5)
    assert cloud.n_components == model.output_dim
    assert cloud.warnings
    assert len(cloud.rows) == 6
    sid, label, split, *coords = cloud.rows[0]
    assert (sid, label, split) == ("s0", "class0", "train")
    assert len(coords) == cloud.n_components


def test_top_components_test_split_legend(rng):
    lm = blobs(rng, [[0, 0], [5, 5]], per_class=4)
    model = fit_pca(lm, variance_kept=1.0)
    emb = LabeledMatrix(rows=model.fitted, labels=lm.labels)
    half = LabeledMatrix(rows=model.fitted[:4], labels=lm.labels[:4])
    cloud = top_components(model, emb, half, n=2)
    legends = cloud.legend_labels
    assert "class0" in legends and "class0TS" in legends
    wide = LabeledMatrix(rows=np.hstack([model.fitted, model.fitted]),
                         labels=lm.labels)
    with pytest.raises(ShapeMismatchError):
        top_components(model, wide, n=2)


def test_point_cloud_csv_split_filter(rng, tmp_path):
    lm = blobs(rng, [[0, 0], [5, 5]], per_class=3)
    model = fit_pca(lm, variance_kept=1.0)
    emb = LabeledMatrix(rows=model.fitted, labels=lm.labels)
    cloud = top_components(model, emb, emb, n=2)
    all_rows = tmp_path / "all.csv"
    train_only = tmp_path / "train.csv"
    cloud.save_csv(all_rows)
    cloud.save_csv(train_only, split="train")
    assert len(all_rows.read_text().splitlines()) == 1 + 12
    body = train_only.read_text().splitlines()[1:]
    assert len(body) == 6
    assert all(line.split(",")[2] == "train" for line in body)


def test_separability_index_hand_value():
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    labels = ["a", "a", "b", "b"]
    inter = (2 * 10.0 + 2 * np.sqrt(101.0)) / 4.0
    assert separability_index(pts, labels) == pytest.approx(inter, rel=1e-12)


def test_separability_index_degenerate_cases():
    pts = np.zeros((4, 2))
    assert separability_index(pts, ["a", "a", "b", "b"]) == float("inf")
    assert separability_index(pts, ["a", "a", "a", "a"]) == 0.0
