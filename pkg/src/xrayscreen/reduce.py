"""Dimensionality reduction: PCA, kernel PCA, LDA, and discriminant common vectors.

All four fits return a :class:`ReductionModel` that projects with the same
call, so downstream code never cares which method produced it. Fits are
deterministic: eigenvector signs are fixed by forcing the largest-magnitude
entry of each basis (or dual) vector positive, and no randomness is used.

The descriptor matrices this package produces are wide (d >> n), so PCA and
the DCV within-class eigenproblem go through the n x n Gram matrix instead of
the d x d scatter.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .kernels import KernelSpec, kernel_matrix, resolve_kernel

MODEL_FORMAT_VERSION = 1

_EPS = np.finfo(np.float64).eps


class ReduceError(Exception):
    pass


class DegenerateDataError(ReduceError):
    pass


class RankError(ReduceError):
    pass


class SingularScatterError(ReduceError):
    pass


class EmptyNullSpaceError(ReduceError):
    pass


class UndefinedBetweenScatterError(ReduceError):
    pass


class ShapeMismatchError(ReduceError):
    pass


def _label_key(label):
    return getattr(label, "value", None) or str(label)


@dataclass
class LabeledMatrix:
    """Feature rows with per-row labels (and optionally sample ids)."""

    rows: np.ndarray
    labels: list
    sample_ids: list[str] | None = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            raise ValueError(f"rows must be 2-d, got shape {self.rows.shape}")
        if len(self.labels) != self.rows.shape[0]:
            raise ValueError("labels length must match row count")
        if self.sample_ids is not None and len(self.sample_ids) != self.rows.shape[0]:
            raise ValueError("sample_ids length must match row count")

    @property
    def classes(self) -> list:
        """Unique labels in a fixed, permutation-stable order."""
        return sorted(set(self.labels), key=_label_key)

    def class_indices(self) -> dict:
        out = {c: [] for c in self.classes}
        for i, lab in enumerate(self.labels):
            out[lab].append(i)
        return {c: np.asarray(ix, dtype=np.intp) for c, ix in out.items()}

    @classmethod
    def from_features(cls, fm) -> "LabeledMatrix":
        return cls(rows=fm.values, labels=list(fm.labels), sample_ids=list(fm.sample_ids))


def _fix_signs(matrix: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    if matrix.size == 0:
        return matrix
    picks = np.argmax(np.abs(matrix), axis=0)
    signs = np.sign(matrix[picks, np.arange(matrix.shape[1])])
    signs[signs == 0] = 1.0
    return matrix * signs[None, :]


def _eigh_descending(sym: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(sym)
    return vals[::-1], vecs[:, ::-1]


@dataclass
class ReductionModel:
    """A fitted projection x -> y.

    Linear methods store ``center`` and an orthonormal-or-not ``basis`` so
    that y = (x - center) @ basis. Kernel PCA stores its training rows, dual
    coefficients, and kernel-centering terms instead.
    """

    method: str
    input_dim: int
    output_dim: int
    center: np.ndarray
    basis: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    kernel: KernelSpec | None = None
    train_rows: np.ndarray | None = None
    dual_coef: np.ndarray | None = None
    k_col_means: np.ndarray | None = None
    k_total_mean: float | None = None
    dcv_fraction: float | None = None
    dcv_exact_null: bool = False
    fitted: np.ndarray | None = None


def fit_pca(data: LabeledMatrix, variance_kept: float = 0.99) -> ReductionModel:
    """Principal components keeping the smallest count reaching ``variance_kept``.

    Eigenvalues below numerical rank are never retained, so variance_kept=1.0
    yields exactly the rank of the centered data.
    """
    if not 0.0 < variance_kept <= 1.0:
        raise ValueError("variance_kept must lie in (0, 1]")
    X = data.rows
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least 2 rows")
    center = X.mean(axis=0)
    Xc = X - center

    if d <= n:
        vals, vecs = _eigh_descending(Xc.T @ Xc)
        basis_full = vecs
    else:
        vals, gvecs = _eigh_descending(Xc @ Xc.T)
        basis_full = None  # built lazily below from the Gram eigenvectors

    vals = np.clip(vals, 0.0, None)
    total = float(vals.sum())
    if total <= 0.0:
        raise DegenerateDataError("data has zero total variance")
    tol = vals[0] * max(n, d) * _EPS
    rank = int(np.sum(vals > tol))
    if rank == 0:
        raise DegenerateDataError("data has zero total variance")
    fractions = np.cumsum(vals[:rank]) / total
    m = int(np.searchsorted(fractions, variance_kept - 1e-12) + 1)
    m = min(m, rank)

    if basis_full is not None:
        basis = basis_full[:, :m]
    else:
        basis = (Xc.T @ gvecs[:, :m]) / np.sqrt(vals[:m])[None, :]
    basis = _fix_signs(basis)
    fitted = Xc @ basis
    return ReductionModel(
        method="pca", input_dim=d, output_dim=m, center=center, basis=basis,
        eigenvalues=vals[:m] / (n - 1), fitted=fitted,
    )


def fit_kpca(data: LabeledMatrix, kernel: KernelSpec = KernelSpec("rbf"),
             n_components: int = 3) -> ReductionModel:
    """Kernel PCA on the double-centered Gram matrix.

    Dual coefficients are scaled by 1/sqrt(eigenvalue), so projections of the
    training rows have variance equal to each component's eigenvalue share.
    """
    X = data.rows
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least 2 rows")
    if not 1 <= n_components <= n - 1:
        raise ValueError(f"n_components must lie in 1..{n - 1}")
    spec = resolve_kernel(kernel, X)
    K = kernel_matrix(spec, X, X)
    col_means = K.mean(axis=0)
    total_mean = float(K.mean())
    Kc = K - col_means[None, :] - col_means[:, None] + total_mean

    vals, vecs = _eigh_descending(Kc)
    tol = max(vals[0], 0.0) * n * _EPS
    if vals[n_components - 1] <= tol:
        raise RankError(
            f"component {n_components} has non-positive eigenvalue "
            f"{vals[n_components - 1]:.3e}; reduce n_components"
        )
    lam = vals[:n_components]
    dual = _fix_signs(vecs[:, :n_components] / np.sqrt(lam)[None, :])
    fitted = Kc @ dual
    return ReductionModel(
        method="kpca", input_dim=d, output_dim=n_components, center=X.mean(axis=0),
        eigenvalues=lam, kernel=spec, train_rows=X.copy(), dual_coef=dual,
        k_col_means=col_means, k_total_mean=total_mean, fitted=fitted,
    )


def _scatter_matrices(Z: np.ndarray, data: LabeledMatrix) -> tuple[np.ndarray, np.ndarray]:
    r = Z.shape[1]
    sw = np.zeros((r, r))
    sb = np.zeros((r, r))
    grand = Z.mean(axis=0)
    for _, idx in data.class_indices().items():
        zc = Z[idx]
        mean_c = zc.mean(axis=0)
        dev = zc - mean_c
        sw += dev.T @ dev
        gap = (mean_c - grand)[:, None]
        sb += len(idx) * (gap @ gap.T)
    return sw, sb


def fit_lda(data: LabeledMatrix, regularization: float = 0.0) -> ReductionModel:
    """Fisher discriminant directions, output dimension = n_classes - 1.

    The data is first projected onto the rank of its centered rows (the
    small-sample-size guard), then the generalized eigenproblem
    Sb w = lambda (Sw + regularization * I) w is solved there.
    """
    if regularization < 0.0:
        raise ValueError("regularization must be >= 0")
    classes = data.classes
    if len(classes) < 2:
        raise ValueError("LDA needs at least 2 classes")
    for c, idx in data.class_indices().items():
        if len(idx) < 2:
            raise ValueError(f"class {_label_key(c)} needs at least 2 samples")

    pre = fit_pca(data, variance_kept=1.0)
    Z = pre.fitted
    sw, sb = _scatter_matrices(Z, data)

    sw_vals = np.linalg.eigvalsh(sw)
    sw_tol = max(sw_vals[-1], 0.0) * sw.shape[0] * _EPS
    if regularization == 0.0 and sw_vals[0] <= sw_tol:
        raise SingularScatterError(
            "within-class scatter is singular in the rank subspace; "
            "pass regularization > 0"
        )
    try:
        vals, vecs = scipy.linalg.eigh(sb, sw + regularization * np.eye(sw.shape[0]))
    except scipy.linalg.LinAlgError as exc:
        raise SingularScatterError(
            f"generalized eigensolve failed ({exc}); increase regularization"
        ) from exc
    m = len(classes) - 1
    order = np.argsort(vals)[::-1][:m]
    W = _fix_signs(vecs[:, order])
    basis = pre.basis @ W
    fitted = (data.rows - pre.center) @ basis
    return ReductionModel(
        method="lda", input_dim=data.rows.shape[1], output_dim=m, center=pre.center,
        basis=basis, eigenvalues=vals[order], fitted=fitted,
    )


def fit_dcv(data: LabeledMatrix, variance_fraction: float = 0.8,
            exact_null: bool = False) -> ReductionModel:
    """Discriminant common vectors via the within-class Gram matrix.

    The within-class scatter Sw is eigendecomposed through the n x n Gram
    trick. Its leading eigenvectors capturing at least ``variance_fraction``
    of the eigenvalue mass span the retained range; removing that range from
    each class mean yields one (near-)common vector per class, and the final
    basis is the principal directions of those common vectors (at most
    n_classes - 1). With ``exact_null=True`` the full numerical rank of Sw is
    removed instead, the exact-null regime appropriate when n << d.
    """
    classes = data.classes
    if len(classes) < 2:
        raise UndefinedBetweenScatterError(
            "between-class scatter is undefined for a single class"
        )
    if not exact_null and not 0.0 < variance_fraction < 1.0:
        raise ValueError("variance_fraction must lie strictly between 0 and 1")

    X = data.rows
    n, d = X.shape
    indices = data.class_indices()
    means = np.vstack([X[idx].mean(axis=0) for idx in indices.values()])
    W = X.copy()
    for row_of_mean, idx in enumerate(indices.values()):
        W[idx] -= means[row_of_mean]

    vals, gvecs = _eigh_descending(W @ W.T)
    vals = np.clip(vals, 0.0, None)
    total = float(vals.sum())
    rank_tol = vals[0] * max(n, d) * _EPS if vals.size else 0.0
    if total <= 0.0:
        r = 0
    elif exact_null:
        r = int(np.sum(vals > rank_tol))
    else:
        fractions = np.cumsum(vals) / total
        r = int(np.searchsorted(fractions, variance_fraction - 1e-12) + 1)
        r = min(r, int(np.sum(vals > rank_tol)))

    if r > 0:
        range_basis = (W.T @ gvecs[:, :r]) / np.sqrt(vals[:r])[None, :]
        common = means - (means @ range_basis) @ range_basis.T
    else:
        range_basis = np.empty((d, 0))
        common = means.copy()

    center = common.mean(axis=0)
    Cc = common - center
    cvals, cvecs = _eigh_descending(Cc @ Cc.T)
    cvals = np.clip(cvals, 0.0, None)
    ctol = cvals[0] * max(len(classes), d) * _EPS if cvals.size else 0.0
    m = int(np.sum(cvals > ctol))
    if m == 0:
        raise EmptyNullSpaceError(
            "pseudo-null space carries no between-class scatter; "
            "lower variance_fraction or check the data"
        )
    basis = _fix_signs((Cc.T @ cvecs[:, :m]) / np.sqrt(cvals[:m])[None, :])
    fitted = (X - center) @ basis
    return ReductionModel(
        method="dcv", input_dim=d, output_dim=m, center=center, basis=basis,
        eigenvalues=cvals[:m], dcv_fraction=None if exact_null else variance_fraction,
        dcv_exact_null=exact_null, fitted=fitted,
    )


def project(model: ReductionModel, x: np.ndarray) -> np.ndarray:
    """Project a vector (d,) or a batch (k, d) into the fitted space."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    rows = np.atleast_2d(x)
    if rows.ndim != 2 or rows.shape[1] != model.input_dim:
        raise ShapeMismatchError(
            f"expected rows of width {model.input_dim}, got shape {x.shape}"
        )
    if model.method == "kpca":
        k = kernel_matrix(model.kernel, rows, model.train_rows)
        kc = (k - model.k_col_means[None, :] - k.mean(axis=1)[:, None]
              + model.k_total_mean)
        out = kc @ model.dual_coef
    else:
        out = (rows - model.center) @ model.basis
    return out[0] if single else out


def back_project(model: ReductionModel, y: np.ndarray) -> np.ndarray:
    """Map projected coordinates back to input space (linear methods only)."""
    if model.method == "kpca":
        raise ReduceError("kernel PCA has no closed-form back-projection")
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    rows = np.atleast_2d(y)
    if rows.shape[1] != model.output_dim:
        raise ShapeMismatchError(
            f"expected rows of width {model.output_dim}, got shape {y.shape}"
        )
    out = rows @ model.basis.T + model.center
    return out[0] if single else out


@dataclass
class PointCloud:
    """Rows of (sample_id, label, split, c1..cn) ready for plotting or export."""

    n_components: int
    rows: list[tuple]
    warnings: list[str] = field(default_factory=list)

    @property
    def legend_labels(self) -> list[str]:
        seen = []
        for _, label, split, *_ in self.rows:
            name = label + ("TS" if split == "test" else "")
            if name not in seen:
                seen.append(name)
        return seen

    def save_csv(self, path, split: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "label", "split"]
                            + [f"c{i + 1}" for i in range(self.n_components)])
            for sid, label, sp, *coords in self.rows:
                if split is not None and sp != split:
                    continue
                writer.writerow([sid, label, sp] + [repr(float(c)) for c in coords])


def top_components(model: ReductionModel, train: LabeledMatrix,
                   test: LabeledMatrix | None = None, n: int = 3) -> PointCloud:
    """Collect the first ``n`` embedded components of train (and test) rows.

    ``train``/``test`` hold already-projected rows of width
    ``model.output_dim``. When the model has fewer components than requested
    the cloud is truncated and a warning record is attached. Test rows keep
    their class label in the ``label`` column; legend labels append "TS".
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    n_eff = min(n, model.output_dim)
    notes = []
    if n_eff < n:
        notes.append(f"requested {n} components, model provides {model.output_dim}")
        warnings.warn(notes[-1])

    def rows_of(block: LabeledMatrix, split: str):
        if block.rows.shape[1] != model.output_dim:
            raise ShapeMismatchError(
                f"{split} rows have width {block.rows.shape[1]}, "
                f"expected embedded width {model.output_dim}"
            )
        ids = block.sample_ids or [f"{split}{i:04d}" for i in range(len(block.labels))]
        return [(ids[i], _label_key(block.labels[i]), split, *block.rows[i, :n_eff])
                for i in range(len(block.labels))]

    rows = rows_of(train, "train")
    if test is not None and len(test.labels):
        rows += rows_of(test, "test")
    return PointCloud(n_components=n_eff, rows=rows, warnings=notes)


def separability_index(cloud_rows: np.ndarray, labels: list) -> float:
    """Mean inter-class over mean intra-class pairwise distance."""
    pts = np.asarray(cloud_rows, dtype=np.float64)
    labels = np.asarray([_label_key(l) for l in labels])
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    same = labels[:, None] == labels[None, :]
    iu = np.triu_indices(len(pts), k=1)
    intra = dist[iu][same[iu]]
    inter = dist[iu][~same[iu]]
    if intra.size == 0 or inter.size == 0 or intra.mean() == 0.0:
        return float("inf") if inter.size else 0.0
    return float(inter.mean() / intra.mean())


def _array_field(x: np.ndarray | None):
    return None if x is None else np.asarray(x, dtype=np.float64).tolist()


def save_model(model: ReductionModel, path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "method": model.method,
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "center": _array_field(model.center),
        "basis": _array_field(model.basis),
        "eigenvalues": _array_field(model.eigenvalues),
        "kernel": model.kernel.to_dict() if model.kernel else None,
        "train_rows": _array_field(model.train_rows),
        "dual_coef": _array_field(model.dual_coef),
        "k_col_means": _array_field(model.k_col_means),
        "k_total_mean": model.k_total_mean,
        "dcv_fraction": model.dcv_fraction,
        "dcv_exact_null": model.dcv_exact_null,
        "fitted": _array_field(model.fitted),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path) -> ReductionModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ReduceError(f"{path}: unsupported model format {doc.get('format_version')!r}")

    def arr(key):
        return None if doc.get(key) is None else np.asarray(doc[key], dtype=np.float64)

    return ReductionModel(
        method=doc["method"], input_dim=doc["input_dim"], output_dim=doc["output_dim"],
        center=arr("center"), basis=arr("basis"), eigenvalues=arr("eigenvalues"),
        kernel=KernelSpec.from_dict(doc["kernel"]) if doc.get("kernel") else None,
        train_rows=arr("train_rows"), dual_coef=arr("dual_coef"),
        k_col_means=arr("k_col_means"), k_total_mean=doc.get("k_total_mean"),
        dcv_fraction=doc.get("dcv_fraction"), dcv_exact_null=doc.get("dcv_exact_null", False),
        fitted=arr("fitted"),
    )
