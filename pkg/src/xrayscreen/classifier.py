"""Soft-margin SVM trained by sequential pairwise coordinate optimization.

The binary solver optimizes the dual one violating pair at a time (an
SMO-style sweep): the first KKT violator in index order picks its partner by
the largest error gap, ties broken by lowest index, so training is fully
deterministic without any seed. Multiclass is one-vs-one with majority
voting; vote ties fall back to summed decision magnitudes and then to the
fixed class order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import KernelSpec, kernel_matrix, resolve_kernel
from .reduce import LabeledMatrix, _label_key

SVM_FORMAT_VERSION = 1


class ClassifierError(Exception):
    pass


@dataclass(frozen=True)
class SvmConfig:
    kernel: KernelSpec = KernelSpec("linear")
    c: float = 10.0
    tolerance: float = 1e-3
    max_passes: int = 5000

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")

    def to_dict(self) -> dict:
        return {"kernel": self.kernel.to_dict(), "c": self.c,
                "tolerance": self.tolerance, "max_passes": self.max_passes}

    @classmethod
    def from_dict(cls, d: dict) -> "SvmConfig":
        return cls(kernel=KernelSpec.from_dict(d["kernel"]), c=float(d["c"]),
                   tolerance=float(d["tolerance"]), max_passes=int(d["max_passes"]))


def dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Soft-margin dual value W(alpha) = sum(alpha) - 1/2 u' K u with u = alpha*y."""
    u = alpha * y
    return float(alpha.sum() - 0.5 * (u @ K @ u))


def _smo_solve(K: np.ndarray, y: np.ndarray, c: float, tol: float, max_passes: int
               ) -> tuple[np.ndarray, float, bool, int]:
    """Deterministic SMO sweep loop. Returns (alpha, bias, converged, passes)."""
    n = len(y)
    alpha = np.zeros(n)
    b = 0.0
    # E[i] = f(x_i) - y_i, kept incrementally current.
    E = -y.astype(np.float64)

    def take_step(i: int, j: int) -> bool:
        nonlocal b, E
        if i == j:
            return False
        ai, aj = alpha[i], alpha[j]
        yi, yj = y[i], y[j]
        s = yi * yj
        if s < 0:
            L, H = max(0.0, aj - ai), min(c, c + aj - ai)
        else:
            L, H = max(0.0, ai + aj - c), min(c, ai + aj)
        if L >= H:
            return False
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta > 1e-12:
            aj_new = aj + yj * (E[i] - E[j]) / eta
            aj_new = min(max(aj_new, L), H)
        else:
            # Flat or concave direction (duplicate points); compare the two ends.
            base = alpha.copy()
            best = None
            for cand in (L, H):
                base[j] = cand
                base[i] = ai + s * (aj - cand)
                val = dual_objective(K, y, np.clip(base, 0.0, c))
                if best is None or val > best[0] + 1e-12:
                    best = (val, cand)
            if best is None or abs(best[1] - aj) < 1e-12:
                return False
            aj_new = best[1]
        if abs(aj_new - aj) < 1e-12 * (aj_new + aj + 1e-12):
            return False
        ai_new = ai + s * (aj - aj_new)
        ai_new = min(max(ai_new, 0.0), c)

        d_i = yi * (ai_new - ai)
        d_j = yj * (aj_new - aj)
        b1 = b - E[i] - d_i * K[i, i] - d_j * K[i, j]
        b2 = b - E[j] - d_i * K[i, j] - d_j * K[j, j]
        if 0.0 < ai_new < c:
            b_new = b1
        elif 0.0 < aj_new < c:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        E += d_i * K[i] + d_j * K[j] + (b_new - b)
        alpha[i], alpha[j] = ai_new, aj_new
        b = b_new
        return True

    # Sweeps drive residuals half a tolerance tighter than promised so the
    # final KKT verification under the recentered bias has headroom.
    tol_inner = 0.5 * tol

    def violates(i: int, t: float = None) -> bool:
        t = tol_inner if t is None else t
        r = y[i] * E[i]  # = y_i f_i - 1
        return (r < -t and alpha[i] < c) or (r > t and alpha[i] > 0.0)

    diag = np.diag(K).copy()

    def examine(i: int) -> bool:
        if not violates(i):
            return False
        # Partners ranked by the second-order gain of the pair step,
        # (E_i - E_j)^2 / eta; stable sort keeps ties at the lowest index.
        eta_row = np.maximum(diag[i] + diag - 2.0 * K[i], 1e-12)
        gain = (E[i] - E) ** 2 / eta_row
        gain[i] = -1.0
        order_j = np.argsort(-gain, kind="stable")
        return any(take_step(i, int(j)) for j in order_j if gain[j] > 0.0)

    passes = 0
    converged = False
    while passes < max_passes:
        # Full sweeps alternate with sweeps over free multipliers only; the
        # round ends when a full sweep makes no progress, meaning no partner
        # admits a step for any remaining violator under the running bias.
        examine_all = True
        round_changed = 0
        while passes < max_passes:
            passes += 1
            if examine_all:
                targets = range(n)
            else:
                targets = [i for i in range(n) if 0.0 < alpha[i] < c]
            changed = sum(examine(i) for i in targets)
            round_changed += changed
            if examine_all:
                if changed == 0:
                    break
                examine_all = False
            elif changed == 0:
                examine_all = True

        # Clipped steps leave sub-1e-12 dust on multipliers that belong on
        # the box boundary; snapped dust would otherwise count as a free
        # support vector below and skew the bias.
        snap = 1e-12 * c
        alpha[alpha < snap] = 0.0
        alpha[alpha > c - snap] = c

        # The running bias drifts when steps end on the box boundary
        # (midpoint rule); recenter it from the free support vectors, or
        # failing those from the feasible interval the bound multipliers
        # leave, then re-verify KKT against the recentered bias.
        g = (alpha * y) @ K
        free = (alpha > 0.0) & (alpha < c)
        if free.any():
            b = float(np.mean(y[free] - g[free]))
        else:
            # Every multiplier sits on the box. alpha = 0 wants its margin
            # >= 1 and alpha = C wants it <= 1; both turn into one-sided
            # bounds on b at the value y_i - g_i.
            cand = y - g
            lower = cand[((y > 0) & (alpha <= 0.0)) | ((y < 0) & (alpha >= c))]
            upper = cand[((y > 0) & (alpha >= c)) | ((y < 0) & (alpha <= 0.0))]
            lo = lower.max() if lower.size else -np.inf
            hi = upper.min() if upper.size else np.inf
            if lo <= hi:
                if np.isfinite(lo) and np.isfinite(hi):
                    b = float(0.5 * (lo + hi))
                else:
                    b = float(min(max(b, lo), hi))
        E = g + b - y
        converged = not any(violates(i, tol) for i in range(n))
        # Recentering can expose violators the running bias hid; resume
        # sweeping under the refreshed errors while rounds still progress.
        if converged or round_changed == 0:
            break
    return alpha, b, converged, passes


@dataclass
class BinarySvm:
    """One trained two-class machine. Positive class is ``class_pair[0]``."""

    class_pair: tuple
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i for each support vector
    bias: float
    kernel: KernelSpec
    converged: bool
    passes: int = 0

    def decision(self, x: np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        rows = np.atleast_2d(x)
        if self.support_vectors.shape[0] == 0:
            out = np.full(rows.shape[0], self.bias)
        else:
            out = kernel_matrix(self.kernel, rows, self.support_vectors) @ self.dual_coef \
                + self.bias
        return float(out[0]) if single else out


def fit_binary_svm(data: LabeledMatrix, config: SvmConfig = SvmConfig()) -> BinarySvm:
    """Train one machine on a two-class matrix.

    The first class in fixed label order maps to +1. A run that exhausts
    ``max_passes`` still returns a usable machine with ``converged=False``.
    """
    classes = data.classes
    if len(classes) != 2:
        raise ValueError(f"need exactly 2 classes, got {len(classes)}")
    pos, neg = classes
    y = np.where([lab == pos for lab in data.labels], 1.0, -1.0)
    X = data.rows
    spec = resolve_kernel(config.kernel, X)
    K = kernel_matrix(spec, X, X)
    alpha, b, converged, passes = _smo_solve(K, y, config.c, config.tolerance,
                                             config.max_passes)
    keep = alpha > 0.0
    return BinarySvm(
        class_pair=(pos, neg),
        support_vectors=X[keep].copy(),
        dual_coef=(alpha * y)[keep],
        bias=b,
        kernel=spec,
        converged=converged,
        passes=passes,
    )


@dataclass
class SvmModel:
    """One-vs-one multiclass model over a fixed class order."""

    classes: list
    machines: list[BinarySvm] = field(default_factory=list)

    def machine_for(self, a, b) -> BinarySvm:
        for m in self.machines:
            if m.class_pair == (a, b) or m.class_pair == (b, a):
                return m
        raise KeyError((a, b))


def fit_multiclass(data: LabeledMatrix, config: SvmConfig = SvmConfig()) -> SvmModel:
    classes = data.classes
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    indices = data.class_indices()
    machines = []
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            a, b = classes[i], classes[j]
            rows = np.concatenate([indices[a], indices[b]])
            rows.sort()
            sub = LabeledMatrix(rows=data.rows[rows],
                                labels=[data.labels[r] for r in rows])
            machines.append(fit_binary_svm(sub, config))
    return SvmModel(classes=classes, machines=machines)


def _vote_one(model: SvmModel, decisions: list[float]):
    votes = {c: 0 for c in model.classes}
    confidence = {c: 0.0 for c in model.classes}
    for machine, d in zip(model.machines, decisions):
        pos, neg = machine.class_pair
        winner = pos if d >= 0.0 else neg
        votes[winner] += 1
        confidence[winner] += abs(d)
    best = max(votes.values())
    tied = [c for c in model.classes if votes[c] == best]
    if len(tied) == 1:
        return tied[0]
    best_conf = max(confidence[c] for c in tied)
    for c in tied:  # classes are already in fixed order; first max wins
        if confidence[c] == best_conf:
            return c
    return tied[0]


def predict(model: SvmModel, x: np.ndarray):
    """Predict one sample (1-d input) or a batch (2-d input)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return _vote_one(model, [m.decision(x) for m in model.machines])
    all_dec = np.column_stack([m.decision(x) for m in model.machines])
    return [_vote_one(model, list(row)) for row in all_dec]


def decision_values(model: SvmModel, x: np.ndarray) -> dict:
    """Diagnostic per-pair decision values for one sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("decision_values takes a single sample")
    return {
        (_label_key(m.class_pair[0]), _label_key(m.class_pair[1])): m.decision(x)
        for m in model.machines
    }


def save_svm(model: SvmModel, path) -> None:
    doc = {
        "format_version": SVM_FORMAT_VERSION,
        "classes": [_label_key(c) for c in model.classes],
        "machines": [
            {
                "class_pair": [_label_key(m.class_pair[0]), _label_key(m.class_pair[1])],
                "support_vectors": m.support_vectors.tolist(),
                "dual_coef": m.dual_coef.tolist(),
                "bias": m.bias,
                "kernel": m.kernel.to_dict(),
                "converged": m.converged,
                "passes": m.passes,
            }
            for m in model.machines
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_svm(path) -> SvmModel:
    """Load a persisted model; class labels come back as wire strings."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != SVM_FORMAT_VERSION:
        raise ClassifierError(f"{path}: unsupported model format")
    machines = []
    for m in doc["machines"]:
        sv = np.asarray(m["support_vectors"], dtype=np.float64)
        if sv.size == 0:
            sv = sv.reshape(0, 0)
        machines.append(BinarySvm(
            class_pair=tuple(m["class_pair"]),
            support_vectors=sv,
            dual_coef=np.asarray(m["dual_coef"], dtype=np.float64),
            bias=float(m["bias"]),
            kernel=KernelSpec.from_dict(m["kernel"]),
            converged=bool(m["converged"]),
            passes=int(m.get("passes", 0)),
        ))
    return SvmModel(classes=list(doc["classes"]), machines=machines)
