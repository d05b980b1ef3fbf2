"""Kernel functions shared by the reduction and classifier modules."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import pdist

KERNEL_NAMES = ("linear", "rbf")


@dataclass(frozen=True)
class KernelSpec:
    """A kernel identifier plus its parameter.

    ``gamma`` only applies to the RBF kernel, k(a, b) = exp(-gamma ||a-b||^2).
    Leaving it ``None`` selects gamma from the median pairwise distance of the
    training rows at fit time (gamma = 1 / (2 * median^2)).
    """

    name: str = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.name not in KERNEL_NAMES:
            raise ValueError(f"unknown kernel {self.name!r}, expected one of {KERNEL_NAMES}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def to_dict(self) -> dict:
        return {"name": self.name, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(name=d["name"], gamma=d.get("gamma"))


def median_distance_gamma(rows: np.ndarray) -> float:
    """Median-pairwise-distance bandwidth heuristic, returned as an RBF gamma."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(rows)))
    if med <= 0.0:
        return 1.0
    return 1.0 / (2.0 * med * med)


def resolve_kernel(spec: KernelSpec, rows: np.ndarray) -> KernelSpec:
    """Fill in a concrete gamma for RBF specs that left it to the heuristic."""
    if spec.name == "rbf" and spec.gamma is None:
        return replace(spec, gamma=median_distance_gamma(rows))
    return spec


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gram matrix k(a_i, b_j) with shape (len(a), len(b))."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"row width mismatch: {a.shape[1]} vs {b.shape[1]}")
    if spec.name == "linear":
        return a @ b.T
    if spec.gamma is None:
        raise ValueError("rbf kernel needs a resolved gamma; call resolve_kernel first")
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-spec.gamma * sq)
