"""Histogram-of-oriented-gradients descriptor over a fixed cell grid.

The image is divided into non-overlapping square cells; each cell contributes
a magnitude-weighted orientation histogram, and the descriptor is the
row-major concatenation of cell histograms. For an image of R x C pixels and
a cell size s with B bins the descriptor length is (R * C) / s^2 * B whenever
s divides both sides. Sides that are not cell multiples (e.g. cell 32 on a
400-pixel side) are trimmed to the largest centered cell-aligned region
before anything else, so the length is floor(R/s) * floor(C/s) * B in
general.

Gradients use central differences in the interior and one-sided differences
at the borders. Orientations are folded into [0, pi) by default (unsigned) or
[0, 2*pi) (signed); each pixel's magnitude is split linearly between the two
nearest bin centers, with circular wraparound.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .dataset import ClassLabel, Manifest

FEATURE_MATRIX_VERSION = 1


class ConfigurationError(Exception):
    pass


class OrientationRange(Enum):
    UNSIGNED_180 = "unsigned180"
    SIGNED_360 = "signed360"


class CellNormalization(Enum):
    NONE = "none"
    L2_UNIT = "l2unit"


@dataclass(frozen=True)
class HogConfig:
    cell_size: int
    n_bins: int = 9
    orientation_range: OrientationRange = OrientationRange.UNSIGNED_180
    cell_normalization: CellNormalization = CellNormalization.L2_UNIT

    def __post_init__(self):
        if self.cell_size < 1:
            raise ConfigurationError(f"cell_size must be >= 1, got {self.cell_size}")
        if self.n_bins < 2:
            raise ConfigurationError(f"n_bins must be >= 2, got {self.n_bins}")

    @property
    def digest(self) -> str:
        """Short config identifier stored with every descriptor."""
        return (f"hog-c{self.cell_size}-b{self.n_bins}"
                f"-{self.orientation_range.value}-{self.cell_normalization.value}")

    def to_dict(self) -> dict:
        return {
            "cell_size": self.cell_size,
            "n_bins": self.n_bins,
            "orientation_range": self.orientation_range.value,
            "cell_normalization": self.cell_normalization.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HogConfig":
        return cls(
            cell_size=int(d["cell_size"]),
            n_bins=int(d["n_bins"]),
            orientation_range=OrientationRange(d["orientation_range"]),
            cell_normalization=CellNormalization(d["cell_normalization"]),
        )


def feature_dim(config: HogConfig, rows: int, cols: int) -> int:
    """Descriptor length for an image shape.

    Equals (rows * cols) / cell^2 * bins when the cell size divides both
    sides; otherwise the grid covers the largest cell-aligned region, i.e.
    floor(rows / cell) * floor(cols / cell) * bins. At least one full cell
    must fit.
    """
    s = config.cell_size
    if rows < 1 or cols < 1:
        raise ConfigurationError(f"image shape must be positive, got {rows}x{cols}")
    if rows < s or cols < s:
        raise ConfigurationError(
            f"image shape {rows}x{cols} holds no full cell of size {s}"
        )
    return (rows // s) * (cols // s) * config.n_bins


def aligned_window(rows: int, cols: int, cell_size: int) -> tuple[slice, slice]:
    """Centered row/column slices of the largest cell-aligned region."""
    s = cell_size
    if rows < s or cols < s:
        raise ConfigurationError(
            f"image shape {rows}x{cols} holds no full cell of size {s}"
        )
    r_eff, c_eff = (rows // s) * s, (cols // s) * s
    r0, c0 = (rows - r_eff) // 2, (cols - c_eff) // 2
    return slice(r0, r0 + r_eff), slice(c0, c0 + c_eff)


def compute_gradients(image: np.ndarray,
                      orientation_range: OrientationRange = OrientationRange.UNSIGNED_180
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel gradient magnitude and folded orientation.

    Returns
    -------
    magnitude : ndarray
        sqrt(gx^2 + gy^2) per pixel.
    orientation : ndarray
        atan2(gy, gx) folded into [0, pi) or [0, 2*pi).
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or min(image.shape) < 2:
        raise ValueError(f"image must be 2-d with at least 2 pixels per side, got {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains non-finite values")
    gy, gx = np.gradient(image)
    magnitude = np.hypot(gx, gy)
    period = np.pi if orientation_range is OrientationRange.UNSIGNED_180 else 2.0 * np.pi
    orientation = np.mod(np.arctan2(gy, gx), period)
    return magnitude, orientation


@dataclass
class FeatureVector:
    values: np.ndarray
    config_digest: str


def hog_descriptor(image: np.ndarray, config: HogConfig) -> FeatureVector:
    """Descriptor for one image under ``config``.

    With per-cell L2 normalization each cell block has unit norm; all-zero
    cells (constant image patches) stay zero rather than dividing by zero.
    Sides that are not cell multiples are center-trimmed to the largest
    cell-aligned region before gradients are taken.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"image must be 2-d, got shape {image.shape}")
    dim = feature_dim(config, *image.shape)
    win_r, win_c = aligned_window(*image.shape, config.cell_size)
    image = image[win_r, win_c]
    rows, cols = image.shape
    s, nb = config.cell_size, config.n_bins
    cells_r, cells_c = rows // s, cols // s
    n_cells = cells_r * cells_c

    magnitude, orientation = compute_gradients(image, config.orientation_range)
    period = np.pi if config.orientation_range is OrientationRange.UNSIGNED_180 else 2.0 * np.pi
    width = period / nb
    # Bin centers sit at (b + .5) * width; votes interpolate circularly.
    pos = orientation / width - 0.5
    low = np.floor(pos)
    frac = pos - low
    low_bin = low.astype(np.intp) % nb
    high_bin = (low.astype(np.intp) + 1) % nb

    cell_of = (np.arange(rows) // s)[:, None] * cells_c + (np.arange(cols) // s)[None, :]
    hist = np.bincount((cell_of * nb + low_bin).ravel(),
                       weights=(magnitude * (1.0 - frac)).ravel(),
                       minlength=n_cells * nb)
    hist += np.bincount((cell_of * nb + high_bin).ravel(),
                        weights=(magnitude * frac).ravel(),
                        minlength=n_cells * nb)

    if config.cell_normalization is CellNormalization.L2_UNIT:
        blocks = hist.reshape(n_cells, nb)
        norms = np.linalg.norm(blocks, axis=1)
        nz = norms > 0.0
        blocks[nz] /= norms[nz, None]
        hist = blocks.reshape(-1)

    assert hist.shape == (dim,)
    return FeatureVector(values=hist, config_digest=config.digest)


@dataclass
class FeatureMatrix:
    """Descriptor rows for a corpus, aligned with labels and covid offsets."""

    sample_ids: list[str]
    labels: list[ClassLabel]
    offsets: list[int | None]
    values: np.ndarray
    config: HogConfig

    def __post_init__(self):
        n = len(self.sample_ids)
        if not (len(self.labels) == len(self.offsets) == n):
            raise ValueError("sample_ids, labels, offsets must have equal length")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != n:
            raise ValueError(f"values must be (n, dim), got {self.values.shape}")

    def __len__(self):
        return len(self.sample_ids)

    def select(self, sample_ids) -> "FeatureMatrix":
        index = {sid: i for i, sid in enumerate(self.sample_ids)}
        rows = [index[s] for s in sample_ids]
        return FeatureMatrix(
            sample_ids=[self.sample_ids[i] for i in rows],
            labels=[self.labels[i] for i in rows],
            offsets=[self.offsets[i] for i in rows],
            values=self.values[rows],
            config=self.config,
        )


def extract_features(manifest: Manifest, config: HogConfig, image_size: int = 400,
                     jobs: int = 1) -> FeatureMatrix:
    """Ingest every manifest image and stack its descriptor into a matrix."""
    from .dataset import ingest_image

    def one(entry):
        px = ingest_image(manifest.resolve_path(entry), (image_size, image_size))
        return hog_descriptor(px, config).values

    if jobs <= 1:
        rows = [one(e) for e in manifest.entries]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, manifest.entries))
    values = np.vstack(rows) if rows else np.empty((0, 0))
    return FeatureMatrix(
        sample_ids=[e.sample_id for e in manifest.entries],
        labels=[e.class_label for e in manifest.entries],
        offsets=[e.offset_days for e in manifest.entries],
        values=values,
        config=config,
    )


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".meta.json")


def save_feature_matrix(fm: FeatureMatrix, path) -> None:
    """Write ``sample_id,label,offset,f0..f{D-1}`` rows plus a metadata sidecar."""
    path = Path(path)
    dim = fm.values.shape[1] if len(fm) else 0
    header = ["sample_id", "label", "offset"] + [f"f{i}" for i in range(dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, sid in enumerate(fm.sample_ids):
            off = "" if fm.offsets[i] is None else str(fm.offsets[i])
            writer.writerow([sid, fm.labels[i].value, off]
                            + [repr(float(v)) for v in fm.values[i]])
    meta = {
        "format_version": FEATURE_MATRIX_VERSION,
        "config": fm.config.to_dict(),
        "config_digest": fm.config.digest,
        "n_samples": len(fm),
        "dim": dim,
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_feature_matrix(path) -> FeatureMatrix:
    path = Path(path)
    with open(_sidecar_path(path)) as fh:
        meta = json.load(fh)
    config = HogConfig.from_dict(meta["config"])
    if config.digest != meta.get("config_digest"):
        raise ConfigurationError(f"{path}: sidecar digest does not match its config")
    wire = {c.value: c for c in ClassLabel}
    sample_ids, labels, offsets, rows = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["sample_id", "label", "offset"]:
            raise ConfigurationError(f"{path}: bad feature matrix header")
        for row in reader:
            if not row:
                continue
            sample_ids.append(row[0])
            labels.append(wire[row[1]])
            offsets.append(int(row[2]) if row[2] else None)
            rows.append(np.array([float(v) for v in row[3:]], dtype=np.float64))
    values = np.vstack(rows) if rows else np.empty((0, meta["dim"]))
    return FeatureMatrix(sample_ids=sample_ids, labels=labels, offsets=offsets,
                         values=values, config=config)
