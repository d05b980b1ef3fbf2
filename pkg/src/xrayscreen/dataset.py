"""Corpus manifests, image ingestion, and deterministic splits.

A corpus is described by a CSV manifest with one row per image:

    sample_id,patient_id,class_label,offset_days,image_path,source

``class_label`` is one of ``covid``, ``pneumonia``, ``infiltration``,
``normal``. ``offset_days`` (days since symptom onset) is only meaningful for
COVID-19 rows and is left empty elsewhere. Image paths are resolved relative
to the manifest's directory.

Ingestion normalizes every image to a float grid in [0, 1]: 3-channel inputs
are collapsed to luminance (0.299 R + 0.587 G + 0.114 B), values are divided
by the input bit-depth maximum, and the grid is resized with bilinear
resampling (400 x 400 in the screening pipeline). All randomized helpers are
pure functions of their inputs and an explicit integer seed.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


class DatasetError(Exception):
    """Base for manifest/ingestion/split failures."""


class ManifestError(DatasetError):
    pass


class IngestionError(DatasetError):
    pass


class InsufficientSamplesError(DatasetError):
    pass


class StratificationError(DatasetError):
    pass


class SplitError(DatasetError):
    pass


class ClassLabel(Enum):
    COVID19 = "covid"
    PNEUMONIA = "pneumonia"
    INFILTRATION = "infiltration"
    NORMAL = "normal"

    def __str__(self):
        return self.value


#: Fixed class order used everywhere a deterministic ordering is needed.
CLASS_ORDER = (
    ClassLabel.COVID19,
    ClassLabel.PNEUMONIA,
    ClassLabel.INFILTRATION,
    ClassLabel.NORMAL,
)

_LABEL_BY_WIRE = {c.value: c for c in ClassLabel}

MANIFEST_HEADER = ("sample_id", "patient_id", "class_label", "offset_days", "image_path", "source")


class CovidStage(Enum):
    EARLY = "early"
    MID = "mid"
    LATE = "late"

    def __str__(self):
        return self.value


def stage_of(offset_days: int) -> CovidStage:
    """Map days since symptom onset to a coarse disease stage.

    Offsets up to 3 days are EARLY, up to 10 days MID, beyond that LATE.
    """
    offset_days = int(offset_days)
    if offset_days < 0:
        raise ValueError(f"offset_days must be >= 0, got {offset_days}")
    if offset_days <= 3:
        return CovidStage.EARLY
    if offset_days <= 10:
        return CovidStage.MID
    return CovidStage.LATE


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    patient_id: str
    class_label: ClassLabel
    offset_days: int | None
    image_path: str
    source: str = ""

    def __post_init__(self):
        if not self.sample_id:
            raise ManifestError("sample_id must be non-empty")
        if self.offset_days is not None:
            if self.class_label is not ClassLabel.COVID19:
                raise ManifestError(
                    f"sample {self.sample_id}: offset_days only applies to covid rows"
                )
            if self.offset_days < 0:
                raise ManifestError(f"sample {self.sample_id}: offset_days must be >= 0")


@dataclass
class Manifest:
    """An ordered collection of manifest entries with unique sample ids.

    ``root`` is the directory image paths are resolved against; it is set by
    :func:`load_manifest` and may be None for purely in-memory manifests with
    absolute paths.
    """

    entries: list[ManifestEntry]
    root: Path | None = None

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.sample_id in seen:
                raise ManifestError(f"duplicate sample_id {e.sample_id!r}")
            seen.add(e.sample_id)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def class_counts(self) -> dict[ClassLabel, int]:
        counts = {c: 0 for c in CLASS_ORDER}
        for e in self.entries:
            counts[e.class_label] += 1
        return {c: n for c, n in counts.items() if n > 0}

    def by_class(self) -> dict[ClassLabel, list[ManifestEntry]]:
        groups: dict[ClassLabel, list[ManifestEntry]] = {}
        for label in CLASS_ORDER:
            group = [e for e in self.entries if e.class_label is label]
            if group:
                groups[label] = group
        return groups

    def restrict(self, labels) -> "Manifest":
        """Sub-manifest containing only the given class labels, order kept."""
        keep = set(labels)
        return Manifest([e for e in self.entries if e.class_label in keep], root=self.root)

    def resolve_path(self, entry: ManifestEntry) -> Path:
        p = Path(entry.image_path)
        if p.is_absolute() or self.root is None:
            return p
        return self.root / p

    def labels_by_id(self) -> dict[str, ClassLabel]:
        return {e.sample_id: e.class_label for e in self.entries}


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != MANIFEST_HEADER:
                raise ManifestError(
                    f"{path}: bad manifest header {header!r}, expected {','.join(MANIFEST_HEADER)}"
                )
            entries = []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(MANIFEST_HEADER):
                    raise ManifestError(f"{path}:{lineno}: expected {len(MANIFEST_HEADER)} fields")
                sid, pid, wire, off, img, source = (c.strip() for c in row)
                if wire not in _LABEL_BY_WIRE:
                    raise ManifestError(f"{path}:{lineno}: unknown class_label {wire!r}")
                try:
                    offset = int(off) if off else None
                except ValueError:
                    raise ManifestError(f"{path}:{lineno}: bad offset_days {off!r}") from None
                entries.append(
                    ManifestEntry(sid, pid, _LABEL_BY_WIRE[wire], offset, img, source)
                )
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    return Manifest(entries, root=path.parent)


def save_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for e in manifest.entries:
            off = "" if e.offset_days is None else str(e.offset_days)
            writer.writerow(
                [e.sample_id, e.patient_id, e.class_label.value, off, e.image_path, e.source]
            )


@dataclass
class ImageSample:
    """A normalized image plus its manifest metadata."""

    sample_id: str
    patient_id: str
    class_label: ClassLabel
    offset_days: int | None
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise ValueError(f"sample {self.sample_id}: pixels must be a non-empty 2-d grid")
        if float(px.min()) < 0.0 or float(px.max()) > 1.0:
            raise ValueError(f"sample {self.sample_id}: pixel values must lie in [0, 1]")
        if self.offset_days is not None and self.class_label is not ClassLabel.COVID19:
            raise ValueError(f"sample {self.sample_id}: offset_days only applies to covid rows")
        self.pixels = px


def _bilinear_resize(img: np.ndarray, out_rows: int, out_cols: int) -> np.ndarray:
    in_rows, in_cols = img.shape
    if (in_rows, in_cols) == (out_rows, out_cols):
        return img.copy()
    # Pixel-center convention: output center (i + .5) maps to input (i + .5) * scale.
    rr = np.clip((np.arange(out_rows) + 0.5) * (in_rows / out_rows) - 0.5, 0.0, in_rows - 1.0)
    cc = np.clip((np.arange(out_cols) + 0.5) * (in_cols / out_cols) - 0.5, 0.0, in_cols - 1.0)
    r0 = np.floor(rr).astype(np.intp)
    c0 = np.floor(cc).astype(np.intp)
    r1 = np.minimum(r0 + 1, in_rows - 1)
    c1 = np.minimum(c0 + 1, in_cols - 1)
    fr = (rr - r0)[:, None]
    fc = (cc - c0)[None, :]
    top = img[np.ix_(r0, c0)] * (1.0 - fc) + img[np.ix_(r0, c1)] * fc
    bot = img[np.ix_(r1, c0)] * (1.0 - fc) + img[np.ix_(r1, c1)] * fc
    return top * (1.0 - fr) + bot * fr


_SIXTEEN_BIT_MODES = ("I;16", "I;16B", "I;16L", "I;16N", "I")


def ingest_image(path, target_size: tuple[int, int] = (400, 400)) -> np.ndarray:
    """Decode, normalize to [0, 1], and resize one image.

    Parameters
    ----------
    path : path-like
        An 8- or 16-bit raster file with 1 or 3 channels.
    target_size : (rows, cols)
        Output grid shape, bilinear resampling.

    Returns
    -------
    ndarray of float64, shape ``target_size``, values in [0, 1].
    """
    path = Path(path)
    rows, cols = int(target_size[0]), int(target_size[1])
    if rows < 1 or cols < 1:
        raise ValueError(f"target_size must be positive, got {target_size}")
    try:
        with Image.open(path) as img:
            img.load()
            if img.width == 0 or img.height == 0:
                raise IngestionError(f"zero-dimension image: {path}")
            if img.mode == "1":
                img = img.convert("L")
            elif img.mode == "P":
                img = img.convert("RGB")
            elif img.mode == "LA":
                img = img.convert("L")
            elif img.mode in ("RGBA", "CMYK", "YCbCr"):
                img = img.convert("RGB")
            mode = img.mode
            arr = np.asarray(img, dtype=np.float64)
    except IngestionError:
        raise
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as exc:
        raise IngestionError(f"cannot decode image {path}: {exc}") from exc

    if mode == "L":
        gray = arr / 255.0
    elif mode == "RGB":
        gray = (0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]) / 255.0
    elif mode in _SIXTEEN_BIT_MODES:
        gray = arr / 65535.0
    else:
        raise IngestionError(f"unsupported image mode {mode!r}: {path}")
    if gray.ndim != 2 or gray.size == 0:
        raise IngestionError(f"zero-dimension image: {path}")
    return _bilinear_resize(gray, rows, cols)


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def load_samples(manifest: Manifest, image_size: int = 400, jobs: int = 1) -> list[ImageSample]:
    """Ingest every manifest entry; raises on the first failure."""

    def one(entry):
        px = ingest_image(manifest.resolve_path(entry), (image_size, image_size))
        return ImageSample(entry.sample_id, entry.patient_id, entry.class_label,
                           entry.offset_days, px)

    return _map_jobs(one, manifest.entries, jobs)


def write_normalized_store(manifest: Manifest, out_dir, image_size: int = 400,
                           jobs: int = 1) -> tuple[Manifest, list[dict]]:
    """Materialize a normalized image store under ``out_dir``.

    Each successfully ingested image is written to ``images/<sample_id>.png``
    as 16-bit grayscale, and a manifest copy with store-relative paths is
    written to ``manifest.csv``. Failing entries are skipped and reported in
    the returned failure list (sample_id, path, error); re-running over an
    existing store rewrites identical bytes.
    """
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)

    def one(entry):
        try:
            px = ingest_image(manifest.resolve_path(entry), (image_size, image_size))
        except (IngestionError, ValueError) as exc:
            return entry, None, str(exc)
        return entry, px, None

    kept: list[ManifestEntry] = []
    failures: list[dict] = []
    for entry, px, err in _map_jobs(one, manifest.entries, jobs):
        if px is None:
            failures.append({"sample_id": entry.sample_id,
                             "image_path": str(entry.image_path), "error": err})
            continue
        rel = f"images/{entry.sample_id}.png"
        coded = np.round(px * 65535.0).astype(np.uint16)
        Image.fromarray(coded).save(out_dir / rel)
        kept.append(ManifestEntry(entry.sample_id, entry.patient_id, entry.class_label,
                                  entry.offset_days, rel, entry.source))
    store = Manifest(kept, root=out_dir)
    save_manifest(store, out_dir / "manifest.csv")
    return store, failures


def _sorted_class_groups(manifest: Manifest) -> list[tuple[ClassLabel, list[ManifestEntry]]]:
    # Fixed class order and id-sorted groups make every seeded draw reproducible.
    groups = manifest.by_class()
    return [(label, sorted(groups[label], key=lambda e: e.sample_id))
            for label in CLASS_ORDER if label in groups]


def balance_subsample(manifest: Manifest, per_class: int, seed: int) -> Manifest:
    """Uniform without-replacement subsample down to ``per_class`` per class.

    Classes already at ``per_class`` pass through unchanged. Output entries
    are ordered by class, then sample_id.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    rng = np.random.default_rng(seed)
    picked: list[ManifestEntry] = []
    for label, group in _sorted_class_groups(manifest):
        if len(group) < per_class:
            raise InsufficientSamplesError(
                f"class {label.value}: {len(group)} samples, need {per_class}"
            )
        if len(group) == per_class:
            chosen = group
        else:
            idx = rng.choice(len(group), size=per_class, replace=False)
            chosen = [group[i] for i in sorted(idx)]
        picked.extend(chosen)
    return Manifest(picked, root=manifest.root)


@dataclass
class FoldPlan:
    """Assignment of sample ids to folds 0..k-1."""

    k: int
    assignment: dict[str, int]
    seed: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        for sid, fold in self.assignment.items():
            if not 0 <= fold < self.k:
                raise ValueError(f"sample {sid}: fold {fold} outside 0..{self.k - 1}")

    def test_ids(self, fold: int) -> list[str]:
        return sorted(s for s, f in self.assignment.items() if f == fold)

    def train_ids(self, fold: int) -> list[str]:
        return sorted(s for s, f in self.assignment.items() if f != fold)

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for f in self.assignment.values():
            sizes[f] += 1
        return sizes

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "fold"])
            for sid in sorted(self.assignment):
                writer.writerow([sid, self.assignment[sid]])

    @classmethod
    def load_csv(cls, path) -> "FoldPlan":
        assignment = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["sample_id", "fold"]:
                raise ManifestError(f"{path}: bad fold plan header {header!r}")
            for row in reader:
                if not row:
                    continue
                assignment[row[0].strip()] = int(row[1])
        k = max(assignment.values()) + 1 if assignment else 1
        return cls(k=k, assignment=assignment)


def stratified_kfold(manifest: Manifest, k: int, seed: int) -> FoldPlan:
    """Seeded stratified k-fold plan; per-class fold counts differ by at most 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    assignment: dict[str, int] = {}
    for label, group in _sorted_class_groups(manifest):
        if len(group) < k:
            raise StratificationError(
                f"class {label.value}: {len(group)} samples cannot fill {k} folds"
            )
        order = rng.permutation(len(group))
        for pos, idx in enumerate(order):
            assignment[group[idx].sample_id] = pos % k
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def holdout_split(manifest: Manifest, train_fraction: float, seed: int
                  ) -> tuple[Manifest, Manifest]:
    """Seeded stratified holdout; per-class train counts use round-half-up."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train: list[ManifestEntry] = []
    test: list[ManifestEntry] = []
    for label, group in _sorted_class_groups(manifest):
        n = len(group)
        n_train = int(math.floor(train_fraction * n + 0.5))
        if n_train < 1 or n_train >= n:
            raise SplitError(
                f"class {label.value}: fraction {train_fraction} leaves an empty side "
                f"({n_train} of {n} in train)"
            )
        order = rng.permutation(n)
        chosen = set(order[:n_train])
        train.extend(group[i] for i in range(n) if i in chosen)
        test.extend(group[i] for i in range(n) if i not in chosen)
    return Manifest(train, root=manifest.root), Manifest(test, root=manifest.root)
