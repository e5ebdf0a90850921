"""Embedding datasets: domain types, file formats, splits, synthetic blobs.

Features live as float64 in memory and float32 on disk. Datasets are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"GCDE"
FORMAT_VERSION = 1
UNLABELED = -1

_HEADER = struct.Struct("<4sIQII")  # magic, version, N, D, flags
_FLAG_LABELS = 1
_FLAG_TRUTH = 2
_FLAG_MASK = 4


class EmbeddingIOError(Exception):
    """Base class for embedding-file parse failures."""


class HeaderError(EmbeddingIOError):
    """Magic, version, or header fields are malformed."""


class DimensionError(EmbeddingIOError):
    """File payload does not match the dimensions announced by the header."""


class NonFiniteError(EmbeddingIOError):
    """A feature value is NaN or infinite."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EmbeddingDataset:
    """N feature vectors with optional labels and evaluation ground truth.

    labels uses -1 for unlabeled rows. eval_truth and known_mask are
    evaluation-only side channels: eval_truth holds the generating class of
    every row, known_mask marks rows whose true class is in the labeled
    (known) class set.
    """

    features: np.ndarray
    labels: np.ndarray
    eval_truth: np.ndarray | None = None
    known_mask: np.ndarray | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {feats.shape}")
        n, d = feats.shape
        if n < 1:
            raise ValueError("need at least one instance")
        if d < 2:
            raise ValueError(f"feature dimension must be >= 2, got {d}")
        if not np.all(np.isfinite(feats)):
            r, c = np.argwhere(~np.isfinite(feats))[0]
            raise ValueError(f"non-finite feature at row {r}, col {c}")
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValueError(f"labels must have shape ({n},), got {labels.shape}")
        if np.any(labels < UNLABELED):
            raise ValueError("labels must be >= -1")
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "labels", _frozen(labels))
        if self.eval_truth is not None:
            truth = np.asarray(self.eval_truth, dtype=np.int64)
            if truth.shape != (n,):
                raise ValueError(f"eval_truth must have shape ({n},)")
            if np.any(truth < 0):
                raise ValueError("eval_truth class ids must be >= 0")
            lab = labels >= 0
            if np.any(labels[lab] != truth[lab]):
                i = int(np.nonzero(lab & (labels != truth))[0][0])
                raise ValueError(
                    f"row {i}: label {labels[i]} contradicts eval_truth {truth[i]}"
                )
            object.__setattr__(self, "eval_truth", _frozen(truth))
        if self.known_mask is not None:
            mask = np.asarray(self.known_mask, dtype=bool)
            if mask.shape != (n,):
                raise ValueError(f"known_mask must have shape ({n},)")
            object.__setattr__(self, "known_mask", _frozen(mask))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def known_classes(self) -> np.ndarray:
        """Sorted ids of classes that appear among labeled rows (Y_known)."""
        return np.unique(self.labels[self.labels >= 0])

    @property
    def novel_classes(self) -> np.ndarray:
        """Sorted ids of ground-truth classes absent from the labeled rows."""
        if self.eval_truth is None:
            raise ValueError("novel_classes requires eval_truth")
        return np.setdiff1d(np.unique(self.eval_truth), self.known_classes)


@dataclass(frozen=True)
class SplitSpec:
    """Known-class / labeled-instance split parameters."""

    known_class_fraction: float = 0.5
    labeled_instance_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("known_class_fraction", "labeled_instance_fraction"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must be in (0, 1], got {v}")


@dataclass(frozen=True)
class SynthSpec:
    """Gaussian-mixture generator parameters."""

    num_classes: int
    points_per_class: int
    dim: int
    center_separation: float
    cluster_stddev: float
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.points_per_class < 2:
            raise ValueError("points_per_class must be >= 2")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not self.center_separation > 0:
            raise ValueError("center_separation must be positive")
        if not self.cluster_stddev > 0:
            raise ValueError("cluster_stddev must be positive")


def _seed_entropy(seed: int) -> int:
    # SeedSequence entropy must be nonnegative; map negatives reproducibly.
    return seed & 0xFFFFFFFFFFFFFFFF


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_seed_entropy(seed), *key]))


# ---------------------------------------------------------------------------
# Binary format
#
# magic "GCDE" | version u32 | N u64 | D u32 | flags u32
# N*D float32 row-major LE | [int32 labels] [int32 eval_truth] [u8 known_mask]
# ---------------------------------------------------------------------------


def _binary_bytes(ds: EmbeddingDataset) -> bytes:
    flags = _FLAG_LABELS
    if ds.eval_truth is not None:
        flags |= _FLAG_TRUTH
    if ds.known_mask is not None:
        flags |= _FLAG_MASK
    out = io.BytesIO()
    out.write(_HEADER.pack(MAGIC, FORMAT_VERSION, ds.n, ds.dim, flags))
    out.write(ds.features.astype("<f4").tobytes())
    out.write(ds.labels.astype("<i4").tobytes())
    if ds.eval_truth is not None:
        out.write(ds.eval_truth.astype("<i4").tobytes())
    if ds.known_mask is not None:
        out.write(ds.known_mask.astype(np.uint8).tobytes())
    return out.getvalue()


def _parse_binary(raw: bytes, path: str) -> EmbeddingDataset:
    if len(raw) < _HEADER.size:
        raise HeaderError(f"{path}: truncated header, {len(raw)} bytes at byte 0")
    magic, version, n, d, flags = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise HeaderError(f"{path}: bad magic {magic!r} at byte 0")
    if version != FORMAT_VERSION:
        raise HeaderError(f"{path}: unsupported version {version} at byte 4")
    if n < 1:
        raise HeaderError(f"{path}: N={n} at byte 8, need N >= 1")
    if d < 2:
        raise HeaderError(f"{path}: D={d} at byte 16, need D >= 2")
    if flags & ~(_FLAG_LABELS | _FLAG_TRUTH | _FLAG_MASK):
        raise HeaderError(f"{path}: unknown flag bits 0x{flags:x} at byte 20")
    expected = _HEADER.size + n * d * 4
    if flags & _FLAG_LABELS:
        expected += n * 4
    if flags & _FLAG_TRUTH:
        expected += n * 4
    if flags & _FLAG_MASK:
        expected += n
    if len(raw) != expected:
        raise DimensionError(
            f"{path}: file is {len(raw)} bytes, expected {expected} "
            f"for N={n}, D={d}, flags=0x{flags:x}"
        )
    off = _HEADER.size
    feats = np.frombuffer(raw, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    bad = ~np.isfinite(feats)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonFiniteError(
            f"{path}: non-finite value at row {r}, col {c} "
            f"(byte {off + (int(r) * d + int(c)) * 4})"
        )
    off += n * d * 4
    labels = np.full(n, UNLABELED, dtype=np.int64)
    truth = mask = None
    if flags & _FLAG_LABELS:
        labels = np.frombuffer(raw, dtype="<i4", count=n, offset=off).astype(np.int64)
        off += n * 4
    if flags & _FLAG_TRUTH:
        truth = np.frombuffer(raw, dtype="<i4", count=n, offset=off).astype(np.int64)
        off += n * 4
    if flags & _FLAG_MASK:
        mask = np.frombuffer(raw, dtype=np.uint8, count=n, offset=off).astype(bool)
    return EmbeddingDataset(
        features=feats.astype(np.float64), labels=labels, eval_truth=truth, known_mask=mask
    )


# ---------------------------------------------------------------------------
# CSV format: header "label,truth,known,f0..f{D-1}", empty cells for absent
# optional columns. Floats are written with 9 significant digits so float32
# values round-trip exactly.
# ---------------------------------------------------------------------------


def _csv_text(ds: EmbeddingDataset) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["label", "truth", "known"] + [f"f{j}" for j in range(ds.dim)])
    feats32 = ds.features.astype(np.float32)
    for i in range(ds.n):
        row = [str(int(ds.labels[i]))]
        row.append("" if ds.eval_truth is None else str(int(ds.eval_truth[i])))
        row.append("" if ds.known_mask is None else str(int(ds.known_mask[i])))
        row.extend(f"{v:.9g}" for v in feats32[i])
        w.writerow(row)
    return out.getvalue()


def _parse_csv(text: str, path: str) -> EmbeddingDataset:
    lines = text.splitlines()
    if not lines:
        raise HeaderError(f"{path}: empty file at line 1")
    header = lines[0].split(",")
    if header[:3] != ["label", "truth", "known"]:
        raise HeaderError(f"{path}: line 1: header must start with label,truth,known")
    d = len(header) - 3
    if d < 2:
        raise HeaderError(f"{path}: line 1: need at least 2 feature columns, got {d}")
    if header[3:] != [f"f{j}" for j in range(d)]:
        raise HeaderError(f"{path}: line 1: feature columns must be f0..f{d - 1}")
    rows = [ln for ln in lines[1:] if ln]
    if not rows:
        raise DimensionError(f"{path}: line 2: no data rows")
    n = len(rows)
    feats = np.empty((n, d), dtype=np.float64)
    labels = np.empty(n, dtype=np.int64)
    truth_cells: list[str] = []
    mask_cells: list[str] = []
    for i, ln in enumerate(rows):
        lineno = i + 2
        cells = ln.split(",")
        if len(cells) != 3 + d:
            raise DimensionError(
                f"{path}: line {lineno}: expected {3 + d} cells, got {len(cells)}"
            )
        try:
            labels[i] = int(cells[0]) if cells[0] else UNLABELED
        except ValueError:
            raise EmbeddingIOError(
                f"{path}: line {lineno}: bad label {cells[0]!r}"
            ) from None
        truth_cells.append(cells[1])
        mask_cells.append(cells[2])
        for j, cell in enumerate(cells[3:]):
            try:
                v = float(cell)
            except ValueError:
                raise EmbeddingIOError(
                    f"{path}: line {lineno}: bad float {cell!r} in column f{j}"
                ) from None
            if not math.isfinite(v):
                raise NonFiniteError(
                    f"{path}: non-finite value at row {i}, col {j} (line {lineno})"
                )
            feats[i, j] = v

    def column(cells: list[str], name: str, conv):
        present = [c != "" for c in cells]
        if not any(present):
            return None
        if not all(present):
            lineno = present.index(False) + 2
            raise EmbeddingIOError(
                f"{path}: line {lineno}: column {name!r} present in some rows, empty here"
            )
        try:
            return np.array([conv(c) for c in cells])
        except ValueError as e:
            raise EmbeddingIOError(f"{path}: bad value in column {name!r}: {e}") from None

    truth = column(truth_cells, "truth", int)
    mask = column(mask_cells, "known", lambda c: bool(int(c)))
    # Disk precision is float32; round through it so csv and binary agree.
    feats = feats.astype(np.float32).astype(np.float64)
    return EmbeddingDataset(features=feats, labels=labels, eval_truth=truth, known_mask=mask)


def save_embeddings(dataset: EmbeddingDataset, path: str | Path, format: str = "binary") -> None:
    """Write a dataset to disk in the GCDE binary or CSV format."""
    path = Path(path)
    if format == "binary":
        path.write_bytes(_binary_bytes(dataset))
    elif format == "csv":
        path.write_text(_csv_text(dataset), encoding="utf-8")
    else:
        raise ValueError(f"unknown format {format!r}, expected 'binary' or 'csv'")


def load_embeddings(path: str | Path, format: str = "binary") -> EmbeddingDataset:
    """Read a dataset written by save_embeddings; row order is preserved."""
    path = Path(path)
    if format == "binary":
        return _parse_binary(path.read_bytes(), str(path))
    if format == "csv":
        return _parse_csv(path.read_text(encoding="utf-8"), str(path))
    raise ValueError(f"unknown format {format!r}, expected 'binary' or 'csv'")


def make_split(dataset: EmbeddingDataset, spec: SplitSpec) -> EmbeddingDataset:
    """Partition a fully ground-truthed dataset into labeled/unlabeled halves.

    ceil(known_class_fraction * num_classes) classes become the known set;
    within each known class, ceil(labeled_instance_fraction * class_size)
    instances keep their label and the rest become unlabeled. Novel-class
    instances are never labeled. known_mask marks true-class membership in
    the known set for every row.
    """
    if dataset.eval_truth is None:
        raise ValueError("make_split requires eval_truth for all rows")
    classes = np.unique(dataset.eval_truth)
    if classes.size < 2:
        raise ValueError(f"need at least 2 classes to split, got {classes.size}")
    rng = _rng(spec.seed, 0x5917)
    n_known = math.ceil(spec.known_class_fraction * classes.size)
    known = np.sort(rng.permutation(classes)[:n_known])
    labels = np.full(dataset.n, UNLABELED, dtype=np.int64)
    for cls in known:
        idx = np.nonzero(dataset.eval_truth == cls)[0]
        n_lab = math.ceil(spec.labeled_instance_fraction * idx.size)
        chosen = rng.permutation(idx)[:n_lab]
        labels[chosen] = cls
    mask = np.isin(dataset.eval_truth, known)
    return EmbeddingDataset(
        features=dataset.features,
        labels=labels,
        eval_truth=dataset.eval_truth,
        known_mask=mask,
    )


def generate_synthetic(spec: SynthSpec) -> EmbeddingDataset:
    """Sample isotropic Gaussian blobs with pairwise-separated centers.

    eval_truth records the generating component; all rows start unlabeled.
    Deterministic given spec.seed.
    """
    rng = _rng(spec.seed, 0x5b0b)
    centers = _place_centers(spec, rng)
    n = spec.num_classes * spec.points_per_class
    feats = np.empty((n, spec.dim), dtype=np.float64)
    truth = np.empty(n, dtype=np.int64)
    for k in range(spec.num_classes):
        lo = k * spec.points_per_class
        hi = lo + spec.points_per_class
        feats[lo:hi] = centers[k] + spec.cluster_stddev * rng.standard_normal(
            (spec.points_per_class, spec.dim)
        )
        truth[lo:hi] = k
    return EmbeddingDataset(
        features=feats, labels=np.full(n, UNLABELED, dtype=np.int64), eval_truth=truth
    )


def _place_centers(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    # Rejection-sample centers at the smallest Gaussian scale whose typical
    # pairwise distance clears the separation, so the requested separation is
    # tight rather than vastly exceeded. The scale gets a few growth retries,
    # but crowded configurations in low dim exhaust the budget and fail.
    sep = spec.center_separation
    base = 1.15 * sep / math.sqrt(2.0 * spec.dim)
    for attempt in range(8):
        scale = base * (1.2**attempt)
        centers = [rng.standard_normal(spec.dim) * scale]
        tries = 0
        while len(centers) < spec.num_classes and tries < 200 * spec.num_classes:
            cand = rng.standard_normal(spec.dim) * scale
            dists = np.linalg.norm(np.asarray(centers) - cand, axis=1)
            if np.all(dists >= sep):
                centers.append(cand)
            tries += 1
        if len(centers) == spec.num_classes:
            return np.asarray(centers)
    raise ValueError(
        f"cannot place {spec.num_classes} centers with separation {sep} in dim {spec.dim}"
    )
