"""IDX container parsing, training-data subsets, and minibatch serving.

The IDX layout is bit-exact: 4-byte big-endian magic (0x00000803 for images,
0x00000801 for labels), big-endian u32 dimension sizes, then raw unsigned
bytes. Pixels are scaled to [0,1] on load and back to 0..255 on save.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# Disjoint training subsets: the whole pool, two halves, four quarters.
SPLIT_IDS = ("all0", "half0", "half1", "quarter0", "quarter1", "quarter2", "quarter3")
SPLIT_SIZE = {  # split id -> size attribute
    "all0": "all",
    "half0": "half",
    "half1": "half",
    "quarter0": "quarter",
    "quarter1": "quarter",
    "quarter2": "quarter",
    "quarter3": "quarter",
}

STANDARD_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass
class LabeledImageSet:
    """Images [N,1,28,28] in [0,1] plus integer labels and a provenance tag."""

    images: np.ndarray
    labels: np.ndarray
    provenance: str = "train"

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or self.images.shape[1] != 1:
            raise DataError(f"images must be [N,1,H,W], got {self.images.shape}")
        if len(self.labels) != len(self.images):
            raise DataError(
                f"count mismatch: {len(self.images)} images vs {len(self.labels)} labels"
            )
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise DataError("pixel values outside [0,1]")

    def __len__(self) -> int:
        return len(self.images)

    def take(self, indices: np.ndarray, provenance: str | None = None) -> "LabeledImageSet":
        return LabeledImageSet(
            self.images[indices], self.labels[indices], provenance or self.provenance
        )


def _read_be32(buf: bytes, offset: int, what: str) -> int:
    if offset + 4 > len(buf):
        raise FormatError(f"truncated header while reading {what}")
    return struct.unpack_from(">I", buf, offset)[0]


def parse_idx(image_bytes: bytes, label_bytes: bytes, provenance: str = "train") -> LabeledImageSet:
    """Decode an IDX image/label file pair into a LabeledImageSet."""
    magic = _read_be32(image_bytes, 0, "image magic")
    if magic != IMAGE_MAGIC:
        raise FormatError(f"image file magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
    n = _read_be32(image_bytes, 4, "image count")
    rows = _read_be32(image_bytes, 8, "row count")
    cols = _read_be32(image_bytes, 12, "column count")
    payload = image_bytes[16:]
    if len(payload) != n * rows * cols:
        raise FormatError(
            f"image payload holds {len(payload)} bytes, expected {n * rows * cols}"
        )
    images = np.frombuffer(payload, dtype=np.uint8).reshape(n, 1, rows, cols)

    lmagic = _read_be32(label_bytes, 0, "label magic")
    if lmagic != LABEL_MAGIC:
        raise FormatError(f"label file magic 0x{lmagic:08x}, expected 0x{LABEL_MAGIC:08x}")
    ln = _read_be32(label_bytes, 4, "label count")
    lpayload = label_bytes[8:]
    if len(lpayload) != ln:
        raise FormatError(f"label payload holds {len(lpayload)} bytes, expected {ln}")
    if ln != n:
        raise DataError(f"count mismatch: {n} images vs {ln} labels")
    labels = np.frombuffer(lpayload, dtype=np.uint8).astype(np.int64)
    return LabeledImageSet(images.astype(np.float32) / 255.0, labels, provenance)


def serialize_idx(data: LabeledImageSet) -> tuple[bytes, bytes]:
    """Inverse of parse_idx; pixel v -> round(v*255)."""
    n, _, rows, cols = data.images.shape
    header = struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols)
    pixels = np.rint(data.images * 255.0).astype(np.uint8).tobytes()
    lheader = struct.pack(">II", LABEL_MAGIC, n)
    labels = data.labels.astype(np.uint8).tobytes()
    return header + pixels, lheader + labels


def _read_file(path: Path) -> bytes:
    gz = path.with_name(path.name + ".gz")
    if path.exists():
        return path.read_bytes()
    if gz.exists():
        return gzip.decompress(gz.read_bytes())
    raise DataError(f"missing dataset file {path} (also tried {gz.name})")


def load_data_dir(data_dir: str | Path) -> tuple[LabeledImageSet, LabeledImageSet]:
    """Load the four standard-named files from a directory (.gz accepted)."""
    d = Path(data_dir)
    train = parse_idx(
        _read_file(d / STANDARD_FILES["train_images"]),
        _read_file(d / STANDARD_FILES["train_labels"]),
        provenance="train",
    )
    test = parse_idx(
        _read_file(d / STANDARD_FILES["test_images"]),
        _read_file(d / STANDARD_FILES["test_labels"]),
        provenance="test",
    )
    return train, test


def write_idx_pair(data: LabeledImageSet, image_path: Path, label_path: Path) -> None:
    ib, lb = serialize_idx(data)
    image_path.write_bytes(ib)
    label_path.write_bytes(lb)


def subset(data: LabeledImageSet, split_id: str, seed: int) -> LabeledImageSet:
    """Deterministic disjoint subset of the full training pool.

    One seeded permutation is shared by all split ids, then contiguous
    slices are taken, so halves and quarters nest and partition exactly.
    Indices are re-sorted so image order within a subset stays stable.
    """
    if split_id not in SPLIT_IDS:
        raise DataError(f"unknown split id {split_id!r}")
    n = len(data)
    if split_id == "all0":
        return data
    perm = np.random.default_rng(np.random.SeedSequence([seed, 0])).permutation(n)
    if split_id.startswith("half"):
        k = int(split_id[-1])
        lo, hi = (0, n // 2) if k == 0 else (n // 2, n)
    else:
        k = int(split_id[-1])
        lo, hi = (k * n) // 4, ((k + 1) * n) // 4
    idx = np.sort(perm[lo:hi])
    return data.take(idx)


def validation_holdout(
    train: LabeledImageSet, count: int, seed: int
) -> tuple[LabeledImageSet, LabeledImageSet]:
    """Split the training file into a model-training pool and a held-out
    validation set (the source of accuracy measurements and query images)."""
    n = len(train)
    if not 0 < count < n:
        raise DataError(f"validation holdout {count} out of range for {n} examples")
    perm = np.random.default_rng(np.random.SeedSequence([seed, 1])).permutation(n)
    val_idx = np.sort(perm[:count])
    pool_idx = np.sort(perm[count:])
    return train.take(pool_idx, "train"), train.take(val_idx, "validation")


def batches(
    data: LabeledImageSet, batch_size: int, shuffle_seed: int, epoch: int = 0
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled minibatches covering every example exactly once.

    The order is a pure function of (shuffle_seed, epoch); the final batch
    may be short.
    """
    if batch_size < 1:
        raise DataError(f"batch size must be >= 1, got {batch_size}")
    n = len(data)
    perm = np.random.default_rng(np.random.SeedSequence([shuffle_seed, epoch])).permutation(n)
    out = []
    for start in range(0, n, batch_size):
        idx = perm[start : start + batch_size]
        out.append((data.images[idx], data.labels[idx]))
    return out
