"""IDX file reading, dataset loading and the stratified split protocol.

IDX layout (all integers big-endian)::

    [0:2]  0x0000
    [2]    dtype code, 0x08 = unsigned byte (the only one accepted)
    [3]    rank
    [4:4+4*rank] dimension sizes (u32)
    then prod(dims) payload bytes in row-major order

Files whose name ends in ``.gz`` are transparently decompressed.
"""

from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateClass,
    InvalidParameter,
    LabelOutOfRange,
    MissingFile,
    TrailingBytes,
    TruncatedPayload,
    UnknownMagic,
)
from .tensor import Rng

IMAGE_SIDE = 28

# canonical file stems; a ".gz" variant of each is also looked up
DATASET_FILES = {
    "mnist": {
        "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    },
    "emnist_letters": {
        "train": ("emnist-letters-train-images-idx3-ubyte", "emnist-letters-train-labels-idx1-ubyte"),
        "test": ("emnist-letters-test-images-idx3-ubyte", "emnist-letters-test-labels-idx1-ubyte"),
    },
}
CLASS_COUNTS = {"mnist": 10, "emnist_letters": 26}


@dataclass(frozen=True)
class LabeledImageSet:
    images: np.ndarray  # (N, 28, 28) uint8
    labels: np.ndarray  # (N,) int64
    class_count: int
    name: str = ""

    def __post_init__(self):
        if self.images.ndim != 3 or self.images.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE):
            raise ValueError(f"images must have shape (N, 28, 28), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise LabelOutOfRange(
                f"labels must lie in [0, {self.class_count}), got "
                f"[{self.labels.min()}, {self.labels.max()}]"
            )

    def __len__(self):
        return len(self.labels)

    def subset(self, indices) -> "LabeledImageSet":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledImageSet(self.images[indices], self.labels[indices], self.class_count, self.name)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: Fraction = Fraction(1, 5)
    validation_fraction: Fraction = Fraction(1, 10)
    seed: int = 0

    def __post_init__(self):
        for name in ("test_fraction", "validation_fraction"):
            value = Fraction(getattr(self, name))
            if not 0 < value < 1:
                raise InvalidParameter(f"{name} must lie strictly between 0 and 1, got {value}")
            object.__setattr__(self, name, value)


def parse_idx(data: bytes) -> np.ndarray:
    """Decode an unsigned-byte IDX buffer into an array of its declared shape."""
    if len(data) < 4:
        raise TruncatedPayload(f"IDX header needs 4 bytes, got {len(data)}")
    zero, dtype_code, rank = struct.unpack(">HBB", data[:4])
    if zero != 0 or dtype_code != 0x08 or rank == 0:
        raise UnknownMagic(f"unsupported IDX magic 0x{data[:4].hex()}")
    header_len = 4 + 4 * rank
    if len(data) < header_len:
        raise TruncatedPayload(f"IDX header declares rank {rank} but the buffer ends early")
    dims = struct.unpack(f">{rank}I", data[4:header_len])
    size = int(np.prod(dims, dtype=np.int64))
    available = len(data) - header_len
    if available < size:
        raise TruncatedPayload(f"declared {dims} needs {size} bytes, only {available} present")
    if available > size:
        raise TrailingBytes(f"{available - size} bytes after the declared payload")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=header_len).reshape(dims).copy()


def encode_idx(array: np.ndarray) -> bytes:
    """Inverse of :func:`parse_idx` for uint8 arrays."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">HBB", 0, 0x08, array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    return header + array.tobytes()


def read_idx(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such IDX file: {path}")
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return parse_idx(fh.read())
    return parse_idx(path.read_bytes())


def _locate(source_dir: Path, stem: str) -> Path:
    for candidate in (source_dir / stem, source_dir / f"{stem}.gz"):
        if candidate.is_file():
            return candidate
    raise MissingFile(f"neither {stem} nor {stem}.gz found in {source_dir}")


def load_dataset(name: str, source_dir) -> LabeledImageSet:
    """Load train and test portions of ``name`` and concatenate them.

    EMNIST Letters labels (1..26 on disk) are shifted to 0..25 and its
    images, stored transposed on disk, are flipped back to the upright
    MNIST orientation.
    """
    if name not in DATASET_FILES:
        raise InvalidParameter(f"unknown dataset {name!r}; expected one of {sorted(DATASET_FILES)}")
    source_dir = Path(source_dir)
    images, labels = [], []
    for portion in ("train", "test"):
        image_stem, label_stem = DATASET_FILES[name][portion]
        imgs = read_idx(_locate(source_dir, image_stem))
        labs = read_idx(_locate(source_dir, label_stem))
        if imgs.ndim != 3 or imgs.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE) or labs.ndim != 1:
            raise TruncatedPayload(f"{name}/{portion}: unexpected shapes {imgs.shape}, {labs.shape}")
        if len(imgs) != len(labs):
            raise TruncatedPayload(f"{name}/{portion}: {len(imgs)} images vs {len(labs)} labels")
        images.append(imgs)
        labels.append(labs.astype(np.int64))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    class_count = CLASS_COUNTS[name]
    if name == "emnist_letters":
        labels = labels - 1
        images = np.ascontiguousarray(images.transpose(0, 2, 1))
    if labels.min() < 0 or labels.max() >= class_count:
        raise LabelOutOfRange(f"{name}: labels span [{labels.min()}, {labels.max()}] after shift")
    return LabeledImageSet(images, labels, class_count, name)


def allocate_test_counts(class_sizes, test_fraction) -> np.ndarray:
    """Per-class test counts summing to ``ceil(test_fraction * N)``.

    Every class first gets ``floor(f * n_c)``; the leftover samples go to
    the classes with the largest fractional remainders (lower class index
    first on ties). Each class ends within one sample of ``f * n_c``, and
    exactly divisible classes get exactly ``f * n_c``.
    """
    f = Fraction(test_fraction)
    sizes = [int(n) for n in class_sizes]
    total = math.ceil(f * sum(sizes))
    exact = [f * n for n in sizes]
    counts = [math.floor(e) for e in exact]
    leftover = total - sum(counts)
    by_remainder = sorted(range(len(sizes)), key=lambda c: (-(exact[c] - counts[c]), c))
    for c in by_remainder[:leftover]:
        counts[c] += 1
    return np.array(counts, dtype=np.int64)


def stratified_split_indices(labels: np.ndarray, class_count: int, spec: SplitSpec):
    """Index arrays ``(train, test)`` for a per-class stratified split.

    Each class is shuffled with its own seeded stream and its first
    ``allocate_test_counts(...)[c]`` indices go to test. Both index arrays
    are returned sorted.
    """
    labels = np.asarray(labels)
    sizes = np.bincount(labels, minlength=class_count)[:class_count]
    n_test = allocate_test_counts(sizes, spec.test_fraction)
    rng = Rng(spec.seed, "stratified_split")
    train, test = [], []
    for c in range(class_count):
        if sizes[c] < 5 or n_test[c] == 0 or n_test[c] == sizes[c]:
            raise DegenerateClass(f"class {c} has {sizes[c]} samples, too few to stratify")
        members = rng.child(f"class{c}").shuffle(np.flatnonzero(labels == c))
        test.append(members[:n_test[c]])
        train.append(members[n_test[c]:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(dataset: LabeledImageSet, spec: SplitSpec):
    train_idx, test_idx = stratified_split_indices(dataset.labels, dataset.class_count, spec)
    return dataset.subset(train_idx), dataset.subset(test_idx)


def validation_indices(n: int, spec: SplitSpec):
    """``(fit, val)`` positions: one seeded shuffle, then the trailing fraction is held out."""
    if n <= 0:
        raise InvalidParameter("cannot carve a validation set from an empty training set")
    order = Rng(spec.seed, "validation_carve").shuffle(n)
    n_fit = int((1 - spec.validation_fraction) * n)  # floor, like a fit-time split
    return order[:n_fit], order[n_fit:]


def carve_validation(train: LabeledImageSet, spec: SplitSpec):
    fit_idx, val_idx = validation_indices(len(train), spec)
    return train.subset(fit_idx), train.subset(val_idx)
