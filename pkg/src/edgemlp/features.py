"""Signed Sobel edge features.

Each 28x28 image (scaled to [0, 1]) is cross-correlated with the two 3x3
Sobel kernels, each derivative channel is min-max scaled on its own, and
the two channels are flattened channel-major into a 1568-vector::

    x[0:784]    = row-major normalized d/dx
    x[784:1568] = row-major normalized d/dy

Borders use reflect-101 padding (``dcb|abcd|cba``), the default of the
common OpenCV Sobel call. Derivatives are accumulated in float64 in a
fixed kernel order and stored as float32.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, BadImageShape, NonFiniteInput, TruncatedPayload
from .idx import IMAGE_SIDE, LabeledImageSet

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()
EPSILON = 1e-8
PIXELS = IMAGE_SIDE * IMAGE_SIDE
FEATURE_DIM = 2 * PIXELS

CACHE_MAGIC = b"EMFC1\0"
_CACHE_HEADER = struct.Struct("<6sIIB")


@dataclass(frozen=True)
class GradientPair:
    gx: np.ndarray
    gy: np.ndarray


@dataclass(frozen=True)
class NormalizedEdgeMap:
    gx_hat: np.ndarray
    gy_hat: np.ndarray
    epsilon: float = EPSILON


@dataclass(frozen=True)
class EdgeDiagnostics:
    magnitude: np.ndarray
    orientation: np.ndarray


def _check_finite(images: np.ndarray):
    if not np.all(np.isfinite(images)):
        bad = np.argwhere(~np.isfinite(images))[0]
        raise NonFiniteInput(f"non-finite pixel at {tuple(int(i) for i in bad)}")


def correlate3x3(images: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Cross-correlate the last two axes of ``images`` with a 3x3 kernel (reflect-101 borders)."""
    images = np.asarray(images, dtype=np.float64)
    h, w = images.shape[-2:]
    pad = [(0, 0)] * (images.ndim - 2) + [(1, 1), (1, 1)]
    padded = np.pad(images, pad, mode="reflect")
    out = np.zeros(images.shape, dtype=np.float64)
    for di in range(3):
        for dj in range(3):
            weight = kernel[di, dj]
            if weight:
                out += weight * padded[..., di:di + h, dj:dj + w]
    return out


def _sobel(images: np.ndarray):
    images = np.asarray(images)
    if images.shape[-1] < 2 or images.shape[-2] < 2:
        raise BadImageShape(f"images need at least 2x2 pixels, got {images.shape[-2:]}")
    _check_finite(images)
    gx = correlate3x3(images, SOBEL_X).astype(np.float32)
    gy = correlate3x3(images, SOBEL_Y).astype(np.float32)
    return gx, gy


def sobel_derivatives(image: np.ndarray) -> GradientPair:
    """Signed horizontal/vertical derivatives; brighter to the right (below) gives positive gx (gy)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise BadImageShape(f"expected a single 2-D image, got shape {image.shape}")
    gx, gy = _sobel(image)
    return GradientPair(gx, gy)


def minmax_normalize(channel: np.ndarray, epsilon: float = EPSILON) -> np.ndarray:
    """Map ``channel`` affinely onto [0, 1) using its own min and max.

    Float inputs keep their dtype (the arithmetic runs in float64 first);
    anything else comes back as float32.
    """
    channel = np.asarray(channel)
    out_dtype = channel.dtype if channel.dtype.kind == "f" else np.float32
    v = channel.astype(np.float64)
    lo, hi = v.min(), v.max()
    return ((v - lo) / (hi - lo + epsilon)).astype(out_dtype)


def _normalize_batch(channels: np.ndarray, epsilon: float = EPSILON) -> np.ndarray:
    v = channels.astype(np.float64)
    lo = v.min(axis=(-2, -1), keepdims=True)
    hi = v.max(axis=(-2, -1), keepdims=True)
    return ((v - lo) / (hi - lo + epsilon)).astype(np.float32)


def normalize_pair(pair: GradientPair, epsilon: float = EPSILON) -> NormalizedEdgeMap:
    return NormalizedEdgeMap(minmax_normalize(pair.gx, epsilon), minmax_normalize(pair.gy, epsilon), epsilon)


def _check_side(shape):
    if tuple(shape[-2:]) != (IMAGE_SIDE, IMAGE_SIDE):
        raise BadImageShape(f"expected 28x28 images, got {tuple(shape[-2:])}")


def featurize(image: np.ndarray) -> np.ndarray:
    """1568-long float32 feature vector for one 28x28 image with values in [0, 1]."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise BadImageShape(f"expected a single 2-D image, got shape {image.shape}")
    _check_side(image.shape)
    return featurize_images(image[None])[0]


def featurize_images(images: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Feature matrix (N, 1568) for a stack of [0, 1]-scaled images."""
    images = np.asarray(images)
    if images.ndim != 3:
        raise BadImageShape(f"expected an (N, 28, 28) stack, got shape {images.shape}")
    _check_side(images.shape)
    out = np.empty((len(images), FEATURE_DIM), dtype=np.float32)
    for start in range(0, len(images), chunk):
        block = images[start:start + chunk]
        try:
            gx, gy = _sobel(block)
        except NonFiniteInput as exc:
            bad = int(np.argwhere(~np.isfinite(block))[0][0]) + start
            raise NonFiniteInput(f"image {bad}: {exc}") from exc
        out[start:start + len(block), :PIXELS] = _normalize_batch(gx).reshape(len(block), -1)
        out[start:start + len(block), PIXELS:] = _normalize_batch(gy).reshape(len(block), -1)
    return out


def featurize_batch(dataset: LabeledImageSet, chunk: int = 4096):
    """``(features, labels)`` for a whole set; pixels are divided by 255 first."""
    out = np.empty((len(dataset), FEATURE_DIM), dtype=np.float32)
    for start in range(0, len(dataset), chunk):
        block = dataset.images[start:start + chunk].astype(np.float32) / np.float32(255)
        out[start:start + len(block)] = featurize_images(block, chunk)
    return out, dataset.labels.copy()


def unflatten(vector: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a 1568-vector back into its two 28x28 channel maps."""
    vector = np.asarray(vector).reshape(2, IMAGE_SIDE, IMAGE_SIDE)
    return vector[0], vector[1]


def gradient_diagnostics(pair: GradientPair) -> EdgeDiagnostics:
    """Gradient magnitude and orientation in (-pi, pi]; orientation is 0 where both derivatives vanish."""
    gx = np.asarray(pair.gx, dtype=np.float64)
    gy = np.asarray(pair.gy, dtype=np.float64)
    magnitude = np.hypot(gx, gy)
    theta = np.arctan2(gy, gx)
    theta = np.where(theta == -np.pi, np.pi, theta)
    theta = np.where((gx == 0) & (gy == 0), 0.0, theta)
    return EdgeDiagnostics(magnitude, theta)


# feature cache: "EMFC1\0", u32 N, u32 D, u8 class_count, N*D f32, N u8 labels (little endian)

def write_feature_cache(path, features: np.ndarray, labels: np.ndarray, class_count: int):
    features = np.ascontiguousarray(features, dtype="<f4")
    labels = np.asarray(labels)
    if features.ndim != 2 or len(features) != len(labels):
        raise ValueError(f"features {features.shape} and labels {labels.shape} disagree")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(_CACHE_HEADER.pack(CACHE_MAGIC, len(features), features.shape[1], class_count))
            fh.write(features.tobytes())
            fh.write(labels.astype(np.uint8).tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_feature_cache(path):
    """Return ``(features, labels, class_count)`` from a cache file."""
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        head = fh.read(_CACHE_HEADER.size)
        if len(head) < _CACHE_HEADER.size:
            raise TruncatedPayload(f"{path}: cache header truncated")
        magic, n, d, class_count = _CACHE_HEADER.unpack(head)
        if magic != CACHE_MAGIC:
            raise BadMagic(f"{path}: not a feature cache (magic {magic!r})")
        expected = _CACHE_HEADER.size + 4 * n * d + n
        if size != expected:
            raise TruncatedPayload(f"{path}: expected {expected} bytes, found {size}")
        features = np.fromfile(fh, dtype="<f4", count=n * d).reshape(n, d)
        labels = np.fromfile(fh, dtype=np.uint8, count=n).astype(np.int64)
    return features.astype(np.float32, copy=False), labels, class_count
