"""Shared data source for the demos.

Real IDX files are used when ``EDGEMLP_DATA_DIR`` points at them; otherwise
a synthetic set of oriented strokes stands in for handwriting.
"""

import os

import numpy as np

from edgemlp import load_dataset
from edgemlp.idx import LabeledImageSet


def strokes(n, class_count=10, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % class_count
    rng.shuffle(labels)
    yy, xx = np.mgrid[0:28, 0:28].astype(np.float64)
    images = np.zeros((n, 28, 28), dtype=np.uint8)
    for i, c in enumerate(labels):
        angle = np.pi * c / class_count + rng.normal(0, 0.04)
        cy, cx = 14 + rng.normal(0, 1.5, size=2)
        dist = np.abs((xx - cx) * np.sin(angle) - (yy - cy) * np.cos(angle))
        along = np.abs((xx - cx) * np.cos(angle) + (yy - cy) * np.sin(angle))
        stroke = np.clip(rng.uniform(0.8, 1.8) + 0.5 - dist, 0, 1) * (along < 9)
        images[i] = np.round(255 * stroke).astype(np.uint8)
    return LabeledImageSet(images, labels, class_count, name="strokes")


def demo_dataset(n=2000):
    data_dir = os.environ.get("EDGEMLP_DATA_DIR")
    if data_dir:
        return load_dataset("mnist", data_dir)
    return strokes(n)


def ascii_image(values, ramp=" .:-=+*#%@"):
    v = np.abs(np.asarray(values, dtype=np.float64))
    v = v / v.max() if v.max() > 0 else v
    idx = np.minimum((v * len(ramp)).astype(int), len(ramp) - 1)
    return "\n".join("".join(ramp[i] for i in row) for row in idx)
