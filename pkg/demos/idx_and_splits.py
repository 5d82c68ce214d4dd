"""
IDX files and stratified splits
===============================

Write a tiny dataset in the IDX container, read it back, and carve it into
fit / validation / test portions that keep every class's share.
"""

import tempfile
from pathlib import Path

import numpy as np

from edgemlp import SplitSpec, carve_validation, load_dataset, parse_idx, stratified_split
from edgemlp.idx import DATASET_FILES, encode_idx
from glyphs import strokes

# an IDX file is a magic number, big-endian dimensions, then raw bytes
blob = encode_idx(np.arange(6, dtype=np.uint8).reshape(2, 3))
print("header bytes:", blob[:4].hex(), "dims:", [int.from_bytes(blob[4 + 4 * i:8 + 4 * i], "big") for i in range(2)])
print(parse_idx(blob))

# lay out a fake MNIST directory under the canonical file names
ds = strokes(700, seed=3)
root = Path(tempfile.mkdtemp())
for portion, sl in (("train", slice(0, 600)), ("test", slice(600, None))):
    images_file, labels_file = DATASET_FILES["mnist"][portion]
    (root / images_file).write_bytes(encode_idx(ds.images[sl]))
    (root / labels_file).write_bytes(encode_idx(ds.labels[sl].astype(np.uint8)))

# the loader concatenates train then test before any splitting
pooled = load_dataset("mnist", root)
print(f"\npooled {len(pooled)} images, per class {pooled.class_counts().tolist()}")

# 80/20 stratified split, then the last 10% of one shuffle of the training part
spec = SplitSpec(seed=0)
train, test = stratified_split(pooled, spec)
fit, val = carve_validation(train, spec)
for name, part in (("fit", fit), ("val", val), ("test", test)):
    print(f"{name:>4}: {len(part):4d}  per class {part.class_counts().tolist()}")

# the same seed gives the same partition every time
again, _ = stratified_split(pooled, spec)
print("repeatable:", np.array_equal(again.images, train.images))
