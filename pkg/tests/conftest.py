import os
from pathlib import Path

import numpy as np
import pytest

from edgemlp.idx import encode_idx


def synthetic_glyphs(n, class_count=10, seed=0):
    """Stroke images whose class sets the stroke angle; position and thickness vary.

    A learnable stand-in for handwritten glyphs when the real IDX files
    are not available.
    """
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
        width = rng.uniform(0.8, 1.8)
        stroke = np.clip(width + 0.5 - dist, 0, 1) * (along < 9)
        images[i] = np.round(255 * stroke).astype(np.uint8)
    return images, labels.astype(np.int64)


def write_idx_dataset(directory, name, train, test, gz=False):
    """Write (images, labels) pairs under the canonical file names of ``name``."""
    from edgemlp.idx import DATASET_FILES

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for portion, (images, labels) in (("train", train), ("test", test)):
        for stem, arr in zip(DATASET_FILES[name][portion], (images, labels)):
            data = encode_idx(arr)
            if gz:
                import gzip

                (directory / f"{stem}.gz").write_bytes(gzip.compress(data))
            else:
                (directory / stem).write_bytes(data)


@pytest.fixture(scope="session")
def glyphs():
    return synthetic_glyphs(600, 10, seed=1)


@pytest.fixture(scope="session")
def data_dir():
    """Directory holding the real IDX files, from EDGEMLP_DATA_DIR."""
    value = os.environ.get("EDGEMLP_DATA_DIR")
    return Path(value) if value else None


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
