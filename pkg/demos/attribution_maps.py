"""
Attribution maps
================

Map what a trained network responds to back onto the 28x28 grid: the input
gradient for one image, and first-layer weight mass per input.
"""

import tempfile
from pathlib import Path

import numpy as np

from edgemlp import MlpConfig, TrainConfig, init_model, saliency, train
from edgemlp.cli import split_cache, write_pgm
from edgemlp.features import featurize_batch
from edgemlp.training import weight_energy_map
from glyphs import ascii_image, demo_dataset

ds = demo_dataset(2000)
features, labels = featurize_batch(ds)
# faster-tracking batch-norm averages suit a small synthetic run (see train_and_evaluate.py)
parts = split_cache(features, labels, ds.class_count, seed=1)
model, _ = train(*parts["fit"], *parts["val"], init_model(MlpConfig(output_dim=ds.class_count, bn_momentum=0.9), 1),
                 TrainConfig(batch_size=32, max_epochs=6, seed=1))

# gradient of the winning logit with respect to both feature channels
x, y = parts["test"][0][0], parts["test"][1][0]
ax, ay = saliency(model, x)
print(f"true label {y}; saliency on the gx channel:")
print(ascii_image(ax))

# first-layer weight mass is input-independent
wx, wy = weight_energy_map(model)
print(f"\nweight mass: gx channel {wx.sum():.1f}, gy channel {wy.sum():.1f}")

out = Path(tempfile.mkdtemp())
for name, m in (("saliency_gx", ax), ("saliency_gy", ay), ("weights_gx", wx), ("weights_gy", wy)):
    write_pgm(out / f"{name}.pgm", m)
print("graymaps written to", out)
