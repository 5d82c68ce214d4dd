"""
Signed Sobel features
=====================

Turn one 28x28 image into the 1568-value vector the classifier consumes,
and look at what each stage produces.
"""

import numpy as np

from edgemlp import featurize, gradient_diagnostics, minmax_normalize, sobel_derivatives
from glyphs import ascii_image, demo_dataset

ds = demo_dataset(20)
image = ds.images[0].astype(np.float32) / np.float32(255)
print(f"label {ds.labels[0]} from {ds.name}")
print(ascii_image(image))

# raw derivatives keep their sign: a dark-to-bright transition is positive
pair = sobel_derivatives(image)
print(f"\ngx range [{pair.gx.min():.2f}, {pair.gx.max():.2f}], gy range [{pair.gy.min():.2f}, {pair.gy.max():.2f}]")
print("horizontal derivative, absolute value:")
print(ascii_image(pair.gx))

# each channel is min-max scaled on its own, so zero maps to a mid-gray level
gx01 = minmax_normalize(pair.gx)
print(f"\nscaled gx: min {gx01.min():.3f}, max {gx01.max():.6f}, value at a flat pixel {gx01[0, 0]:.3f}")

# the feature vector is gx then gy, each in row-major order
x = featurize(image)
print(f"feature vector: {x.shape}, {x.dtype}, first half equals scaled gx: {np.array_equal(x[:784], gx01.ravel())}")

# magnitude and orientation are diagnostics only, not model inputs
diag = gradient_diagnostics(pair)
strongest = np.unravel_index(np.argmax(diag.magnitude), diag.magnitude.shape)
print(f"strongest edge at {strongest}: magnitude {diag.magnitude[strongest]:.2f}, "
      f"orientation {np.degrees(diag.orientation[strongest]):.1f} deg")

# a blank image has no edges at all; the epsilon guard turns it into zeros
print("blank image features all zero:", not featurize(np.zeros((28, 28), dtype=np.float32)).any())
