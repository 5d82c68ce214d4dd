import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from edgemlp.errors import BadImageShape, NonFiniteInput
from edgemlp.features import (
    FEATURE_DIM,
    GradientPair,
    correlate3x3,
    featurize,
    featurize_batch,
    featurize_images,
    gradient_diagnostics,
    minmax_normalize,
    read_feature_cache,
    sobel_derivatives,
    write_feature_cache,
)
from edgemlp.idx import LabeledImageSet

GX = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
GY = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]


def reflect101(i, n):
    if i < 0:
        return -i
    if i >= n:
        return 2 * (n - 1) - i
    return i


def naive_correlate(image, kernel):
    """Quadruple loop over pixels and kernel taps, reflect-101 borders."""
    h, w = len(image), len(image[0])
    out = np.zeros((h, w), dtype=np.float32)
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for kr in range(3):
                for kc in range(3):
                    acc += kernel[kr][kc] * float(image[reflect101(r + kr - 1, h)][reflect101(c + kc - 1, w)])
            out[r, c] = acc
    return out


def random_images(n, seed):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, (n, 28, 28), dtype=np.uint8).astype(np.float32) / np.float32(255)


def test_constant_image_has_zero_derivatives():
    pair = sobel_derivatives(np.full((28, 28), 0.7, dtype=np.float32))
    assert not pair.gx.any() and not pair.gy.any()


def test_unit_step_edge():
    step = np.tile(np.array([0, 0, 1, 1, 1], dtype=np.float32), (5, 1))
    pair = sobel_derivatives(step)
    assert pair.gx[2, 2] == 4.0 and pair.gy[2, 2] == 0.0
    pair_t = sobel_derivatives(step.T)
    assert pair_t.gx[2, 2] == 0.0 and pair_t.gy[2, 2] == 4.0


def test_sign_convention():
    ramp = np.tile(np.linspace(0, 1, 28, dtype=np.float32), (28, 1))
    pair = sobel_derivatives(ramp)
    assert (pair.gx[:, 1:-1] > 0).all()
    pair = sobel_derivatives(ramp.T)
    assert (pair.gy[1:-1, :] > 0).all()


def test_matches_naive_oracle():
    for image in random_images(20, seed=0):
        pair = sobel_derivatives(image)
        np.testing.assert_array_equal(pair.gx, naive_correlate(image, GX))
        np.testing.assert_array_equal(pair.gy, naive_correlate(image, GY))


def test_matches_opencv_default_border():
    cv2 = pytest.importorskip("cv2")
    for image in random_images(5, seed=1):
        pair = sobel_derivatives(image)
        ref_x = cv2.Sobel(image.astype(np.float64), cv2.CV_64F, 1, 0, ksize=3)
        ref_y = cv2.Sobel(image.astype(np.float64), cv2.CV_64F, 0, 1, ksize=3)
        np.testing.assert_allclose(pair.gx, ref_x, atol=1e-6)
        np.testing.assert_allclose(pair.gy, ref_y, atol=1e-6)


def test_separable_form_agrees():
    image = random_images(1, seed=2)[0]
    smooth = np.array([[0, 1, 0], [0, 2, 0], [0, 1, 0]], dtype=np.float64)
    diff = np.array([[0, 0, 0], [-1, 0, 1], [0, 0, 0]], dtype=np.float64)
    two_pass = correlate3x3(correlate3x3(image, smooth).astype(np.float32), diff).astype(np.float32)
    np.testing.assert_allclose(two_pass, sobel_derivatives(image).gx, atol=1e-6)


def test_derivatives_bounded_by_four():
    image = (random_images(1, seed=3)[0] > 0.5).astype(np.float32)
    pair = sobel_derivatives(image)
    assert np.abs(pair.gx).max() <= 4 and np.abs(pair.gy).max() <= 4


def test_non_finite_rejected():
    image = np.zeros((28, 28), dtype=np.float32)
    image[3, 4] = np.nan
    with pytest.raises(NonFiniteInput):
        sobel_derivatives(image)
    stack = np.zeros((3, 28, 28), dtype=np.float32)
    stack[2, 0, 0] = np.inf
    with pytest.raises(NonFiniteInput, match="image 2"):
        featurize_images(stack)


def test_minmax_endpoints():
    out = minmax_normalize(np.array([-4.0, 0.0, 4.0]))
    np.testing.assert_allclose(out, [0, 0.5, 1], atol=1e-7)


def test_minmax_constant_channel_uses_epsilon():
    out = minmax_normalize(np.full((28, 28), 3.25))
    assert out.dtype == np.float64 and not out.any()


def test_minmax_strictly_below_one():
    v = np.random.default_rng(0).normal(size=(28, 28))
    out = minmax_normalize(v)
    assert out.max() == pytest.approx((v.max() - v.min()) / (v.max() - v.min() + 1e-8), abs=0)
    assert out.max() < 1 and out.min() == 0


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)),
       st.floats(0.5, 20), st.floats(-5, 5))
def test_minmax_affine_invariance(v, a, b):
    span = v.max() - v.min()
    if span < 1e-3:
        return
    np.testing.assert_allclose(minmax_normalize(a * v + b), minmax_normalize(v), atol=1e-8 / (a * span) + 1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float32, (28, 28), elements=st.floats(0, 1, width=32)))
def test_features_in_unit_interval(image):
    x = featurize(image)
    assert x.shape == (FEATURE_DIM,) and x.dtype == np.float32
    assert np.isfinite(x).all() and x.min() >= 0 and x.max() <= 1


def test_constant_image_gives_zero_vector():
    x = featurize(np.full((28, 28), 0.4, dtype=np.float32))
    assert x.shape == (1568,) and not x.any()


def test_channel_major_layout():
    image = random_images(1, seed=4)[0]
    pair = sobel_derivatives(image)
    x = featurize(image)
    np.testing.assert_array_equal(x[:784], minmax_normalize(pair.gx).ravel())
    np.testing.assert_array_equal(x[784:], minmax_normalize(pair.gy).ravel())


def test_transpose_swaps_channels():
    image = random_images(1, seed=5)[0]
    x, xt = featurize(image), featurize(np.ascontiguousarray(image.T))
    np.testing.assert_array_equal(xt[:784].reshape(28, 28), x[784:].reshape(28, 28).T)
    np.testing.assert_array_equal(xt[784:].reshape(28, 28), x[:784].reshape(28, 28).T)


def test_featurize_rejects_wrong_shape():
    with pytest.raises(BadImageShape):
        featurize(np.zeros((27, 28)))


def test_diagnostics():
    d = gradient_diagnostics(GradientPair(np.array([3.0, 0.0, 1.0, 0.0, -1.0]), np.array([4.0, 0.0, 0.0, 1.0, -0.0])))
    np.testing.assert_allclose(d.magnitude, [5, 0, 1, 1, 1])
    np.testing.assert_allclose(d.orientation, [math.atan2(4, 3), 0, 0, math.pi / 2, math.pi])
    assert d.orientation[0] == pytest.approx(0.9273, abs=1e-4)
    zero = gradient_diagnostics(GradientPair(np.array([-0.0]), np.array([-0.0])))
    assert zero.orientation[0] == 0 and zero.magnitude[0] == 0


def test_batch_scales_by_255_and_caches(tmp_path):
    rng = np.random.default_rng(6)
    images = rng.integers(0, 256, (7, 28, 28), dtype=np.uint8)
    ds = LabeledImageSet(images, np.arange(7) % 3, 3)
    features, labels = featurize_batch(ds)
    assert features.shape == (7, 1568)
    np.testing.assert_array_equal(features[4], featurize(images[4].astype(np.float32) / np.float32(255)))
    write_feature_cache(tmp_path / "c.emfc", features, labels, 3)
    f2, l2, k = read_feature_cache(tmp_path / "c.emfc")
    assert f2.tobytes() == features.tobytes() and k == 3
    np.testing.assert_array_equal(l2, labels)
    raw = (tmp_path / "c.emfc").read_bytes()
    assert raw[:6] == b"EMFC1\0" and len(raw) == 6 + 4 + 4 + 1 + 7 * 1568 * 4 + 7


def test_empty_batch():
    ds = LabeledImageSet(np.zeros((0, 28, 28), dtype=np.uint8), np.zeros(0, dtype=np.int64), 10)
    features, labels = featurize_batch(ds)
    assert features.shape == (0, 1568) and labels.shape == (0,)
