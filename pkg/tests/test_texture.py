import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from skimage.feature import graycomatrix, graycoprops

from toporad.ingest import GrayImage
from toporad.texture import (
    DEFAULT_OFFSETS,
    Glcm,
    compute_glcm,
    haralick_features,
    quantize,
    texture_feature_vector,
)

ALT = np.array([[0, 1], [0, 1]])
# skimage angle for each (drow, dcol) at distance 1; skimage steps rows
# downward, so after symmetrization its pi/4 is our (-1, -1)
ANGLE = {(0, 1): 0.0, (-1, -1): np.pi / 4, (-1, 0): np.pi / 2, (-1, 1): 3 * np.pi / 4}

patches = arrays(np.int64, st.tuples(st.integers(2, 12), st.integers(2, 12)), elements=st.integers(0, 255))


def test_alternating_glcm():
    g = compute_glcm(ALT, 2, [(0, 1)])
    np.testing.assert_array_equal(g.probabilities, [[0, 0.5], [0.5, 0]])


def test_alternating_features():
    f = haralick_features(compute_glcm(ALT, 2, [(0, 1)]))
    assert f.contrast == pytest.approx(1, abs=1e-12)
    assert f.correlation == pytest.approx(-1, abs=1e-12)
    assert f.homogeneity == pytest.approx(0.5, abs=1e-12)
    assert f.energy == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_constant_patch():
    g = compute_glcm(np.full((5, 5), 100), 32)
    assert np.count_nonzero(g.probabilities) == 1 and g.probabilities.max() == 1.0
    assert haralick_features(g).as_tuple() == (0.0, 1.0, 1.0, 1.0)


def test_uniform_glcm():
    f = haralick_features(Glcm(2, np.full((2, 2), 0.25), ((0, 1),)))
    assert f.contrast == pytest.approx(0.5, abs=1e-12)
    assert f.homogeneity == pytest.approx(0.75, abs=1e-12)
    assert f.energy == pytest.approx(0.5, abs=1e-12)
    assert f.correlation == pytest.approx(0.0, abs=1e-12)


def test_quantization_uses_declared_maxval():
    assert quantize(np.array([0, 7, 8, 255]), 32, 255).tolist() == [0, 0, 1, 31]
    img = GrayImage(np.array([[0, 100], [200, 255]]), 255)
    assert compute_glcm(img, 32).levels == 32
    # a 16-bit declared range puts these small values in bin 0
    g = compute_glcm(GrayImage(np.array([[0, 100], [200, 255]]), 65535), 32)
    assert g.probabilities[0, 0] == 1.0


def test_errors():
    with pytest.raises(ValueError):
        compute_glcm(np.zeros((1, 1), dtype=np.int64), 8)
    with pytest.raises(ValueError):
        compute_glcm(np.zeros((3, 3), dtype=np.int64), 1)
    with pytest.raises(ValueError):
        compute_glcm(np.zeros((3, 3), dtype=np.int64), 8, [(0, 0)])


def _skimage(q, levels, offsets):
    m = graycomatrix(q.astype(np.uint8), [1], [ANGLE[o] for o in offsets], levels=levels, symmetric=True)
    return m[:, :, 0, :].sum(axis=-1).astype(np.float64)


@given(patches, st.sampled_from([2, 8, 32]), st.sampled_from(DEFAULT_OFFSETS))
def test_matches_skimage_single_offset(img, levels, offset):
    q = quantize(img, levels, 255)
    g = compute_glcm(GrayImage(img), levels, [offset])
    counts = _skimage(q, levels, [offset])
    np.testing.assert_allclose(g.probabilities, counts / counts.sum(), atol=1e-15)
    m = graycomatrix(q.astype(np.uint8), [1], [ANGLE[offset]], levels=levels, symmetric=True, normed=True)
    f = haralick_features(g)
    for name in ("contrast", "homogeneity", "energy"):
        assert getattr(f, name) == pytest.approx(float(graycoprops(m, name)[0, 0]), abs=1e-9)
    if f.correlation != 1.0 or len(np.unique(q)) > 1:
        assert f.correlation == pytest.approx(float(graycoprops(m, "correlation")[0, 0]), abs=1e-9)


@given(patches)
def test_summed_offsets_match_skimage(img):
    q = quantize(img, 32, 255)
    counts = _skimage(q, 32, DEFAULT_OFFSETS)
    np.testing.assert_allclose(compute_glcm(GrayImage(img)).probabilities, counts / counts.sum(), atol=1e-15)


@given(patches)
def test_glcm_invariants(img):
    P = compute_glcm(GrayImage(img)).probabilities
    np.testing.assert_array_equal(P, P.T)
    assert P.min() >= 0 and abs(P.sum() - 1) < 1e-12
    f = texture_feature_vector(GrayImage(img))
    assert f.contrast >= 0 and -1 <= f.correlation <= 1
    assert 0 < f.homogeneity <= 1 and 0 < f.energy <= 1
    assert (f.contrast == 0) == bool(np.all(P[~np.eye(32, dtype=bool)] == 0))
    assert (abs(f.energy - 1) < 1e-12) == (np.count_nonzero(P) == 1)


@given(patches)
def test_transpose_invariance(img):
    a = texture_feature_vector(GrayImage(img)).as_tuple()
    b = texture_feature_vector(GrayImage(img.T.copy())).as_tuple()
    np.testing.assert_allclose(a, b, atol=1e-12)


@given(patches)
def test_bin_preserving_relabel(img):
    # shift every value to the top of its 8-wide bin: bins are unchanged
    lifted = (img // 8) * 8 + 7
    a = compute_glcm(GrayImage(img)).probabilities
    b = compute_glcm(GrayImage(lifted)).probabilities
    np.testing.assert_array_equal(a, b)
