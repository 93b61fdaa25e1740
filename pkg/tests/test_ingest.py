import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from toporad.ingest import (
    GrayImage,
    ImageFormatError,
    NoPatchesError,
    RoiMask,
    extract_patches,
    load_grayscale,
    load_mask,
    load_point_cloud,
    mirror_mask,
    save_grayscale,
    save_point_cloud,
)

grids = st.tuples(st.integers(1, 9), st.integers(1, 9))


def test_p2_decode(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_text("P2\n# comment\n2 2\n3\n0 1\n2 3\n")
    img = load_grayscale(p)
    assert (img.width, img.height, img.maxval) == (2, 2, 3)
    assert img.values.ravel().tolist() == [0, 1, 2, 3]


def test_csv_decode(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("5,5\n5,5")
    img = load_grayscale(p)
    assert img.values.tolist() == [[5, 5], [5, 5]]


def test_p5_16bit(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 1\n65535\n" + bytes([0x01, 0x02, 0xFF, 0xFF]))
    assert load_grayscale(p).values.tolist() == [[258, 65535]]


@pytest.mark.parametrize(
    "text",
    ["P2\n2 2\n3\n0 1\n2\n", "P2\n2 x\n3\n0 1 2 3\n", "P2\n1 1\n3\n4\n", "P2\n1 1\n70000\n1\n"],
)
def test_bad_pgm(tmp_path, text):
    p = tmp_path / "bad.pgm"
    p.write_text(text)
    with pytest.raises(ImageFormatError):
        load_grayscale(p)


def test_ragged_csv(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(ImageFormatError):
        load_grayscale(p)


@given(arrays(np.int64, grids, elements=st.integers(0, 65535)), st.sampled_from(["P2", "P5", "csv"]))
def test_round_trip_16bit(tmp_path_factory, values, fmt):
    path = tmp_path_factory.mktemp("rt") / ("img.csv" if fmt == "csv" else "img.pgm")
    img = GrayImage(values, 65535)
    save_grayscale(img, path, fmt)
    back = load_grayscale(path)
    np.testing.assert_array_equal(back.values, values)
    data = path.read_bytes()
    save_grayscale(back, path, fmt)
    assert path.read_bytes() == data


@given(arrays(np.int64, grids, elements=st.integers(0, 255)))
def test_round_trip_8bit(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "img.pgm"
    save_grayscale(GrayImage(values), path, "P5")
    assert path.stat().st_size == len(f"P5\n{values.shape[1]} {values.shape[0]}\n255\n") + values.size
    np.testing.assert_array_equal(load_grayscale(path).values, values)


def test_grayimage_validation():
    with pytest.raises(ValueError):
        GrayImage(np.array([[300]]), 255)
    with pytest.raises(ValueError):
        GrayImage(np.zeros((0, 3), dtype=np.int64))


def _mask_file(tmp_path, values, name="m.pgm"):
    p = tmp_path / name
    save_grayscale(GrayImage(np.asarray(values)), p, "P2")
    return p


def test_load_mask(tmp_path):
    one = np.zeros((3, 3), dtype=np.int64)
    one[1, 2] = 255
    assert load_mask(_mask_file(tmp_path, one)).area == 1
    assert load_mask(_mask_file(tmp_path, np.full((3, 3), 255))).area == 9
    m = load_mask(_mask_file(tmp_path, [[1, 255], [0, 0]]), "healthy")
    assert m.membership.tolist() == [[True, True], [False, False]] and m.label == "healthy"


def test_load_mask_errors(tmp_path):
    with pytest.raises(ValueError):
        load_mask(_mask_file(tmp_path, np.zeros((2, 2), dtype=np.int64)))
    img = GrayImage(np.zeros((3, 3), dtype=np.int64))
    with pytest.raises(ValueError):
        load_mask(_mask_file(tmp_path, np.full((2, 2), 255)), image=img)


def test_mirror():
    m = np.zeros((2, 4), dtype=bool)
    m[0, 0] = True
    out = mirror_mask(RoiMask(m))
    assert out.membership[0, 3] and out.area == 1 and out.label == "healthy"


def test_mirror_overlap_guard():
    m = np.zeros((4, 4), dtype=bool)
    m[1:3, 1:3] = True
    with pytest.raises(ValueError):
        mirror_mask(RoiMask(m))


@given(arrays(bool, grids))
def test_mirror_properties(m):
    if not m.any():
        return
    mask = RoiMask(m)
    out = mirror_mask(mask, check_overlap=False)
    assert out.area == mask.area
    np.testing.assert_array_equal(mirror_mask(out, check_overlap=False).membership, m)


def test_patches_tiling():
    img = GrayImage(np.arange(3600).reshape(60, 60) % 256)
    patches = extract_patches(img, RoiMask(np.ones((60, 60), bool)), 30, 30, 0.5, "s")
    assert [p.origin for p in patches] == [(0, 0), (0, 30), (30, 0), (30, 30)]
    assert all(p.label == "pathologic" and p.source_id == "s" and p.size == 30 for p in patches)
    np.testing.assert_array_equal(patches[3].pixels.values, img.values[30:, 30:])


def test_single_patch():
    img = GrayImage(np.zeros((30, 30), dtype=np.int64))
    assert len(extract_patches(img, RoiMask(np.ones((30, 30), bool), "healthy"))) == 1


def _brute_force_windows(mask, size, stride, cov):
    rows, cols = np.nonzero(mask)
    out = []
    for r in range(rows.min(), rows.max() + 1, stride):
        for c in range(cols.min(), cols.max() + 1, stride):
            if r + size <= mask.shape[0] and c + size <= mask.shape[1]:
                if mask[r : r + size, c : c + size].sum() >= cov * size * size:
                    out.append((r, c))
    return out


def test_half_mask_excludes_right_window():
    m = np.zeros((30, 60), bool)
    m[:, :30] = True
    img = GrayImage(np.zeros((30, 60), dtype=np.int64))
    got = [p.origin for p in extract_patches(img, RoiMask(m), 30, 15, 0.5)]
    assert got == _brute_force_windows(m, 30, 15, 0.5) == [(0, 0), (0, 15)]


@given(arrays(bool, st.tuples(st.integers(4, 14), st.integers(4, 14))), st.integers(2, 4), st.integers(1, 3))
def test_patches_match_brute_force(m, size, stride):
    if not m.any():
        return
    img = GrayImage(np.zeros(m.shape, dtype=np.int64))
    want = _brute_force_windows(m, size, stride, 0.5)
    if not want:
        with pytest.raises(NoPatchesError):
            extract_patches(img, RoiMask(m), size, stride, 0.5)
        return
    assert [p.origin for p in extract_patches(img, RoiMask(m), size, stride, 0.5)] == want


@given(arrays(bool, st.tuples(st.integers(4, 12), st.integers(4, 12))), st.integers(0, 3), st.integers(0, 3))
def test_padding_invariance(m, top, left):
    if not m.any():
        return
    img = np.arange(m.size).reshape(m.shape) % 256
    try:
        base = extract_patches(GrayImage(img), RoiMask(m), 3, 2, 0.5)
    except NoPatchesError:
        base = []
    pm = np.pad(m, ((top, 0), (left, 0)))
    pi = np.pad(img, ((top, 0), (left, 0)))
    try:
        padded = extract_patches(GrayImage(pi), RoiMask(pm), 3, 2, 0.5)
    except NoPatchesError:
        padded = []
    assert [(r - top, c - left) for r, c in (p.origin for p in padded)] == [p.origin for p in base]
    for a, b in zip(base, padded):
        np.testing.assert_array_equal(a.pixels.values, b.pixels.values)


@given(arrays(bool, st.tuples(st.integers(4, 12), st.integers(4, 12))))
def test_monotone_in_coverage(m):
    if not m.any():
        return
    img = GrayImage(np.zeros(m.shape, dtype=np.int64))
    counts = []
    for cov in (0.1, 0.3, 0.5, 0.8, 1.0):
        try:
            counts.append(len(extract_patches(img, RoiMask(m), 3, 1, cov)))
        except NoPatchesError:
            counts.append(0)
    assert counts == sorted(counts, reverse=True)


def test_patch_errors():
    img = GrayImage(np.zeros((10, 10), dtype=np.int64))
    m = np.zeros((10, 10), bool)
    m[0, 0] = True
    with pytest.raises(NoPatchesError):
        extract_patches(img, RoiMask(m), 5, 5, 0.5)
    with pytest.raises(ValueError):
        extract_patches(img, RoiMask(m), 11, 5, 0.5)
    with pytest.raises(ValueError):
        extract_patches(img, RoiMask(m), 5, 5, 0.0)


def test_point_cloud_round_trip(tmp_path):
    pts = np.array([[0.0, 1.5], [-2.25, 3.0]])
    p = tmp_path / "c.csv"
    save_point_cloud(pts, p)
    assert p.read_text().splitlines()[0] == "x,y"
    np.testing.assert_array_equal(load_point_cloud(p), pts)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        load_point_cloud(p)
    p.write_text("x,y\n1,nan\n")
    with pytest.raises(ValueError):
        load_point_cloud(p)
