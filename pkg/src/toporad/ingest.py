"""Image, mask and point-cloud I/O plus ROI patch extraction.

Images are PGM (P2 ASCII or P5 binary, 8 or 16 bit) or plain CSV grids of
non-negative integers. Masks use the same formats; any pixel > 0 is a member.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_INTENSITY = 65535
MIRROR_OVERLAP_LIMIT = 0.10


class ImageFormatError(ValueError):
    pass


class NoPatchesError(ValueError):
    """The mask produced no window meeting the coverage threshold."""


@dataclass(frozen=True)
class GrayImage:
    values: np.ndarray  # (height, width), int64
    maxval: int = 255

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("image must be a non-empty 2D grid")
        if not np.issubdtype(v.dtype, np.integer):
            if not np.all(v == np.round(v)):
                raise ValueError("intensities must be integers")
        v = v.astype(np.int64)
        if v.min() < 0 or v.max() > self.maxval or self.maxval > MAX_INTENSITY:
            raise ValueError(f"intensities must lie in [0, {self.maxval}]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def crop(self, row: int, col: int, size: int) -> "GrayImage":
        return GrayImage(self.values[row : row + size, col : col + size].copy(), self.maxval)


@dataclass(frozen=True)
class RoiMask:
    membership: np.ndarray  # (height, width), bool
    label: str = "pathologic"

    def __post_init__(self):
        m = np.asarray(self.membership, dtype=bool)
        if m.ndim != 2:
            raise ValueError("mask must be 2D")
        if not m.any():
            raise ValueError("mask has no member pixels")
        if self.label not in ("pathologic", "healthy"):
            raise ValueError(f"unknown label {self.label!r}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "membership", m)

    @property
    def height(self) -> int:
        return self.membership.shape[0]

    @property
    def width(self) -> int:
        return self.membership.shape[1]

    @property
    def area(self) -> int:
        return int(self.membership.sum())


@dataclass(frozen=True)
class Patch:
    origin: tuple[int, int]
    size: int
    pixels: GrayImage
    label: str
    source_id: str = ""


def default_maxval(values: np.ndarray) -> int:
    """Declared range for grids that carry no header."""
    return 255 if int(np.max(values)) <= 255 else MAX_INTENSITY


# --------------------------------------------------------------------------
# PGM / CSV


_TOKEN = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)")


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens, pos = [], 0
    while len(tokens) < count:
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ImageFormatError("truncated PGM header")
        tokens.append(m.group(2))
        pos = m.end()
    return tokens, pos


def _decode_pgm(data: bytes) -> GrayImage:
    tokens, pos = _header_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"unsupported magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError("non-numeric PGM header") from None
    if width < 1 or height < 1 or not 0 < maxval <= MAX_INTENSITY:
        raise ImageFormatError(f"bad PGM header {width}x{height} maxval {maxval}")
    n = width * height
    if magic == b"P5":
        raw = data[pos + 1 :]  # exactly one whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(raw) < n * dtype.itemsize:
            raise ImageFormatError("truncated P5 raster")
        values = np.frombuffer(raw[: n * dtype.itemsize], dtype=dtype).astype(np.int64)
    else:
        body = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(body) != n:
            raise ImageFormatError(f"expected {n} samples, found {len(body)}")
        try:
            values = np.array([int(t) for t in body], dtype=np.int64)
        except ValueError:
            raise ImageFormatError("non-integer sample in P2 raster") from None
    if values.min() < 0 or values.max() > maxval:
        raise ImageFormatError(f"sample exceeds declared maxval {maxval}")
    return GrayImage(values.reshape(height, width), maxval)


def _decode_csv(text: str) -> GrayImage:
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ImageFormatError("empty CSV grid")
    grid = []
    for i, line in enumerate(rows, start=1):
        try:
            grid.append([int(v) for v in line.split(",")])
        except ValueError:
            raise ImageFormatError(f"line {i}: non-integer value") from None
        if len(grid[-1]) != len(grid[0]):
            raise ImageFormatError(f"line {i}: ragged row ({len(grid[-1])} vs {len(grid[0])} values)")
    values = np.array(grid, dtype=np.int64)
    if values.min() < 0 or values.max() > MAX_INTENSITY:
        raise ImageFormatError(f"intensity outside [0, {MAX_INTENSITY}]")
    return GrayImage(values, default_maxval(values))


def load_grayscale(path) -> GrayImage:
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P2", b"P5"):
        return _decode_pgm(data)
    if path.suffix.lower() == ".pgm":
        raise ImageFormatError(f"{path}: missing P2/P5 magic")
    return _decode_csv(data.decode("ascii"))


def save_grayscale(image: GrayImage, path, fmt: str | None = None) -> None:
    """Write ``image``; ``fmt`` is ``P2``, ``P5`` or ``csv`` (default from suffix)."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "P5"
    v = image.values
    if fmt == "csv":
        path.write_text("".join(",".join(str(x) for x in row) + "\n" for row in v.tolist()))
    elif fmt == "P2":
        head = f"P2\n{image.width} {image.height}\n{image.maxval}\n"
        path.write_text(head + "".join(" ".join(str(x) for x in row) + "\n" for row in v.tolist()))
    elif fmt == "P5":
        head = f"P5\n{image.width} {image.height}\n{image.maxval}\n".encode()
        dtype = ">u2" if image.maxval > 255 else "u1"
        path.write_bytes(head + v.astype(dtype).tobytes())
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_mask(path, label: str = "pathologic", image: GrayImage | None = None) -> RoiMask:
    grid = load_grayscale(path).values
    if image is not None and grid.shape != image.values.shape:
        raise ValueError(f"{path}: mask is {grid.shape[1]}x{grid.shape[0]}, image is {image.width}x{image.height}")
    if not (grid > 0).any():
        raise ValueError(f"{path}: mask has no member pixels")
    return RoiMask(grid > 0, label)


def mirror_mask(mask: RoiMask, check_overlap: bool = True) -> RoiMask:
    """Reflect across the vertical midline to get the contralateral ROI."""
    flipped = mask.membership[:, ::-1]
    if check_overlap:
        overlap = int((flipped & mask.membership).sum())
        if overlap > MIRROR_OVERLAP_LIMIT * mask.area:
            raise ValueError(
                f"mirrored ROI overlaps the original on {overlap}/{mask.area} pixels; supply an explicit healthy mask"
            )
    return RoiMask(flipped, "healthy")


# --------------------------------------------------------------------------
# point clouds


def load_point_cloud(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["x", "y"]:
            raise ValueError(f"{path}: expected header x,y")
        pts = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                pts.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: bad point {row!r}") from None
    arr = np.array(pts, dtype=np.float64).reshape(-1, 2)
    if not np.isfinite(arr).all():
        raise ValueError(f"{path}: non-finite coordinate")
    return arr


def save_point_cloud(points, path) -> None:
    from .tables import write_rows

    write_rows(path, ["x", "y"], np.asarray(points).reshape(-1, 2).tolist())


# --------------------------------------------------------------------------
# patches


def extract_patches(
    image: GrayImage,
    mask: RoiMask,
    size: int = 30,
    stride: int = 30,
    min_coverage: float = 0.5,
    source_id: str = "",
) -> list[Patch]:
    """Square windows over the mask's bounding box, in raster order.

    Window origins start at the bounding box's top-left corner and advance by
    ``stride`` while they remain inside the box; a window is kept when it fits
    in the image and at least ``min_coverage`` of its pixels are members.
    """
    if mask.membership.shape != image.values.shape:
        raise ValueError("mask and image dimensions differ")
    if not 0 < min_coverage <= 1:
        raise ValueError("min_coverage must lie in (0, 1]")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if not 1 <= size <= min(image.width, image.height):
        raise ValueError(f"patch size {size} does not fit a {image.width}x{image.height} image")

    rows, cols = np.nonzero(mask.membership)
    r0, r1, c0, c1 = rows.min(), rows.max(), cols.min(), cols.max()
    # integral image so each window's member count is O(1)
    integral = np.pad(mask.membership.astype(np.int64), ((1, 0), (1, 0))).cumsum(0).cumsum(1)
    need = min_coverage * size * size
    out = []
    for r in range(r0, r1 + 1, stride):
        if r + size > image.height:
            break
        for c in range(c0, c1 + 1, stride):
            if c + size > image.width:
                break
            inside = integral[r + size, c + size] - integral[r, c + size] - integral[r + size, c] + integral[r, c]
            if inside >= need - 1e-9:
                out.append(Patch((int(r), int(c)), size, image.crop(r, c, size), mask.label, source_id))
    if not out:
        raise NoPatchesError(f"no {size}x{size} window reaches coverage {min_coverage}")
    return out
