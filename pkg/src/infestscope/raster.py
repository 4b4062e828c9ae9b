"""Raster container, 8-bit portable pixmap I/O and fixed-size tiling.

Intensities are held as float64 in ``[0, 1]``. Loading maps an 8-bit sample
``v`` to ``v / 255``; saving quantizes to the nearest 8-bit level with ties
resolved downward, so every sample survives a round trip with an error of at
most half a quantization step (1/510).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .artifacts import atomic_write

MAXVAL = 255


class RasterError(ValueError):
    """Invalid raster, unreadable image file or inconsistent tile grid."""


@dataclass(frozen=True, eq=False)
class Raster:
    """Immutable H x W x C image with intensities in ``[0, 1]``.

    ``data`` has shape ``(height, width, channels)`` with ``channels`` in
    ``{1, 3}``. The array is marked read-only on construction.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise RasterError(f"raster must be HxWx1 or HxWx3, got shape {data.shape}")
        if data.shape[0] == 0 or data.shape[1] == 0:
            raise RasterError("raster has a zero dimension")
        # NaN fails both comparisons, so no separate finiteness pass is needed
        if not (data.min() >= 0.0 and data.max() <= 1.0):
            raise RasterError("raster intensities must lie in [0, 1]")
        if data is self.data and data.flags.writeable:
            data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @classmethod
    def _trusted(cls, data: np.ndarray) -> "Raster":
        # Skip validation for arrays cut from an already validated raster.
        r = object.__new__(cls)
        if data.flags.writeable:
            data = data.view()
            data.flags.writeable = False
        object.__setattr__(r, "data", data)
        return r

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------


def _read_header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    i = 0
    n = len(buf)
    while len(tokens) < count:
        while i < n and buf[i : i + 1].isspace():
            i += 1
        if i < n and buf[i : i + 1] == b"#":
            while i < n and buf[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not buf[i : i + 1].isspace() and buf[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise RasterError("truncated PNM header")
        tokens.append(buf[start:i])
    # exactly one whitespace byte separates the header from the raster
    if i >= n or not buf[i : i + 1].isspace():
        raise RasterError("malformed PNM header")
    return tokens, i + 1


def _load_pnm(buf: bytes) -> np.ndarray:
    tokens, offset = _read_header_tokens(buf, 4)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise RasterError(f"unsupported PNM variant {magic.decode(errors='replace')!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise RasterError("non-numeric PNM header field") from exc
    if width <= 0 or height <= 0:
        raise RasterError("zero-dimension image")
    if maxval != MAXVAL:
        raise RasterError(f"unsupported bit depth (maxval {maxval}); only 8-bit images are supported")
    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    body = buf[offset : offset + expected]
    if len(body) != expected:
        raise RasterError(f"truncated pixel data: expected {expected} bytes, got {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, channels)


def _load_png(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I;16L", "I", "F"):
            raise RasterError(f"unsupported bit depth (PNG mode {im.mode})")
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise RasterError("zero-dimension image")
    return arr


def load_image(path) -> Raster:
    """Read a binary PGM/PPM (P5/P6, maxval 255) or PNG file into a Raster."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise RasterError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if buf[:2] in (b"P5", b"P6", b"P1", b"P2", b"P3", b"P4", b"P7"):
        samples = _load_pnm(buf)
    elif buf[:8] == b"\x89PNG\r\n\x1a\n":
        samples = _load_png(path)
    else:
        raise RasterError(f"{path}: not a supported image format")
    return Raster(samples.astype(np.float64) / MAXVAL)


def quantize(data: np.ndarray) -> np.ndarray:
    """Map ``[0, 1]`` intensities to 8-bit levels, nearest level, ties down."""
    q = np.ceil(np.asarray(data, dtype=np.float64) * MAXVAL - 0.5)
    return np.clip(q, 0, MAXVAL).astype(np.uint8)


def encode_pnm(r: Raster) -> bytes:
    magic = b"P6" if r.channels == 3 else b"P5"
    header = magic + b"\n%d %d\n%d\n" % (r.width, r.height, MAXVAL)
    return header + quantize(r.data).tobytes()


def save_image(r: Raster, path) -> None:
    """Write ``r`` as P5/P6 (or PNG when the suffix is ``.png``).

    The file is written to a temporary sibling and renamed into place.
    """
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        q = quantize(r.data)
        im = Image.fromarray(q[:, :, 0] if r.channels == 1 else q)
        bio = io.BytesIO()
        im.save(bio, format="PNG")
        payload = bio.getvalue()
    else:
        payload = encode_pnm(r)
    _atomic_write(path, payload)


def _atomic_write(path: Path, payload: bytes) -> None:
    try:
        atomic_write(path, payload)
    except OSError as exc:
        raise RasterError(f"cannot write {path}: {exc.strerror or exc}") from exc


# --------------------------------------------------------------------------
# Tiling
# --------------------------------------------------------------------------


@dataclass
class TileGrid:
    tile_size: int
    cols: int
    rows: int
    pad_right: int
    pad_bottom: int
    tiles: list = field(default_factory=list)  # (row, col, Raster)
    overlap: int = 0

    @property
    def stride(self) -> int:
        return self.tile_size - self.overlap

    @property
    def source_width(self) -> int:
        return (self.cols - 1) * self.stride + self.tile_size - self.pad_right

    @property
    def source_height(self) -> int:
        return (self.rows - 1) * self.stride + self.tile_size - self.pad_bottom


def _grid_count(extent: int, tile_size: int, stride: int) -> int:
    if extent <= tile_size:
        return 1
    return math.ceil((extent - tile_size) / stride) + 1


def tile(r: Raster, tile_size: int = 1024, overlap: int = 0) -> TileGrid:
    """Cut ``r`` into ``tile_size`` squares, zero-padding the right/bottom edge.

    With ``overlap == 0`` the grid is ``ceil(W / t)`` x ``ceil(H / t)``. Tiles
    are ordered row-major. Interior tiles share memory with ``r``.
    """
    if tile_size < 1:
        raise RasterError("tile_size must be >= 1")
    if not 0 <= overlap < tile_size:
        raise RasterError("overlap must satisfy 0 <= overlap < tile_size")
    stride = tile_size - overlap
    cols = _grid_count(r.width, tile_size, stride)
    rows = _grid_count(r.height, tile_size, stride)
    pad_right = (cols - 1) * stride + tile_size - r.width
    pad_bottom = (rows - 1) * stride + tile_size - r.height

    src = r.data
    tiles = []
    for row in range(rows):
        y0 = row * stride
        for col in range(cols):
            x0 = col * stride
            block = src[y0 : y0 + tile_size, x0 : x0 + tile_size]
            if block.shape[:2] != (tile_size, tile_size):
                padded = np.zeros((tile_size, tile_size, r.channels), dtype=np.float64)
                padded[: block.shape[0], : block.shape[1]] = block
                block = padded
            tiles.append((row, col, Raster._trusted(block)))
    return TileGrid(tile_size, cols, rows, pad_right, pad_bottom, tiles, overlap)


def untile(g: TileGrid) -> Raster:
    """Reassemble a TileGrid and crop the recorded padding."""
    t = g.tile_size
    by_pos = {}
    channels = None
    for row, col, tr in g.tiles:
        if not (0 <= row < g.rows and 0 <= col < g.cols):
            raise RasterError(f"tile ({row}, {col}) lies outside a {g.rows}x{g.cols} grid")
        if tr.height != t or tr.width != t:
            raise RasterError(f"tile ({row}, {col}) is {tr.width}x{tr.height}, expected {t}x{t}")
        if channels is None:
            channels = tr.channels
        elif tr.channels != channels:
            raise RasterError(f"tile ({row}, {col}) has {tr.channels} channels, expected {channels}")
        by_pos[(row, col)] = tr
    missing = [(r_, c_) for r_ in range(g.rows) for c_ in range(g.cols) if (r_, c_) not in by_pos]
    if missing:
        raise RasterError(f"missing tile(s): {missing[:5]}")

    stride = g.stride
    h, w = g.source_height, g.source_width
    out = np.empty((h, w, channels), dtype=np.float64)
    for (row, col), tr in by_pos.items():
        y0, x0 = row * stride, col * stride
        out[y0 : y0 + t, x0 : x0 + t] = tr.data[: h - y0, : w - x0]
    return Raster._trusted(out)
