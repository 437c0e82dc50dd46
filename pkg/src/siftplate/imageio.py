"""Raster file I/O.

Images cross the library boundary as 8-bit arrays: grayscale rasters are
``(h, w) uint8``, color rasters ``(h, w, 3) uint8`` in RGB order.  Binary
PGM (P5) and PPM (P6) with maxval 255 are read and written bit-exactly;
8-bit PNG is read through Pillow as a convenience.  Processing code works
on unit-interval floats, see :func:`to_unit` / :func:`from_unit`.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ImageFormatError

__all__ = [
    "read_image",
    "read_pnm",
    "write_pgm",
    "to_unit",
    "from_unit",
]


def to_unit(img: np.ndarray) -> np.ndarray:
    """Promote an 8-bit raster to float64 intensities in [0, 1]."""
    return np.asarray(img, dtype=np.float64) / 255.0


def from_unit(img: np.ndarray) -> np.ndarray:
    """Quantize unit-interval intensities to uint8, rounding half up."""
    scaled = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def _read_pnm_tokens(data: bytes, count: int, pos: int) -> tuple[list[bytes], int]:
    """Read whitespace-separated header tokens, honoring ``#`` comments."""
    tokens: list[bytes] = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PNM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pnm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) file with maxval 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 2:
        raise ImageFormatError(f"{path}: not a PNM file")
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"{path}: unsupported PNM magic {magic!r}")
    tokens, pos = _read_pnm_tokens(data, 3, 2)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ImageFormatError(f"{path}: bad PNM header") from exc
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: bad PNM dimensions {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise ImageFormatError(f"{path}: raster truncated")
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width).copy()
    return arr.reshape(height, width, 3).copy()


def write_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    """Write a 2-D uint8 raster as binary PGM (P5, maxval 255).

    The header layout is fixed, so identical pixels always produce
    byte-identical files.
    """
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ImageFormatError("write_pgm expects a 2-D grayscale raster")
    if arr.dtype != np.uint8:
        raise ImageFormatError("write_pgm expects uint8 data")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Read PGM/PPM/PNG into a uint8 gray ``(h, w)`` or RGB ``(h, w, 3)`` array."""
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head in (b"P5", b"P6"):
        return read_pnm(path)
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise ImageFormatError(f"{path}: PNG support requires Pillow") from exc
    try:
        with Image.open(path) as im:
            if im.mode in ("RGB", "RGBA", "P"):
                im = im.convert("RGB")
            elif im.mode != "L":
                im = im.convert("L")
            arr = np.asarray(im, dtype=np.uint8)
    except Exception as exc:
        raise ImageFormatError(f"{path}: cannot decode image: {exc}") from exc
    return arr.copy()
