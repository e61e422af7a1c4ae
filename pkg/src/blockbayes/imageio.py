"""Grayscale PGM decoding and block partitioning."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidGridError, PgmFormatError, PgmTruncatedError

__all__ = [
    "GrayImage",
    "BlockGrid",
    "decode_pgm",
    "encode_pgm",
    "read_pgm",
    "write_pgm",
    "partition_blocks",
    "block_bounds",
]

_WHITESPACE = b" \t\n\r\v\f"


@dataclass(frozen=True, eq=False)
class GrayImage:
    """A rectangular grid of intensities in ``[0, maxval]``.

    ``pixels`` is a read-only ``(height, width)`` integer array; iterate it in
    C order for the row-major sample sequence.
    """

    width: int
    height: int
    pixels: np.ndarray
    maxval: int = 255

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.int64, copy=True)
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if self.maxval < 1:
            raise ValueError("maxval must be positive")
        if pixels.size != self.width * self.height:
            raise ValueError(
                f"expected {self.width * self.height} pixels, got {pixels.size}"
            )
        pixels = pixels.reshape(self.height, self.width)
        if pixels.min() < 0 or pixels.max() > self.maxval:
            raise ValueError(f"pixel values must lie in [0, {self.maxval}]")
        pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def from_array(cls, array, maxval: int = 255) -> "GrayImage":
        array = np.asarray(array)
        if array.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(width=array.shape[1], height=array.shape[0], pixels=array, maxval=maxval)

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.maxval == other.maxval
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None

    def __repr__(self):
        return f"GrayImage(width={self.width}, height={self.height}, maxval={self.maxval})"


@dataclass(frozen=True)
class BlockGrid:
    rows: int = 4
    cols: int = 4

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidGridError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")

    @property
    def n_blocks(self) -> int:
        return self.rows * self.cols

    @classmethod
    def parse(cls, text: str) -> "BlockGrid":
        """Parse ``"4x4"`` (``×`` and ``*`` are accepted as separators)."""
        normalized = text.strip().lower().replace("×", "x").replace("*", "x")
        parts = normalized.split("x")
        if len(parts) != 2:
            raise InvalidGridError(f"cannot parse grid {text!r}; expected ROWSxCOLS")
        try:
            rows, cols = int(parts[0]), int(parts[1])
        except ValueError:
            raise InvalidGridError(f"cannot parse grid {text!r}; expected ROWSxCOLS") from None
        return cls(rows, cols)

    def __str__(self):
        return f"{self.rows}x{self.cols}"


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_space_and_comments(self):
        data = self.data
        while self.pos < len(data):
            ch = data[self.pos : self.pos + 1]
            if ch in _WHITESPACE and ch:
                self.pos += 1
            elif ch == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            else:
                break

    def token(self, what: str) -> bytes:
        self.skip_space_and_comments()
        start = self.pos
        data = self.data
        while self.pos < len(data) and data[self.pos : self.pos + 1] not in _WHITESPACE + b"#":
            self.pos += 1
        if self.pos == start:
            raise PgmFormatError(f"missing {what}", start)
        return data[start : self.pos]

    def positive_int(self, what: str) -> int:
        start = self.pos
        tok = self.token(what)
        if not tok.isdigit():
            raise PgmFormatError(f"invalid {what} {tok!r}", start)
        value = int(tok)
        if value < 1:
            raise PgmFormatError(f"{what} must be positive", start)
        return value


def decode_pgm(data: bytes) -> GrayImage:
    """Decode a plain (P2) or raw (P5) PGM byte string."""
    data = bytes(data)
    if data[:2] not in (b"P2", b"P5"):
        raise PgmFormatError(f"unsupported magic number {data[:2]!r}; expected P2 or P5", 0)
    reader = _Reader(data)
    reader.pos = 2
    if reader.pos < len(data) and data[2:3] not in _WHITESPACE + b"#":
        raise PgmFormatError("magic number must be followed by whitespace", 2)
    width = reader.positive_int("width")
    height = reader.positive_int("height")
    maxval = reader.positive_int("maxval")
    if maxval > 65535:
        raise PgmFormatError(f"maxval {maxval} exceeds 65535", reader.pos)
    count = width * height

    if data[:2] == b"P5":
        if reader.pos >= len(data) or data[reader.pos : reader.pos + 1] not in _WHITESPACE:
            raise PgmFormatError("expected a single whitespace byte before the raster", reader.pos)
        start = reader.pos + 1
        dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
        need = count * dtype.itemsize
        raster = data[start : start + need]
        if len(raster) < need:
            raise PgmTruncatedError(
                f"raster holds {len(raster) // dtype.itemsize} of {count} samples"
            )
        pixels = np.frombuffer(raster, dtype=dtype).astype(np.int64)
    else:
        values = []
        while len(values) < count:
            reader.skip_space_and_comments()
            if reader.pos >= len(data):
                raise PgmTruncatedError(f"raster holds {len(values)} of {count} samples")
            start = reader.pos
            tok = reader.token("sample")
            if not tok.isdigit():
                raise PgmFormatError(f"invalid sample {tok!r}", start)
            values.append(int(tok))
        pixels = np.asarray(values, dtype=np.int64)

    if pixels.max() > maxval:
        raise PgmFormatError(f"sample value {int(pixels.max())} exceeds maxval {maxval}", 0)
    return GrayImage(width=width, height=height, pixels=pixels, maxval=maxval)


def encode_pgm(img: GrayImage, binary: bool = True) -> bytes:
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n{img.maxval}\n".encode("ascii")
    if binary:
        dtype = np.uint8 if img.maxval < 256 else ">u2"
        return header + img.pixels.astype(dtype).tobytes()
    rows = (" ".join(str(int(v)) for v in row) for row in img.pixels)
    return header + "\n".join(rows).encode("ascii") + b"\n"


def read_pgm(path) -> GrayImage:
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, img: GrayImage, binary: bool = True) -> None:
    Path(path).write_bytes(encode_pgm(img, binary=binary))


def block_bounds(length: int, parts: int) -> list[tuple[int, int]]:
    """Floor boundaries ``[floor(i*length/parts), floor((i+1)*length/parts))``."""
    return [((i * length) // parts, ((i + 1) * length) // parts) for i in range(parts)]


def partition_blocks(img: GrayImage, grid: BlockGrid) -> list[GrayImage]:
    """Split ``img`` into ``grid.rows * grid.cols`` blocks in row-major order.

    Block edges fall on floor boundaries, so the blocks tile the image exactly
    and their sizes differ by at most one pixel along each axis.
    """
    if grid.rows > img.height or grid.cols > img.width:
        raise InvalidGridError(
            f"grid {grid} does not fit a {img.width}x{img.height} (WxH) image"
        )
    blocks = []
    for r0, r1 in block_bounds(img.height, grid.rows):
        for c0, c1 in block_bounds(img.width, grid.cols):
            blocks.append(GrayImage.from_array(img.pixels[r0:r1, c0:c1], maxval=img.maxval))
    return blocks
