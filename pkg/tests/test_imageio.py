import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockbayes.errors import InvalidGridError, PgmFormatError, PgmTruncatedError
from blockbayes.imageio import (
    BlockGrid,
    GrayImage,
    decode_pgm,
    encode_pgm,
    partition_blocks,
    read_pgm,
    write_pgm,
)


def test_decode_minimal_ascii():
    img = decode_pgm(b"P2\n2 2\n255\n0 255 128 64")
    assert (img.width, img.height, img.maxval) == (2, 2, 255)
    assert img.pixels.ravel().tolist() == [0, 255, 128, 64]


def test_decode_ascii_with_comments():
    data = b"P2\n# made by hand\n3 1 # width height\n# max next\n15\n1 2\n3\n"
    img = decode_pgm(data)
    assert img.pixels.tolist() == [[1, 2, 3]]
    assert img.maxval == 15


def test_decode_binary_orl_size():
    payload = (np.arange(92 * 112) % 256).astype(np.uint8).tobytes()
    img = decode_pgm(b"P5\n92 112\n255\n" + payload)
    assert (img.width, img.height, img.maxval) == (92, 112, 255)
    assert img.pixels.shape == (112, 92)
    assert img.pixels.ravel().tolist() == list(payload)


def test_decode_binary_16bit():
    img = decode_pgm(b"P5 2 1 1000\n" + bytes([0x03, 0xE8, 0x00, 0x07]))
    assert img.pixels.tolist() == [[1000, 7]]


def test_wrong_magic_is_format_error():
    with pytest.raises(PgmFormatError) as info:
        decode_pgm(b"P6\n1 1\n255\n\x00\x00\x00")
    assert info.value.offset == 0


@pytest.mark.parametrize(
    "data, offset",
    [
        (b"P2\n2 x\n255\n0 0 0 0", 4),
        (b"P2\n2 2\n", 7),
        (b"P5\n2 2\n255", 10),
    ],
)
def test_malformed_header_names_offset(data, offset):
    with pytest.raises(PgmFormatError) as info:
        decode_pgm(data)
    assert info.value.offset == offset
    assert f"offset {offset}" in str(info.value)


@pytest.mark.parametrize(
    "data", [b"P2\n2 2\n255\n0 1 2", b"P5\n2 2\n255\n\x00\x01\x02"]
)
def test_truncated_raster(data):
    with pytest.raises(PgmTruncatedError):
        decode_pgm(data)


def test_sample_above_maxval_rejected():
    with pytest.raises(PgmFormatError):
        decode_pgm(b"P2\n1 1\n10\n11")


@pytest.mark.parametrize("binary", [True, False])
def test_encode_round_trip(tmp_path, binary):
    arr = np.random.default_rng(3).integers(0, 256, size=(7, 5))
    img = GrayImage.from_array(arr)
    path = tmp_path / "x.pgm"
    write_pgm(path, img, binary=binary)
    assert read_pgm(path) == img
    assert decode_pgm(encode_pgm(img, binary)) == img


def test_decode_is_deterministic():
    data = b"P5\n3 2\n255\n" + bytes([9, 8, 7, 6, 5, 4])
    assert decode_pgm(data) == decode_pgm(data)


def test_image_is_immutable():
    img = GrayImage.from_array(np.zeros((2, 2), dtype=int))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1


def test_partition_4x4_image_2x2():
    img = GrayImage.from_array(np.arange(16).reshape(4, 4))
    blocks = partition_blocks(img, BlockGrid(2, 2))
    assert len(blocks) == 4
    assert all(b.pixels.shape == (2, 2) for b in blocks)
    assert blocks[0].pixels.tolist() == [[0, 1], [4, 5]]
    assert blocks[1].pixels.tolist() == [[2, 3], [6, 7]]
    joined = np.concatenate([b.pixels.ravel() for b in blocks])
    assert sorted(joined.tolist()) == list(range(16))


def test_partition_orl_geometry():
    img = GrayImage.from_array(np.zeros((112, 92), dtype=int))
    blocks = partition_blocks(img, BlockGrid(4, 4))
    assert len(blocks) == 16
    assert {b.width for b in blocks} == {23}
    assert [blocks[r * 4].height for r in range(4)] == [28, 28, 28, 28]


def test_partition_uneven_floor_boundaries():
    img = GrayImage.from_array(np.arange(9).reshape(3, 3))
    shapes = [(b.height, b.width) for b in partition_blocks(img, BlockGrid(2, 2))]
    assert shapes == [(1, 1), (1, 2), (2, 1), (2, 2)]


def test_grid_larger_than_image():
    img = GrayImage.from_array(np.zeros((3, 5), dtype=int))
    with pytest.raises(InvalidGridError):
        partition_blocks(img, BlockGrid(4, 2))
    with pytest.raises(InvalidGridError):
        partition_blocks(img, BlockGrid(1, 6))


def test_grid_parse():
    assert BlockGrid.parse("4x4") == BlockGrid(4, 4)
    assert BlockGrid.parse("2×3") == BlockGrid(2, 3)
    with pytest.raises(InvalidGridError):
        BlockGrid.parse("4")
    with pytest.raises(InvalidGridError):
        BlockGrid(0, 2)


@settings(max_examples=60, deadline=None)
@given(
    h=st.integers(1, 20),
    w=st.integers(1, 20),
    rows=st.integers(1, 20),
    cols=st.integers(1, 20),
    seed=st.integers(0, 2**16),
)
def test_partition_tiles_exactly(h, w, rows, cols, seed):
    arr = np.random.default_rng(seed).integers(0, 256, size=(h, w))
    img = GrayImage.from_array(arr)
    grid = BlockGrid(rows, cols)
    if rows > h or cols > w:
        with pytest.raises(InvalidGridError):
            partition_blocks(img, grid)
        return
    blocks = partition_blocks(img, grid)
    assert len(blocks) == rows * cols
    # reassembling row-major blocks must reproduce the image exactly
    band = [np.hstack([b.pixels for b in blocks[r * cols : (r + 1) * cols]]) for r in range(rows)]
    assert np.array_equal(np.vstack(band), arr)
    heights = {b.height for b in blocks}
    widths = {b.width for b in blocks}
    assert max(heights) - min(heights) <= 1 and max(widths) - min(widths) <= 1
