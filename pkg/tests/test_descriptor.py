# tests/test_descriptor.py
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.descriptor import describe, load_image_dir, read_pgm, similarity_matrix, write_pgm
from core.exceptions import ConfigurationError, FormatError, LengthError
from core.metrics import top1_accuracy
from core.models import DescriptorParams, GrayImage, GroundTruth, MatchDecision, SicParams
from core.scaling import zscore_rows
from core.sic import sic_match_all


def _image(rng, width=16, height=16, low=0, high=256):
    return GrayImage(width, height, rng.integers(low, high, size=(height, width)))


class TestPgm:
    def test_write_then_read(self, tmp_path, rng):
        img = _image(rng, 24, 10)
        write_pgm(img, tmp_path / "a.pgm")
        loaded = read_pgm(tmp_path / "a.pgm")
        assert (loaded.width, loaded.height) == (24, 10)
        assert_array_equal(loaded.pixels, img.pixels)

    def test_header_comment(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# scanned\n8 8\n255\n" + bytes(range(64)))
        assert read_pgm(path).pixels[7, 7] == 63

    def test_unsupported_maxval(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n8 8\n65535\n" + bytes(128))
        with pytest.raises(FormatError):
            read_pgm(path)

    def test_ascii_pgm_rejected(self, tmp_path):
        path = tmp_path / "p2.pgm"
        path.write_bytes(b"P2\n8 8\n255\n" + b"0 " * 64)
        with pytest.raises(FormatError):
            read_pgm(path)

    def test_truncated_raster(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n8 8\n255\n" + bytes(40))
        with pytest.raises(LengthError):
            read_pgm(path)

    def test_too_small(self, tmp_path):
        path = tmp_path / "s.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(16))
        with pytest.raises(FormatError):
            read_pgm(path)

    def test_directory_order_and_errors(self, tmp_path, rng):
        for name, height in (("b.pgm", 14), ("a.pgm", 13), ("c.pgm", 15)):
            write_pgm(_image(rng, 8, height), tmp_path / name)
        (tmp_path / "notes.txt").write_text("skip")
        assert [img.height for img in load_image_dir(tmp_path)] == [13, 14, 15]
        with pytest.raises(ConfigurationError):
            load_image_dir(tmp_path / "missing")
        (tmp_path / "empty").mkdir()
        with pytest.raises(ConfigurationError):
            load_image_dir(tmp_path / "empty")


class TestDescribe:
    def test_constant_image(self):
        descriptor = describe(GrayImage(40, 20, np.full((20, 40), 77)), grid_w=16, grid_h=8, patch=8)
        assert descriptor.values.shape == (8, 16)
        assert_array_equal(descriptor.values, np.zeros((8, 16)))

    def test_blocks_are_normalized(self, rng):
        values = describe(_image(rng, 64, 32), grid_w=32, grid_h=16, patch=8).values
        blocks = values.reshape(2, 8, 4, 8)
        assert_allclose(blocks.mean(axis=(1, 3)), 0.0, atol=1e-9)
        assert_allclose(blocks.std(axis=(1, 3)), 1.0, atol=1e-9)

    def test_affine_brightness_invariance(self, rng):
        base = rng.integers(0, 16, size=(32, 64))
        dark = describe(GrayImage(64, 32, base * 10), grid_w=32, grid_h=16, patch=8)
        bright = describe(GrayImage(64, 32, base * 13 + 50), grid_w=32, grid_h=16, patch=8)
        assert_allclose(dark.values, bright.values, atol=1e-9)

    def test_grid_must_divide_into_patches(self, rng):
        with pytest.raises(ConfigurationError):
            describe(_image(rng), grid_w=20, grid_h=16, patch=8)


class TestSimilarityMatrix:
    def test_self_similarity_is_row_maximum(self, rng):
        images = [_image(rng, 32, 16) for _ in range(5)]
        matrix = similarity_matrix(images, images, DescriptorParams(grid_w=16, grid_h=8, patch=8))
        assert matrix.shape == (5, 5)
        assert matrix.orientation == "similarity"
        assert_array_equal(np.diag(matrix.values), np.zeros(5))
        assert_array_equal(matrix.values.argmax(axis=1), np.arange(5))

    def test_single_pair(self, rng):
        img = _image(rng)
        matrix = similarity_matrix([img], [img], DescriptorParams(grid_w=8, grid_h=8, patch=8))
        assert matrix.values.tolist() == [[0.0]]

    def test_empty_input(self, rng):
        with pytest.raises(ConfigurationError):
            similarity_matrix([], [_image(rng)])


def test_route_recovered_from_images(tmp_path, rng):
    base = rng.integers(20, 201, size=(48, 96))
    (tmp_path / "ref").mkdir()
    (tmp_path / "query").mkdir()
    for i in range(30):
        frame = np.roll(base, 3 * i, axis=1)
        write_pgm(GrayImage(96, 48, frame), tmp_path / "ref" / f"{i:03d}.pgm")
        write_pgm(GrayImage(96, 48, frame + i % 5), tmp_path / "query" / f"{i:03d}.pgm")

    matrix = similarity_matrix(load_image_dir(tmp_path / "query"), load_image_dir(tmp_path / "ref"),
                               DescriptorParams(grid_w=32, grid_h=16, patch=8))
    results = sic_match_all(zscore_rows(matrix), SicParams())
    decisions = [MatchDecision(query=r.query, technique_id="pgm", match_index=r.match_index,
                               theta=r.theta, confidence=r.theta) for r in results]
    assert top1_accuracy(decisions, GroundTruth(tuple(range(30)), allowance=1)) == 1.0


def _quadratic_ramp(x0):
    """16x16 image whose 8x8 grid cells hold (x0 + column)^2 / 4 on every row"""
    pixels = np.zeros((16, 16), dtype=np.int64)
    for j in range(8):
        total = (x0 + j) ** 2
        cell = np.full(4, total // 4)
        cell[:total % 4] += 1
        pixels[:, 2 * j:2 * j + 2] = np.tile(cell.reshape(2, 2), (8, 1))
    return GrayImage(16, 16, pixels)


def test_similarity_falls_with_shift_up_to_patch():
    params = DescriptorParams(grid_w=8, grid_h=8, patch=8)
    shifted = [_quadratic_ramp(8 + s) for s in range(params.patch + 1)]
    similarities = similarity_matrix([shifted[0]], shifted, params).values[0]
    assert similarities[0] == 0.0
    assert np.all(np.diff(similarities) < 0)
