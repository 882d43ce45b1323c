from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as npst
from PIL import Image

from greenview.errors import (
    CorruptImage,
    NonBinaryMask,
    NotALabelImage,
    UnreadableFile,
    UnsupportedFormat,
)
from greenview.imaging import (
    RasterImage,
    VegetationMask,
    decode_image,
    decode_label_image,
    mask_from_label_image,
    mask_from_png,
    mask_to_png,
)

from conftest import image_from_array, mask_of, write_png


class TestDecodeImage:
    def test_pure_green_png_decodes_identically(self, tmp_path):
        arr = np.zeros((2, 2, 3), dtype=np.uint8)
        arr[:, :] = (0, 255, 0)
        path = tmp_path / "green.png"
        write_png(path, arr)
        img = decode_image(path)
        assert img.width == 2 and img.height == 2
        assert np.array_equal(img.pixels, arr)
        assert img.id == "green"

    def test_grayscale_expands_to_rgb(self, tmp_path):
        path = tmp_path / "gray.png"
        write_png(path, np.full((1, 1), 128, dtype=np.uint8), mode="L")
        img = decode_image(path)
        assert tuple(img.pixels[0, 0]) == (128, 128, 128)

    def test_truncated_png_is_corrupt(self, tmp_path):
        full = tmp_path / "ok.png"
        write_png(full, np.zeros((64, 64, 3), dtype=np.uint8))
        data = full.read_bytes()
        broken = tmp_path / "broken.png"
        broken.write_bytes(data[: len(data) // 2])
        with pytest.raises(CorruptImage):
            decode_image(broken)

    def test_missing_file_is_unreadable(self, tmp_path):
        with pytest.raises(UnreadableFile):
            decode_image(tmp_path / "nope.png")

    def test_unidentifiable_bytes_are_unsupported(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"not an image at all")
        with pytest.raises(UnsupportedFormat):
            decode_image(path)

    def test_non_png_jpeg_format_rejected(self, tmp_path):
        path = tmp_path / "img.bmp"
        Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8)).save(path, format="BMP")
        with pytest.raises(UnsupportedFormat):
            decode_image(path)

    def test_alpha_dropped(self, tmp_path):
        rgba = np.zeros((2, 2, 4), dtype=np.uint8)
        rgba[:, :] = (10, 20, 30, 77)
        path = tmp_path / "rgba.png"
        write_png(path, rgba)
        img = decode_image(path)
        assert img.pixels.shape == (2, 2, 3)
        assert tuple(img.pixels[0, 0]) == (10, 20, 30)

    def test_16bit_truncates_to_high_byte(self, tmp_path):
        arr = np.full((2, 2), 0x1234, dtype=np.uint16)
        path = tmp_path / "deep.png"
        Image.fromarray(arr).save(path, format="PNG")
        img = decode_image(path)
        assert tuple(img.pixels[0, 0]) == (0x12, 0x12, 0x12)

    def test_jpeg_roundtrip_dimensions(self, tmp_path):
        arr = np.random.default_rng(0).integers(0, 256, size=(13, 7, 3), dtype=np.uint8)
        path = tmp_path / "img.jpg"
        Image.fromarray(arr).save(path, format="JPEG")
        img = decode_image(path)
        assert (img.height, img.width) == (13, 7)

    @given(
        w=st.integers(min_value=1, max_value=16),
        h=st.integers(min_value=1, max_value=16),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    @settings(max_examples=30, deadline=None)
    def test_buffer_always_matches_dimensions(self, tmp_path_factory, w, h, seed):
        arr = np.random.default_rng(seed).integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        path = tmp_path_factory.mktemp("imgs") / "x.png"
        write_png(path, arr)
        img = decode_image(path)
        assert img.pixels.shape == (img.height, img.width, 3)
        assert np.array_equal(img.pixels, arr)


class TestRasterImageInvariants:
    def test_rejects_wrong_dtype(self):
        with pytest.raises(ValueError):
            RasterImage(id="x", pixels=np.zeros((2, 2, 3), dtype=np.float32))

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            RasterImage(id="x", pixels=np.zeros((2, 2), dtype=np.uint8))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            RasterImage(id="x", pixels=np.zeros((0, 2, 3), dtype=np.uint8))

    def test_pixels_read_only(self):
        img = image_from_array(np.zeros((2, 2, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            img.pixels[0, 0, 0] = 1


class TestLabelMasks:
    def test_full_coverage(self):
        img = image_from_array(np.full((3, 3, 3), 21, dtype=np.uint8))
        mask = mask_from_label_image(img, 21)
        assert mask.vegetation_pixel_count == 9

    def test_no_coverage(self):
        img = image_from_array(np.full((3, 3, 3), 7, dtype=np.uint8))
        assert mask_from_label_image(img, 21).vegetation_pixel_count == 0

    def test_elementwise_rule(self):
        arr = np.zeros((1, 3, 3), dtype=np.uint8)
        arr[0, :, :] = np.array([[21, 21, 21], [0, 0, 0], [21, 21, 21]])
        mask = mask_from_label_image(image_from_array(arr), 21)
        assert mask.bits.tolist() == [[True, False, True]]

    def test_channels_differ_rejected(self):
        arr = np.zeros((2, 2, 3), dtype=np.uint8)
        arr[0, 0] = (1, 2, 1)
        with pytest.raises(NotALabelImage):
            mask_from_label_image(image_from_array(arr), 21)

    def test_palettized_label_keeps_indices(self, tmp_path):
        indices = np.array([[21, 0], [7, 21]], dtype=np.uint8)
        img = Image.fromarray(indices, mode="P")
        img.putpalette([i for v in range(256) for i in (v, 0, 0)])
        path = tmp_path / "label.png"
        img.save(path, format="PNG")
        decoded = decode_label_image(path)
        mask = mask_from_label_image(decoded, 21)
        assert mask.bits.tolist() == [[True, False], [False, True]]


class TestMaskPngRoundTrip:
    def test_four_by_four_roundtrip(self, tmp_path):
        bits = np.random.default_rng(1).random((4, 4)) < 0.5
        mask = mask_of(bits)
        path = tmp_path / "m.png"
        mask_to_png(mask, path)
        assert mask_from_png(path) == mask

    def test_nonbinary_value_rejected(self, tmp_path):
        path = tmp_path / "gray.png"
        write_png(path, np.full((2, 2), 128, dtype=np.uint8), mode="L")
        with pytest.raises(NonBinaryMask):
            mask_from_png(path)

    def test_rgb_mask_rejected(self, tmp_path):
        path = tmp_path / "rgb.png"
        write_png(path, np.zeros((2, 2, 3), dtype=np.uint8))
        with pytest.raises(NonBinaryMask):
            mask_from_png(path)

    def test_single_false_pixel(self, tmp_path):
        path = tmp_path / "one.png"
        mask_to_png(mask_of([[False]]), path)
        arr = np.asarray(Image.open(path))
        assert arr.shape == (1, 1) and arr[0, 0] == 0

    @given(
        bits=npst.arrays(
            dtype=np.bool_,
            shape=st.tuples(st.integers(1, 24), st.integers(1, 24)),
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_is_identity(self, tmp_path_factory, bits):
        mask = VegetationMask(bits=bits)
        path = tmp_path_factory.mktemp("masks") / "m.png"
        mask_to_png(mask, path)
        again = mask_from_png(path)
        assert again == mask
        # decode-encode-decode fixed point
        mask_to_png(again, path)
        assert mask_from_png(path) == again
