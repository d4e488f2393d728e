import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from fusedetect.errors import EncoderFailure, EngineFailure, UnreadableImage
from fusedetect.vision import (
    FIXTURE_ALPHABET,
    BrightnessObjectDetector,
    GlyphOcrEngine,
    NullObjectDetector,
    NullOcrEngine,
    RGBImage,
    StaticObjectDetector,
    cosine_similarity,
    create_object_detector,
    create_ocr_engine,
    detect_objects,
    extract_ocr_text,
    load_image,
    object_text_similarity,
    render_text_image,
    save_png,
)


class TestRGBImage:
    def test_buffer_length_invariant(self):
        with pytest.raises(ValueError):
            RGBImage(width=2, height=2, pixels=b"\x00" * 11)

    def test_dimensions_must_be_positive(self):
        with pytest.raises(ValueError):
            RGBImage(width=0, height=1, pixels=b"")

    def test_pixel_accessor(self):
        img = RGBImage(width=2, height=1, pixels=bytes([1, 2, 3, 4, 5, 6]))
        assert img.pixel(1, 0) == (4, 5, 6)


class TestLoadImage:
    def test_grayscale_replicated_across_channels(self, tmp_path):
        path = tmp_path / "gray.png"
        Image.frombytes("L", (2, 2), bytes([7, 7, 7, 7])).save(path)
        img = load_image(path)
        assert (img.width, img.height) == (2, 2)
        assert set(img.pixels) == {7}

    def test_rgba_alpha_dropped(self, tmp_path):
        path = tmp_path / "rgba.png"
        Image.frombytes("RGBA", (1, 1), bytes([10, 20, 30, 128])).save(path)
        img = load_image(path)
        assert img.pixel(0, 0) == (10, 20, 30)

    def test_missing_file(self, tmp_path):
        with pytest.raises(UnreadableImage):
            load_image(tmp_path / "missing.png")

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"this is not an image")
        with pytest.raises(UnreadableImage):
            load_image(path)

    def test_png_round_trip(self, tmp_path):
        original = render_text_image("HI")
        save_png(original, tmp_path / "x.png")
        assert load_image(tmp_path / "x.png") == original

    def test_output_satisfies_buffer_invariant(self, tmp_path):
        path = tmp_path / "rgb.png"
        Image.frombytes("RGB", (3, 2), bytes(range(18))).save(path)
        img = load_image(path)
        assert len(img.pixels) == img.width * img.height * 3


class TestOcr:
    def test_round_trip_known_string(self):
        img = render_text_image("VOTE EARLY")
        assert extract_ocr_text(img, GlyphOcrEngine()) == "VOTE EARLY"

    def test_blank_image_yields_empty_text(self):
        blank = RGBImage(width=40, height=24, pixels=b"\xff" * (40 * 24 * 3))
        assert extract_ocr_text(blank, GlyphOcrEngine()) == ""

    def test_tiny_image_yields_empty_text(self):
        dot = RGBImage(width=1, height=1, pixels=b"\x00\x00\x00")
        assert extract_ocr_text(dot, GlyphOcrEngine()) == ""

    def test_raising_engine_degrades_to_empty(self, caplog):
        class Exploding:
            name = "exploding"

            def extract(self, img):
                raise RuntimeError("boom")

        with caplog.at_level("WARNING"):
            assert extract_ocr_text(render_text_image("A"), Exploding()) == ""
        assert "failed" in caplog.text

    def test_non_string_output_is_contract_violation(self):
        class Liar:
            name = "liar"

            def extract(self, img):
                return 42

        with pytest.raises(EngineFailure):
            extract_ocr_text(render_text_image("A"), Liar())

    def test_whitespace_normalized(self):
        class Spacey:
            name = "spacey"

            def extract(self, img):
                return "  A \n\n B\tC  "

        assert extract_ocr_text(render_text_image("A"), Spacey()) == "A B C"

    def test_lowercase_input_uppercased(self):
        assert extract_ocr_text(render_text_image("vote"), GlyphOcrEngine()) == "VOTE"

    def test_unsupported_character_rejected_by_renderer(self):
        with pytest.raises(ValueError):
            render_text_image("héllo")

    @given(
        st.text(
            alphabet=sorted(set(FIXTURE_ALPHABET)),
            min_size=0,
            max_size=24,
        )
    )
    @settings(max_examples=150)
    def test_render_ocr_identity_on_fixture_alphabet(self, text):
        normalized = " ".join(text.split())
        img = render_text_image(text)
        assert extract_ocr_text(img, GlyphOcrEngine()) == normalized

    def test_multiline_read_in_row_order(self):
        img = render_text_image("AB\nCD")
        assert extract_ocr_text(img, GlyphOcrEngine()) == "AB CD"

    def test_null_engine(self):
        assert extract_ocr_text(render_text_image("A"), NullOcrEngine()) == ""

    def test_registry(self):
        assert isinstance(create_ocr_engine("glyph"), GlyphOcrEngine)
        with pytest.raises(KeyError):
            create_ocr_engine("tesseract9000")


WHITE_IMG = RGBImage(width=4, height=4, pixels=b"\xff" * 48)


class TestDetectObjects:
    def test_blank_image_with_null_detector(self):
        assert detect_objects(WHITE_IMG, NullObjectDetector()) == []

    def test_output_sorted_by_descending_confidence(self):
        detector = StaticObjectDetector([("flag", 0.4), ("person", 0.9)])
        assert detect_objects(WHITE_IMG, detector) == [("person", 0.9), ("flag", 0.4)]

    def test_out_of_range_confidence_is_contract_violation(self):
        detector = StaticObjectDetector([("person", 1.3)])
        with pytest.raises(EngineFailure):
            detect_objects(WHITE_IMG, detector)

    def test_label_outside_vocabulary_is_contract_violation(self):
        detector = StaticObjectDetector([("person", 0.9)], labels=["flag"])
        with pytest.raises(EngineFailure):
            detect_objects(WHITE_IMG, detector)

    def test_raising_detector_degrades_to_empty(self, caplog):
        class Exploding:
            name = "exploding"
            labels = ("x",)

            def detect(self, img):
                raise RuntimeError("boom")

        with caplog.at_level("WARNING"):
            assert detect_objects(WHITE_IMG, Exploding()) == []

    def test_brightness_detector_on_extremes(self):
        bright = detect_objects(WHITE_IMG, BrightnessObjectDetector())
        assert bright[0][0] == "bright"
        dark_img = RGBImage(width=4, height=4, pixels=b"\x00" * 48)
        dark = detect_objects(dark_img, BrightnessObjectDetector())
        assert dark[0][0] == "dark"

    def test_registry(self):
        assert isinstance(create_object_detector("null"), NullObjectDetector)
        with pytest.raises(KeyError):
            create_object_detector("cloud-api")


class FixedVectorEncoder:
    """Text encoder stub with a fixed vector per string."""

    name = "fixed"
    modality = None
    output_dim = 3

    def __init__(self, table):
        self.table = table

    def encode(self, text):
        return np.asarray(self.table[text], dtype=np.float64)


class TestObjectTextSimilarity:
    def test_identical_embedding_gives_one(self):
        enc = FixedVectorEncoder({"dog": [1.0, 2.0, 3.0]})
        assert object_text_similarity(["dog"], "dog", enc) == pytest.approx(1.0, abs=1e-9)

    def test_antipodal_embedding_gives_minus_one(self):
        enc = FixedVectorEncoder({"dog": [1.0, 0.0, 0.0], "cat": [-1.0, 0.0, 0.0]})
        assert object_text_similarity(["dog"], "cat", enc) == pytest.approx(-1.0, abs=1e-9)

    def test_mean_label_embedding_hand_computed(self):
        table = {
            "person": [1.0, 0.0, 0.0],
            "flag": [0.0, 1.0, 0.0],
            "crowd waving flags": [1.0, 2.0, 2.0],
        }
        enc = FixedVectorEncoder(table)
        mean = [0.5, 0.5, 0.0]
        caption = table["crowd waving flags"]
        dot = sum(m * c for m, c in zip(mean, caption))
        expected = dot / (math.sqrt(sum(m * m for m in mean)) * math.sqrt(sum(c * c for c in caption)))
        got = object_text_similarity(["person", "flag"], "crowd waving flags", enc)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_empty_labels_rejected(self):
        with pytest.raises(ValueError):
            object_text_similarity([], "caption", FixedVectorEncoder({}))

    def test_empty_caption_rejected(self):
        with pytest.raises(ValueError):
            object_text_similarity(["dog"], "", FixedVectorEncoder({}))

    def test_zero_norm_embedding_is_encoder_failure(self):
        enc = FixedVectorEncoder({"dog": [0.0, 0.0, 0.0], "x": [1.0, 0.0, 0.0]})
        with pytest.raises(EncoderFailure):
            object_text_similarity(["dog"], "x", enc)


class TestCosineSimilarity:
    @given(
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.floats(0.1, 100.0),
    )
    def test_symmetry_and_positive_scale_invariance(self, a, b, scale):
        a = np.asarray(a)
        b = np.asarray(b)
        if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
            return
        assert cosine_similarity(a, b) == pytest.approx(cosine_similarity(b, a), abs=1e-12)
        assert cosine_similarity(scale * a, b) == pytest.approx(cosine_similarity(a, b), abs=1e-9)

    def test_result_clipped_to_unit_interval(self):
        v = np.array([1e-8, 1e-8])
        assert -1.0 <= cosine_similarity(v, v) <= 1.0
