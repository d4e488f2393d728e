"""Image loading and visual enrichment: OCR text and object detection.

Engines and detectors are adapters. The bundled glyph engine pairs with the
fixture renderer below: text rendered on a fixed glyph grid is read back
exactly, which gives tests a true round-trip oracle without any external OCR
dependency. Failures of an adapter degrade to empty output; adapters that
return contract-violating output raise EngineFailure instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import EncoderFailure, EngineFailure, UnreadableImage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RGBImage:
    """Decoded image: row-major RGB triples, 8 bits per channel."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")
        expected = self.width * self.height * 3
        if len(self.pixels) != expected:
            raise ValueError(f"pixel buffer length {len(self.pixels)} != {expected}")

    def as_array(self) -> np.ndarray:
        """(height*width, 3) uint8 view of the pixel buffer."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(-1, 3)

    def pixel(self, x: int, y: int) -> tuple[int, int, int]:
        i = (y * self.width + x) * 3
        return self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]


def load_image(path: str | Path) -> RGBImage:
    """Decode any common raster file to 3-channel RGB.

    Alpha is discarded and grayscale replicated across channels. Raises
    UnreadableImage for missing or corrupt files; callers treat the image
    modality as absent.
    """
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            return RGBImage(width=rgb.width, height=rgb.height, pixels=rgb.tobytes())
    except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as exc:
        raise UnreadableImage(f"{path}: {exc}")


# Fixture glyph grid: 5x7 bitmaps on a 6x8 cell with a 2px margin. The OCR
# engine below inverts exactly this layout.
GLYPH_WIDTH = 5
GLYPH_HEIGHT = 7
CELL_WIDTH = GLYPH_WIDTH + 1
CELL_HEIGHT = GLYPH_HEIGHT + 1
GRID_MARGIN = 2

_FONT: dict[str, tuple[int, ...]] = {
    "A": (0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001),
    "B": (0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110),
    "C": (0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110),
    "D": (0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110),
    "E": (0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111),
    "F": (0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000),
    "G": (0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111),
    "H": (0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001),
    "I": (0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110),
    "J": (0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100),
    "K": (0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001),
    "L": (0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111),
    "M": (0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001),
    "N": (0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001, 0b10001),
    "O": (0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110),
    "P": (0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000),
    "Q": (0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101),
    "R": (0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001),
    "S": (0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110),
    "T": (0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100),
    "U": (0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110),
    "V": (0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100),
    "W": (0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b11011, 0b10001),
    "X": (0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001),
    "Y": (0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100),
    "Z": (0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111),
    "0": (0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110),
    "1": (0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110),
    "2": (0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111),
    "3": (0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110),
    "4": (0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010),
    "5": (0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110),
    "6": (0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110),
    "7": (0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000),
    "8": (0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110),
    "9": (0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100),
    " ": (0, 0, 0, 0, 0, 0, 0),
}

FIXTURE_ALPHABET = "".join(sorted(_FONT))

_BITMAP_TO_CHAR = {bitmap: ch for ch, bitmap in _FONT.items()}


def render_text_image(text: str) -> RGBImage:
    """Render text onto the fixture glyph grid (black ink on white).

    Lower-case letters are upper-cased; lines split on newline. Characters
    outside A-Z, 0-9, and space are unsupported.
    """
    lines = [line.upper() for line in text.split("\n")] or [""]
    for line in lines:
        for ch in line:
            if ch not in _FONT:
                raise ValueError(f"unsupported fixture character: {ch!r}")
    n_cols = max((len(line) for line in lines), default=0) or 1
    width = 2 * GRID_MARGIN + n_cols * CELL_WIDTH
    height = 2 * GRID_MARGIN + len(lines) * CELL_HEIGHT
    buf = bytearray([255]) * (width * height * 3)

    for row, line in enumerate(lines):
        for col, ch in enumerate(line):
            bitmap = _FONT[ch]
            x0 = GRID_MARGIN + col * CELL_WIDTH
            y0 = GRID_MARGIN + row * CELL_HEIGHT
            for gy, bits in enumerate(bitmap):
                for gx in range(GLYPH_WIDTH):
                    if bits & (1 << (GLYPH_WIDTH - 1 - gx)):
                        i = ((y0 + gy) * width + (x0 + gx)) * 3
                        buf[i : i + 3] = b"\x00\x00\x00"
    return RGBImage(width=width, height=height, pixels=bytes(buf))


class OcrEngine(Protocol):
    """Adapter returning machine-readable text found in an image."""

    name: str

    def extract(self, img: RGBImage) -> str: ...


class GlyphOcrEngine:
    """Reads text rendered by render_text_image back off the glyph grid.

    Cells that match no known glyph are skipped; images without the grid
    layout yield empty text.
    """

    name = "glyph"

    def extract(self, img: RGBImage) -> str:
        n_cols = (img.width - 2 * GRID_MARGIN) // CELL_WIDTH
        n_rows = (img.height - 2 * GRID_MARGIN) // CELL_HEIGHT
        if n_cols < 1 or n_rows < 1:
            return ""
        lines = []
        for row in range(n_rows):
            chars = []
            for col in range(n_cols):
                bitmap = self._cell_bitmap(img, col, row)
                ch = _BITMAP_TO_CHAR.get(bitmap)
                if ch is not None:
                    chars.append(ch)
            lines.append("".join(chars))
        return "\n".join(lines)

    @staticmethod
    def _cell_bitmap(img: RGBImage, col: int, row: int) -> tuple[int, ...]:
        x0 = GRID_MARGIN + col * CELL_WIDTH
        y0 = GRID_MARGIN + row * CELL_HEIGHT
        rows = []
        for gy in range(GLYPH_HEIGHT):
            bits = 0
            for gx in range(GLYPH_WIDTH):
                r, g, b = img.pixel(x0 + gx, y0 + gy)
                if (r + g + b) // 3 < 128:
                    bits |= 1 << (GLYPH_WIDTH - 1 - gx)
            rows.append(bits)
        return tuple(rows)


class NullOcrEngine:
    """Always reports no text. Useful when OCR is disabled."""

    name = "null"

    def extract(self, img: RGBImage) -> str:
        return ""


def extract_ocr_text(img: RGBImage, engine: OcrEngine) -> str:
    """Whitespace-normalized text recognized in the image; empty when none.

    An engine that raises degrades to empty text with a logged warning; an
    engine returning a non-string violates its contract and raises
    EngineFailure.
    """
    try:
        text = engine.extract(img)
    except Exception as exc:
        logger.warning("OCR engine %s failed: %s", getattr(engine, "name", "?"), exc)
        return ""
    if not isinstance(text, str):
        raise EngineFailure(f"OCR engine {engine.name} returned {type(text).__name__}, expected str")
    return " ".join(text.split())


class ObjectDetector(Protocol):
    """Adapter emitting (label, confidence) pairs from its fixed vocabulary."""

    name: str
    labels: Sequence[str]

    def detect(self, img: RGBImage) -> list[tuple[str, float]]: ...


class NullObjectDetector:
    name = "null"
    labels: tuple[str, ...] = ()

    def detect(self, img: RGBImage) -> list[tuple[str, float]]:
        return []


class BrightnessObjectDetector:
    """Deterministic pixel-statistics detector bundled for offline runs.

    Labels overall brightness and, when one channel clearly dominates, the
    dominant color.
    """

    name = "color"
    labels = ("bright", "dark", "red", "green", "blue")

    def detect(self, img: RGBImage) -> list[tuple[str, float]]:
        arr = img.as_array().astype(np.float64)
        channel_means = arr.mean(axis=0) / 255.0
        brightness = float(channel_means.mean())
        out = []
        if brightness >= 0.5:
            out.append(("bright", brightness))
        else:
            out.append(("dark", 1.0 - brightness))
        dominant = int(np.argmax(channel_means))
        spread = float(channel_means[dominant] - np.median(channel_means))
        if spread > 0.05:
            out.append((("red", "green", "blue")[dominant], min(1.0, spread * 2)))
        return out


class StaticObjectDetector:
    """Returns a fixed detection list; test double."""

    name = "static"

    def __init__(self, detections: list[tuple[str, float]], labels: Optional[Sequence[str]] = None):
        self.detections = list(detections)
        self.labels = tuple(labels) if labels is not None else tuple(lab for lab, _ in detections)

    def detect(self, img: RGBImage) -> list[tuple[str, float]]:
        return list(self.detections)


def detect_objects(img: RGBImage, detector: ObjectDetector) -> list[tuple[str, float]]:
    """Detected (label, confidence) pairs sorted by descending confidence.

    A detector that raises degrades to an empty list with a logged warning.
    Out-of-range confidences or labels outside the detector's vocabulary are
    contract violations and raise EngineFailure.
    """
    try:
        raw = detector.detect(img)
    except Exception as exc:
        logger.warning("object detector %s failed: %s", getattr(detector, "name", "?"), exc)
        return []
    checked = []
    vocabulary = set(detector.labels)
    for label, confidence in raw:
        if not 0.0 <= confidence <= 1.0:
            raise EngineFailure(f"detector {detector.name} emitted confidence {confidence} for {label!r}")
        if label not in vocabulary:
            raise EngineFailure(f"detector {detector.name} emitted label {label!r} outside its vocabulary")
        checked.append((label, float(confidence)))
    return sorted(checked, key=lambda pair: -pair[1])


_OCR_ENGINES: dict[str, type] = {"glyph": GlyphOcrEngine, "null": NullOcrEngine}
_OBJECT_DETECTORS: dict[str, type] = {"color": BrightnessObjectDetector, "null": NullObjectDetector}


def register_ocr_engine(name: str, factory: type) -> None:
    _OCR_ENGINES[name] = factory


def register_object_detector(name: str, factory: type) -> None:
    _OBJECT_DETECTORS[name] = factory


def create_ocr_engine(name: str) -> OcrEngine:
    if name not in _OCR_ENGINES:
        raise KeyError(f"unknown OCR engine {name!r}; known: {sorted(_OCR_ENGINES)}")
    return _OCR_ENGINES[name]()


def create_object_detector(name: str) -> ObjectDetector:
    if name not in _OBJECT_DETECTORS:
        raise KeyError(f"unknown object detector {name!r}; known: {sorted(_OBJECT_DETECTORS)}")
    return _OBJECT_DETECTORS[name]()


def save_png(img: RGBImage, path: str | Path) -> None:
    """Write an RGBImage as a PNG file (deterministic bytes for fixed pixels)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.frombytes("RGB", (img.width, img.height), img.pixels).save(path, format="PNG")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clipped to [-1, 1].

    Raises EncoderFailure when either vector has zero norm (undefined angle).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise EncoderFailure("cosine similarity undefined for zero-norm embedding")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def object_text_similarity(labels: Sequence[str], caption: str, text_encoder) -> float:
    """Cosine between the mean embedding of the labels and the caption embedding.

    Both sides use the same text encoder. Callers require non-empty labels and
    caption; without them the feature is absent upstream.
    """
    if not labels:
        raise ValueError("labels must be non-empty")
    if not caption:
        raise ValueError("caption must be non-empty")
    label_vecs = np.stack([text_encoder.encode(label) for label in labels])
    mean_vec = label_vecs.mean(axis=0)
    caption_vec = text_encoder.encode(caption)
    return cosine_similarity(mean_vec, caption_vec)
