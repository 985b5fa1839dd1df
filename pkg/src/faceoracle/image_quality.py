"""FIQA measure tools operating on decoded luminance images.

Each shipped measure maps a face-region pixel statistic onto an integer
quality value in [0, 100] (higher is better) through an explicit
closed-form formula, so results reproduce bit for bit on any platform.
Subject-related measures (expression, pose, ...) are registered for
routing but are not computable here; requesting them raises
MeasureUnavailable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _png
from .errors import (
    CorruptImage,
    EmptyComponents,
    InvalidAnnotation,
    MeasureUnavailable,
    NoBackground,
    UnknownMeasure,
    UnsupportedFormat,
)


def round_half_away(value: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    if value >= 0:
        return int(math.floor(value + 0.5))
    return int(math.ceil(value - 0.5))


@dataclass(frozen=True)
class QualityConstants:
    """Every tunable constant of the shipped measures, in one place."""

    overexposure_threshold: int = 247
    underexposure_threshold: int = 8
    entropy_bins: int = 256
    entropy_max_bits: float = 8.0
    uniformity_bins: int = 64
    background_sigma_scale: float = 64.0
    sharpness_midpoint: float = 500.0
    sharpness_scale: float = 150.0


CONSTANTS = QualityConstants()

MIN_FACE_SIDE = 8


@dataclass
class LumaImage:
    """8-bit luminance plane, row-major."""

    width: int
    height: int
    luma: np.ndarray

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        arr = np.asarray(self.luma)
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("luma values must lie in [0, 255]")
        arr = np.array(arr, dtype=np.uint8).reshape(-1)
        if arr.size != self.width * self.height:
            raise ValueError("luma length must equal width*height")
        arr.flags.writeable = False
        self.luma = arr

    @property
    def matrix(self) -> np.ndarray:
        """(height, width) view of the luminance plane."""
        return self.luma.reshape(self.height, self.width)


@dataclass(frozen=True)
class FaceAnnotation:
    """Axis-aligned face rectangle in pixel units."""

    left: int
    top: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.left < 0 or self.top < 0:
            raise InvalidAnnotation("face region must not extend past the image origin")
        if self.width < MIN_FACE_SIDE or self.height < MIN_FACE_SIDE:
            raise InvalidAnnotation(
                f"face region sides must be at least {MIN_FACE_SIDE} pixels"
            )

    def validate_for(self, img: LumaImage) -> None:
        if self.left + self.width > img.width or self.top + self.height > img.height:
            raise InvalidAnnotation("face region extends outside the image")

    def pixels(self, img: LumaImage) -> np.ndarray:
        self.validate_for(img)
        return img.matrix[
            self.top : self.top + self.height, self.left : self.left + self.width
        ]


@dataclass(frozen=True)
class QualityComponent:
    measure_id: str
    raw: float
    quality: int


@dataclass
class QualityReport:
    image_id: str
    components: dict[str, QualityComponent] = field(default_factory=dict)
    unified: QualityComponent | None = None


# --- decoding ---

def decode_image(data: bytes) -> LumaImage:
    """Decode PNG (8-bit gray/RGB) or binary PPM (P6) bytes to a luminance plane.

    Color inputs are converted per pixel with luma = round(0.299R + 0.587G + 0.114B).
    """
    if _png.looks_like_png(data):
        width, height, pixels = _png.read_png(data)
    elif data[:2] == b"P6":
        width, height, pixels = _read_ppm(data)
    else:
        raise UnsupportedFormat("expected PNG (8-bit gray/RGB) or binary PPM (P6)")
    if pixels.ndim == 3:
        luma = rgb_to_luma(pixels)
    else:
        luma = pixels
    return LumaImage(width=width, height=height, luma=luma.reshape(-1).copy())


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    r = rgb[..., 0].astype(np.float64)
    g = rgb[..., 1].astype(np.float64)
    b = rgb[..., 2].astype(np.float64)
    return np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5).astype(np.uint8)


_PPM_WHITESPACE = b" \t\r\n\x0b\x0c"


def _read_ppm(data: bytes) -> tuple[int, int, np.ndarray]:
    """Parse a binary PPM (P6, maxval 255) into (width, height, rgb array)."""
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        # skip whitespace and '#' comment lines between header fields
        while pos < len(data) and data[pos : pos + 1] in (
            b" ", b"\t", b"\r", b"\n", b"\x0b", b"\x0c", b"#",
        ):
            if data[pos : pos + 1] == b"#":
                nl = data.find(b"\n", pos)
                if nl == -1:
                    raise CorruptImage("unterminated PPM comment")
                pos = nl + 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise CorruptImage("malformed PPM header")
        fields.append(int(data[start:pos]))
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedFormat("only 8-bit PPM (maxval 255) supported")
    if width < 1 or height < 1:
        raise CorruptImage("zero image dimension")
    if pos >= len(data) or data[pos : pos + 1] not in (b" ", b"\t", b"\r", b"\n"):
        raise CorruptImage("missing whitespace before PPM raster")
    pos += 1
    raster = data[pos : pos + width * height * 3]
    if len(raster) < width * height * 3:
        raise CorruptImage("truncated PPM raster")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return width, height, arr


def parse_facebox(text: str) -> FaceAnnotation:
    """Parse a sidecar annotation: four ASCII integers "left top width height"."""
    parts = text.split()
    if len(parts) != 4:
        raise InvalidAnnotation("facebox must contain exactly four integers")
    try:
        left, top, width, height = (int(p) for p in parts)
    except ValueError:
        raise InvalidAnnotation("facebox fields must be ASCII integers") from None
    return FaceAnnotation(left, top, width, height)


def facebox_sidecar_path(image_path: Path | str) -> Path:
    """Sidecar path for an image: X.png -> X.facebox."""
    return Path(image_path).with_suffix(".facebox")


def default_face_region(width: int, height: int) -> FaceAnnotation:
    """Fallback region when no annotation is supplied.

    Centered rectangle covering the middle 50% of the width and 62.5% of
    the height, clamped to the minimum annotatable size.
    """
    w = max(MIN_FACE_SIDE, width // 2)
    h = max(MIN_FACE_SIDE, (height * 5) // 8)
    return FaceAnnotation((width - w) // 2 if width > w else 0,
                          (height - h) // 2 if height > h else 0, w, h)


# --- measures ---

def dynamic_range(img: LumaImage, ann: FaceAnnotation) -> QualityComponent:
    """Shannon entropy (bits) of the 256-bin face-region luminance histogram."""
    face = ann.pixels(img)
    counts = np.bincount(face.ravel(), minlength=CONSTANTS.entropy_bins)
    probs = counts[counts > 0] / face.size
    entropy = float(-(probs * np.log2(probs)).sum()) + 0.0  # +0.0 folds -0.0
    quality = round_half_away(
        100.0 * min(1.0, entropy / CONSTANTS.entropy_max_bits)
    )
    return QualityComponent("dynamic_range", entropy, quality)


def over_exposure(img: LumaImage, ann: FaceAnnotation) -> QualityComponent:
    """Proportion of face pixels at or above the saturation threshold."""
    face = ann.pixels(img)
    p = int(np.count_nonzero(face >= CONSTANTS.overexposure_threshold)) / face.size
    return QualityComponent("over_exposure", p, round_half_away(100.0 * (1.0 - p)))


def under_exposure(img: LumaImage, ann: FaceAnnotation) -> QualityComponent:
    """Proportion of face pixels at or below the shadow-crush threshold."""
    face = ann.pixels(img)
    p = int(np.count_nonzero(face <= CONSTANTS.underexposure_threshold)) / face.size
    return QualityComponent("under_exposure", p, round_half_away(100.0 * (1.0 - p)))


def illumination_uniformity(img: LumaImage, ann: FaceAnnotation) -> QualityComponent:
    """Histogram intersection between the left and right face halves.

    64-bin normalized luminance histograms; with an odd region width the
    middle column belongs to the left half.
    """
    face = ann.pixels(img)
    left_width = (ann.width + 1) // 2
    left = face[:, :left_width]
    right = face[:, left_width:]
    bins = CONSTANTS.uniformity_bins
    shift = 8 - int(math.log2(bins))  # 256 levels folded into `bins` buckets
    hist_left = np.bincount((left.ravel() >> shift), minlength=bins) / left.size
    hist_right = np.bincount((right.ravel() >> shift), minlength=bins) / right.size
    overlap = float(np.minimum(hist_left, hist_right).sum())
    return QualityComponent(
        "illumination_uniformity", overlap, round_half_away(100.0 * overlap)
    )


def background_uniformity(img: LumaImage, ann: FaceAnnotation) -> QualityComponent:
    """Population standard deviation of the luma outside the face region."""
    ann.validate_for(img)
    n_background = img.width * img.height - ann.width * ann.height
    if n_background == 0:
        raise NoBackground("face region covers the entire image")
    whole = img.matrix.astype(np.int64)
    face = ann.pixels(img).astype(np.int64)
    # exact integer sums, so the variance is computed from exact moments
    s = int(whole.sum()) - int(face.sum())
    ssq = int((whole * whole).sum()) - int((face * face).sum())
    variance = (ssq * n_background - s * s) / (n_background * n_background)
    sigma = math.sqrt(variance)
    quality = round_half_away(
        100.0 * max(0.0, 1.0 - sigma / CONSTANTS.background_sigma_scale)
    )
    return QualityComponent("background_uniformity", sigma, quality)


def sharpness_quality(raw: float) -> int:
    """Logistic mapping from Laplacian variance to [0, 100]."""
    exponent = -(raw - CONSTANTS.sharpness_midpoint) / CONSTANTS.sharpness_scale
    return round_half_away(100.0 / (1.0 + math.exp(exponent)))


def sharpness(img: LumaImage, ann: FaceAnnotation) -> QualityComponent:
    """Population variance of the 4-neighbor Laplacian over interior face pixels."""
    face = ann.pixels(img).astype(np.int64)
    lap = (
        4 * face[1:-1, 1:-1]
        - face[1:-1, :-2]
        - face[1:-1, 2:]
        - face[:-2, 1:-1]
        - face[2:, 1:-1]
    )
    n = lap.size
    s = int(lap.sum())
    ssq = int((lap * lap).sum())
    raw = (ssq * n - s * s) / (n * n)
    return QualityComponent("sharpness", raw, sharpness_quality(raw))


def unified_quality_score(components: list[QualityComponent]) -> QualityComponent:
    """Arithmetic mean of component quality values."""
    if not components:
        raise EmptyComponents("unified score needs at least one component")
    mean = sum(c.quality for c in components) / len(components)
    return QualityComponent(UNIFIED_MEASURE_ID, float(mean), round_half_away(mean))


COMPONENT_MEASURES: tuple[str, ...] = (
    "dynamic_range",
    "over_exposure",
    "under_exposure",
    "illumination_uniformity",
    "background_uniformity",
    "sharpness",
)

UNIFIED_MEASURE_ID = "unified_quality_score"

# Routable but not computable without subject analysis models.
UNAVAILABLE_MEASURES: tuple[str, ...] = (
    "expression_neutrality",
    "pose",
    "mouth_closed",
    "occlusion",
)

MEASURE_FUNCS = {
    "dynamic_range": dynamic_range,
    "over_exposure": over_exposure,
    "under_exposure": under_exposure,
    "illumination_uniformity": illumination_uniformity,
    "background_uniformity": background_uniformity,
    "sharpness": sharpness,
}

MEASURE_LABELS = {
    "dynamic_range": "dynamic range",
    "over_exposure": "over-exposure",
    "under_exposure": "under-exposure",
    "illumination_uniformity": "illumination uniformity",
    "background_uniformity": "background uniformity",
    "sharpness": "sharpness",
    "unified_quality_score": "unified quality score",
    "expression_neutrality": "expression neutrality",
    "pose": "pose",
    "mouth_closed": "mouth closed",
    "occlusion": "occlusion",
}

ALL_MEASURE_IDS = frozenset(
    (*COMPONENT_MEASURES, UNIFIED_MEASURE_ID, *UNAVAILABLE_MEASURES)
)


def assess(
    img: LumaImage,
    ann: FaceAnnotation,
    measures: list[str],
    image_id: str = "",
) -> QualityReport:
    """Run the requested measures on one image.

    Requesting the unified score computes it over all six shipped
    component measures, which are then also included in the report.
    """
    ann.validate_for(img)
    for measure_id in measures:
        if measure_id not in ALL_MEASURE_IDS:
            raise UnknownMeasure(f"unknown measure: {measure_id}")
    report = QualityReport(image_id=image_id)
    for measure_id in measures:
        if measure_id in UNAVAILABLE_MEASURES:
            raise MeasureUnavailable(
                f"measure {measure_id} requires subject analysis models "
                "that are not shipped"
            )
        if measure_id == UNIFIED_MEASURE_ID:
            for component_id in COMPONENT_MEASURES:
                if component_id not in report.components:
                    report.components[component_id] = MEASURE_FUNCS[component_id](img, ann)
            report.unified = unified_quality_score(
                [report.components[c] for c in COMPONENT_MEASURES]
            )
        elif measure_id not in report.components:
            report.components[measure_id] = MEASURE_FUNCS[measure_id](img, ann)
    return report
