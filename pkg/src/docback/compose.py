"""Layered page assembly and the WCAG contrast-coverage evaluator."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aro import BackingOverlay, composite_overlays, pixel_window
from .color import Srgb, contrast_ratio_array, relative_luminance
from .layout import BBox
from .raster import RasterImage

log = logging.getLogger(__name__)

WCAG_AA = 4.5


class CompositionError(ValueError):
    pass


@dataclass
class PageLayers:
    background: RasterImage
    backings: list[BackingOverlay] = field(default_factory=list)
    foreground: RasterImage | None = None


def over(dst: RasterImage, src: RasterImage) -> RasterImage:
    """Straight-alpha source-over of ``src`` onto ``dst``."""
    a = src.pixels[..., 3:]
    out = np.empty_like(dst.pixels)
    out[..., :3] = a * src.pixels[..., :3] + (1.0 - a) * dst.pixels[..., :3]
    out[..., 3:] = a + (1.0 - a) * dst.pixels[..., 3:]
    return RasterImage(out)


def compose_page(layers: PageLayers) -> RasterImage:
    bg = layers.background
    fg = layers.foreground
    if fg is not None and (fg.width, fg.height) != (bg.width, bg.height):
        raise CompositionError(f"foreground is {fg.width}x{fg.height}, "
                               f"background is {bg.width}x{bg.height}")
    for i, ov in enumerate(layers.backings):
        if ov.box.clamp(bg.width, bg.height) is None:
            raise CompositionError(f"backing {i} lies outside the {bg.width}x{bg.height} page")
    out = composite_overlays(bg, layers.backings)
    if fg is not None:
        out = over(out, fg)
    return out


@dataclass
class BoxReadability:
    box: BBox
    min_cr: float
    coverage: float
    passed: bool
    pixel_count: int

    def to_json(self) -> dict:
        return {"box": self.box.as_list(), "min_cr": self.min_cr,
                "coverage_at_threshold": self.coverage, "pass": self.passed,
                "pixel_count": self.pixel_count}


@dataclass
class ReadabilityReport:
    per_box: list[BoxReadability]
    page_pass_rate: float
    pixel_pass_rate: float
    threshold: float
    required_coverage: float
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "required_coverage": self.required_coverage,
            "page_pass_rate": self.page_pass_rate,
            "pixel_pass_rate": self.pixel_pass_rate,
            "boxes": [b.to_json() for b in self.per_box],
            "warnings": self.warnings,
        }


def evaluate_wcag(composited: RasterImage, text_boxes: Sequence[BBox],
                  text_color: Srgb | Sequence[Srgb], threshold: float = WCAG_AA,
                  coverage: float = 0.98) -> ReadabilityReport:
    """Contrast of every pixel under each text box against the text color.

    A box passes when the fraction of its pixels at or above ``threshold`` is
    at least ``coverage``. ``text_color`` may be one color or one per box.
    """
    if isinstance(text_color, Srgb):
        colors = [text_color] * len(text_boxes)
    else:
        colors = list(text_color)
        if len(colors) != len(text_boxes):
            raise ValueError("need one text color per box")
    if not text_boxes:
        msg = "no text boxes; pass rate defined as 1.0"
        log.warning(msg)
        return ReadabilityReport([], 1.0, 1.0, threshold, coverage, [msg])
    lum = composited.luminance()
    per_box = []
    total_px = total_ok = 0
    for box, color in zip(text_boxes, colors):
        r0, r1, c0, c1 = pixel_window(box, composited.width, composited.height)
        if r1 <= r0 or c1 <= c0:
            raise ValueError(f"text box {box.as_list()} lies outside the image")
        cr = contrast_ratio_array(lum[r0:r1, c0:c1], relative_luminance(color))
        n_ok = int(np.count_nonzero(cr >= threshold))
        frac = n_ok / cr.size
        per_box.append(BoxReadability(box, float(cr.min()), frac, frac >= coverage, int(cr.size)))
        total_px += cr.size
        total_ok += n_ok
    rate = sum(b.passed for b in per_box) / len(per_box)
    return ReadabilityReport(per_box, rate, total_ok / total_px, threshold, coverage)
