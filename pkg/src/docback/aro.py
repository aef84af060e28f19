"""Automated readability optimization.

For each text box, find the smallest backing opacity on a fixed grid such that
at least a ``coverage`` fraction of the background pixels under the (padded)
box reach the target contrast against the text color once the backing is
blended in. Backings are drawn as anti-aliased rounded rectangles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .color import (Srgb, contrast_ratio_array, linear_to_srgb_array, relative_luminance,
                    relative_luminance_array, srgb_to_linear_array)
from .layout import BBox
from .raster import RasterImage

LIGHT_NEUTRAL = Srgb(0.98, 0.98, 0.98)
DARK_NEUTRAL = Srgb(0.06, 0.06, 0.06)
MAX_SAMPLES = 1_000_000
SUPERSAMPLE = 4


class AroError(ValueError):
    pass


@dataclass(frozen=True)
class AroParams:
    target_contrast: float = 7.0
    coverage: float = 0.98
    padding: float = 24.0
    radius_fraction: float = 0.12
    epsilon: float = 0.02
    alpha_min: float = 0.15
    alpha_step: float = 0.001

    def __post_init__(self):
        if not self.target_contrast >= 1.0:
            raise ValueError("target_contrast must be >= 1")
        if not 0.0 < self.coverage <= 1.0:
            raise ValueError("coverage must be in (0, 1]")
        if not 0.0 <= self.alpha_min <= 1.0:
            raise ValueError("alpha_min must be in [0, 1]")
        if not 0.0 < self.alpha_step <= 0.05:
            raise ValueError("alpha_step must be in (0, 0.05]")
        n = round(1.0 / self.alpha_step)
        if abs(n * self.alpha_step - 1.0) > 1e-9:
            raise ValueError("alpha_step must divide 1 evenly")
        if self.padding < 0 or self.epsilon < 0:
            raise ValueError("padding and epsilon must be >= 0")
        if not 0.0 <= self.radius_fraction <= 0.5:
            raise ValueError("radius_fraction must be in [0, 0.5]")

    @property
    def grid_size(self) -> int:
        """Number of steps; the grid has grid_size + 1 points from 0 to 1."""
        return round(1.0 / self.alpha_step)


class AlphaSolution(NamedTuple):
    alpha_star: float
    coverage: float
    unattainable: bool
    grid_index: int


@dataclass(frozen=True)
class BackingOverlay:
    box: BBox
    corner_radius: float
    overlay_color: Srgb
    alpha: float
    solved_alpha_star: float
    attained_coverage: float
    unattainable: bool = False
    text_box: BBox | None = None
    sample_count: int = 0

    def to_json(self) -> dict:
        return {
            "box": self.box.as_list(),
            "text_box": self.text_box.as_list() if self.text_box else None,
            "corner_radius": self.corner_radius,
            "overlay_color": self.overlay_color.to_hex(),
            "overlay_rgb": list(self.overlay_color.as_tuple()),  # exact; hex is 8-bit
            "alpha_star": self.solved_alpha_star,
            "alpha": self.alpha,
            "attained_coverage": self.attained_coverage,
            "unattainable": self.unattainable,
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_json(cls, d: dict) -> "BackingOverlay":
        return cls(
            box=BBox(*d["box"]),
            corner_radius=float(d["corner_radius"]),
            overlay_color=(Srgb(*d["overlay_rgb"]) if "overlay_rgb" in d
                           else Srgb.from_hex(d["overlay_color"])),
            alpha=float(d["alpha"]),
            solved_alpha_star=float(d["alpha_star"]),
            attained_coverage=float(d["attained_coverage"]),
            unattainable=bool(d.get("unattainable", False)),
            text_box=BBox(*d["text_box"]) if d.get("text_box") else None,
            sample_count=int(d.get("sample_count", 0)),
        )


def blend_luminance(alpha, l_overlay, l_bg):
    return alpha * l_overlay + (1.0 - alpha) * l_bg


def choose_overlay_color(text_color: Srgb) -> Srgb:
    """Light neutral behind dark text, dark neutral behind light text (ties go dark)."""
    return LIGHT_NEUTRAL if relative_luminance(text_color) < 0.5 else DARK_NEUTRAL


def _passing(alpha: float, l_bg: np.ndarray, l_o: float, l_t: float, tau: float) -> int:
    lb = blend_luminance(alpha, l_o, l_bg)
    return int(np.count_nonzero(contrast_ratio_array(lb, l_t) >= tau))


def _monotone(l_bg: np.ndarray, l_o: float, l_t: float) -> bool:
    # contrast along the blend path never decreases iff every pixel starts on the
    # overlay's side of the text luminance and no farther from it than the overlay
    d_o = l_o - l_t
    d_bg = l_bg - l_t
    return bool(np.all((d_bg * d_o >= 0) & (np.abs(d_bg) <= abs(d_o))))


def solve_alpha(l_bg, l_overlay: float, l_text: float, params: AroParams) -> AlphaSolution:
    """Smallest grid opacity whose blended pixels meet the contrast target on
    at least ``params.coverage`` of the samples.

    Uses bisection over grid indices when coverage is provably monotone in
    opacity, and a full ordered scan otherwise. If even opacity 1 falls short,
    returns alpha 1 with ``unattainable`` set.
    """
    l_bg = np.asarray(l_bg, dtype=np.float64).ravel()
    n = l_bg.size
    if n == 0:
        raise AroError("no pixels under box")
    if np.isnan(l_bg).any() or math.isnan(l_overlay) or math.isnan(l_text):
        raise AroError("invalid sample")
    tau, rho, steps = params.target_contrast, params.coverage, params.grid_size

    def ok(k: int) -> bool:
        return _passing(k / steps, l_bg, l_overlay, l_text, tau) / n >= rho

    if _monotone(l_bg, l_overlay, l_text):
        if not ok(steps):
            return AlphaSolution(1.0, _passing(1.0, l_bg, l_overlay, l_text, tau) / n, True, steps)
        lo, hi = -1, steps  # ok(lo) false by convention, ok(hi) true
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
        k = hi
    else:
        k = _scan_first(l_bg, l_overlay, l_text, tau, rho, steps)
        if k is None:
            return AlphaSolution(1.0, _passing(1.0, l_bg, l_overlay, l_text, tau) / n, True, steps)
    alpha = k / steps
    return AlphaSolution(alpha, _passing(alpha, l_bg, l_overlay, l_text, tau) / n, False, k)


def _scan_first(l_bg, l_o, l_t, tau, rho, steps) -> int | None:
    n = l_bg.size
    chunk = max(1, min(steps + 1, 4_000_000 // n))
    for start in range(0, steps + 1, chunk):
        ks = np.arange(start, min(start + chunk, steps + 1))
        alphas = ks / steps
        lb = blend_luminance(alphas[:, None], l_o, l_bg[None, :])
        counts = np.count_nonzero(contrast_ratio_array(lb, l_t) >= tau, axis=1)
        hit = np.nonzero(counts / n >= rho)[0]
        if hit.size:
            return int(ks[hit[0]])
    return None


def finalize_alpha(alpha_star: float, params: AroParams) -> float:
    return min(1.0, max(alpha_star + params.epsilon, params.alpha_min))


def pixel_window(box: BBox, width: int, height: int) -> tuple[int, int, int, int]:
    """Row/column slice bounds of every pixel the box touches, clipped to the image."""
    r0 = max(0, math.floor(box.y0))
    r1 = min(height, math.ceil(box.y1))
    c0 = max(0, math.floor(box.x0))
    c1 = min(width, math.ceil(box.x1))
    return r0, r1, c0, c1


def sample_luminance(background: RasterImage, box: BBox) -> np.ndarray:
    r0, r1, c0, c1 = pixel_window(box, background.width, background.height)
    lum = relative_luminance_array(background.pixels[r0:r1, c0:c1]).ravel()
    if lum.size > MAX_SAMPLES:
        stride = math.ceil(lum.size / MAX_SAMPLES)
        lum = lum[::stride]
    return lum


def build_overlay(text_box: BBox, text_color: Srgb, background: RasterImage,
                  params: AroParams | None = None) -> BackingOverlay:
    """Solve and describe the backing for one text box (pixel coordinates)."""
    params = params or AroParams()
    box = text_box.expand(params.padding).clamp(background.width, background.height)
    if box is None:
        raise AroError(f"box {text_box.as_list()} has zero area inside the image")
    samples = sample_luminance(background, box)
    overlay_color = choose_overlay_color(text_color)
    sol = solve_alpha(samples, relative_luminance(overlay_color),
                      relative_luminance(text_color), params)
    return BackingOverlay(
        box=box,
        corner_radius=params.radius_fraction * min(box.width, box.height),
        overlay_color=overlay_color,
        alpha=finalize_alpha(sol.alpha_star, params),
        solved_alpha_star=sol.alpha_star,
        attained_coverage=sol.coverage,
        unattainable=sol.unattainable,
        text_box=text_box,
        sample_count=int(samples.size),
    )


def rounded_rect_coverage(box: BBox, radius: float, r0: int, r1: int, c0: int, c1: int,
                          ss: int = SUPERSAMPLE) -> np.ndarray:
    """Fraction of each pixel in rows r0:r1, cols c0:c1 inside the rounded rectangle."""
    radius = min(max(radius, 0.0), 0.5 * min(box.width, box.height))
    offs = (np.arange(ss) + 0.5) / ss
    ys = (np.arange(r0, r1)[:, None] + offs[None, :]).ravel()
    xs = (np.arange(c0, c1)[:, None] + offs[None, :]).ravel()
    qx = np.clip(xs, box.x0 + radius, box.x1 - radius)
    qy = np.clip(ys, box.y0 + radius, box.y1 - radius)
    dx2 = (xs - qx) ** 2
    dy2 = (ys - qy) ** 2
    in_x = (xs >= box.x0) & (xs <= box.x1)
    in_y = (ys >= box.y0) & (ys <= box.y1)
    inside = (dy2[:, None] + dx2[None, :] <= radius * radius) & in_y[:, None] & in_x[None, :]
    return inside.reshape(r1 - r0, ss, c1 - c0, ss).mean(axis=(1, 3))


def composite_overlays(background: RasterImage, overlays: Sequence[BackingOverlay]) -> RasterImage:
    """Source-over each backing onto a copy of the background, in order, in linear light."""
    out = background.copy()
    px = out.pixels
    for ov in overlays:
        r0, r1, c0, c1 = pixel_window(ov.box, out.width, out.height)
        if r1 <= r0 or c1 <= c0:
            continue
        a = ov.alpha * rounded_rect_coverage(ov.box, ov.corner_radius, r0, r1, c0, c1)
        a = a[..., None]
        region = px[r0:r1, c0:c1]
        color = np.asarray(ov.overlay_color.as_tuple())
        # blend in linear light so luminance mixes exactly as solve_alpha assumes
        mixed = linear_to_srgb_array(a * srgb_to_linear_array(color)
                                     + (1.0 - a) * srgb_to_linear_array(region[..., :3]))
        rgb = np.where(a == 1.0, color, np.where(a == 0.0, region[..., :3], mixed))
        region[..., :3] = rgb
        region[..., 3:] = a + (1.0 - a) * region[..., 3:]
    return out


def overlay_report(page_index: int, overlays: Sequence[BackingOverlay]) -> dict:
    return {
        "page_index": page_index,
        "overlays": [ov.to_json() for ov in overlays],
        "unattainable_count": sum(ov.unattainable for ov in overlays),
    }
