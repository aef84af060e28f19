"""WCAG 2.x color math: sRGB linearization, relative luminance, contrast ratio.

Scalar functions accept plain floats; the ``*_array`` variants operate on
numpy arrays whose last axis holds RGB(A) channels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)
_SRGB_KNEE = 0.04045


def _clamp01(v: float) -> float:
    if math.isnan(v):
        raise ValueError("color channel is NaN")
    return min(1.0, max(0.0, v))


@dataclass(frozen=True)
class Srgb:
    """sRGB-encoded color, channels in [0, 1]. Out-of-range input is clamped."""

    r: float
    g: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "r", _clamp01(float(self.r)))
        object.__setattr__(self, "g", _clamp01(float(self.g)))
        object.__setattr__(self, "b", _clamp01(float(self.b)))

    @classmethod
    def from_hex(cls, value: str) -> "Srgb":
        s = value.strip().lstrip("#")
        if len(s) == 3:
            s = "".join(ch * 2 for ch in s)
        if len(s) != 6:
            raise ValueError(f"bad hex color {value!r}")
        return cls(*(int(s[i:i + 2], 16) / 255.0 for i in (0, 2, 4)))

    def to_hex(self) -> str:
        return "#" + "".join(f"{round(c * 255):02x}" for c in self.as_tuple())

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.g, self.b)


BLACK = Srgb(0.0, 0.0, 0.0)
WHITE = Srgb(1.0, 1.0, 1.0)


def srgb_to_linear(c: float) -> float:
    """Decode one sRGB channel to linear light. Input is clamped to [0, 1] first."""
    c = _clamp01(float(c))
    if c <= _SRGB_KNEE:
        return c / 12.92
    return ((c + 0.055) / 1.055) ** 2.4


def srgb_to_linear_array(c: np.ndarray) -> np.ndarray:
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= _SRGB_KNEE, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb_array(c: np.ndarray) -> np.ndarray:
    """Inverse of srgb_to_linear_array (encode linear light back to sRGB)."""
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= _SRGB_KNEE / 12.92, c * 12.92, 1.055 * c ** (1 / 2.4) - 0.055)


def relative_luminance(color: Srgb) -> float:
    wr, wg, wb = LUMA_WEIGHTS
    return (wr * srgb_to_linear(color.r)
            + wg * srgb_to_linear(color.g)
            + wb * srgb_to_linear(color.b))


def relative_luminance_array(rgb: np.ndarray) -> np.ndarray:
    """Luminance of every pixel; ``rgb`` has shape (..., 3) or (..., 4)."""
    lin = srgb_to_linear_array(np.asarray(rgb)[..., :3])
    wr, wg, wb = LUMA_WEIGHTS
    return wr * lin[..., 0] + wg * lin[..., 1] + wb * lin[..., 2]


def contrast_ratio(l1: float, l2: float) -> float:
    """WCAG contrast ratio between two relative luminances, in [1, 21]."""
    hi, lo = (l1, l2) if l1 >= l2 else (l2, l1)
    return (hi + 0.05) / (lo + 0.05)


def contrast_ratio_array(l1, l2) -> np.ndarray:
    l1 = np.asarray(l1, dtype=np.float64)
    l2 = np.asarray(l2, dtype=np.float64)
    return (np.maximum(l1, l2) + 0.05) / (np.minimum(l1, l2) + 0.05)
