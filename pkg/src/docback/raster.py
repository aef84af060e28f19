"""Float RGBA rasters and 8-bit PNG I/O."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .color import Srgb, relative_luminance_array


@dataclass
class RasterImage:
    """Row-major RGBA image, float64 channels in [0, 1], shape (height, width, 4)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 4:
            raise ValueError(f"expected (h, w, 4) pixels, got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("raster contains non-finite values")
        self.pixels = np.clip(px, 0.0, 1.0)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, color: Srgb, alpha: float = 1.0) -> "RasterImage":
        px = np.empty((height, width, 4))
        px[..., :3] = color.as_tuple()
        px[..., 3] = alpha
        return cls(px)

    @classmethod
    def from_rgb(cls, rgb: np.ndarray) -> "RasterImage":
        rgb = np.asarray(rgb, dtype=np.float64)
        a = np.ones(rgb.shape[:2] + (1,))
        return cls(np.concatenate([rgb[..., :3], a], axis=2))

    def copy(self) -> "RasterImage":
        return RasterImage(self.pixels.copy())

    def luminance(self) -> np.ndarray:
        return relative_luminance_array(self.pixels)

    def to_uint8(self) -> np.ndarray:
        return np.rint(self.pixels * 255.0).astype(np.uint8)

    def quantized(self) -> "RasterImage":
        """Round-trip through 8-bit channels, as a PNG save/load would."""
        return RasterImage(self.to_uint8().astype(np.float64) / 255.0)

    def pixel_digest(self) -> str:
        """sha256 over the 8-bit pixel data; independent of PNG encoder settings."""
        q = self.to_uint8()
        h = hashlib.sha256()
        h.update(f"{q.shape[1]}x{q.shape[0]}:".encode())
        h.update(q.tobytes())
        return h.hexdigest()

    def resized(self, width: int, height: int) -> "RasterImage":
        if (width, height) == (self.width, self.height):
            return self.copy()
        channels = [
            np.asarray(Image.fromarray(self.pixels[..., c].astype(np.float32))
                       .resize((width, height), Image.BILINEAR), dtype=np.float64)
            for c in range(4)
        ]
        return RasterImage(np.stack(channels, axis=2))


def read_png(path: str | Path) -> RasterImage:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGBA"), dtype=np.float64) / 255.0
    return RasterImage(arr)


def write_png(image: RasterImage, path: str | Path):
    Image.fromarray(image.to_uint8()).save(path, format="PNG")


def write_gray_png(values: np.ndarray, path: str | Path):
    """Write a 2-D array in [0, 1] as an 8-bit grayscale PNG."""
    q = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(q).save(path, format="PNG")
