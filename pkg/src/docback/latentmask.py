"""Time-gated latent attenuation on a toy flow sampler.

The sampler integrates ``x <- x - v * dt`` from t=1 down to t=0. Once the gate
opens, the velocity inside protected cells is scaled by ``lam`` so those cells
move less than the rest of the lattice.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .layout import BBox

ATTENUATE = "attenuate"
LITERAL = "literal"
MODES = (ATTENUATE, LITERAL)


class MaskingError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeShape:
    h: int
    w: int
    channels: int = 4

    def __post_init__(self):
        if self.h < 1 or self.w < 1 or self.channels < 1:
            raise ValueError(f"lattice dims must be >= 1, got {self}")

    @property
    def array_shape(self) -> tuple[int, int, int]:
        return (self.h, self.w, self.channels)


@dataclass
class AttenuationMask:
    shape: LatticeShape
    values: np.ndarray  # (h, w), each entry lam or 1
    lam: float
    source: dict = field(default_factory=dict)

    @property
    def masked(self) -> np.ndarray:
        return self.values != 1.0

    @property
    def masked_fraction(self) -> float:
        return float(self.masked.mean())

    def to_json(self) -> dict:
        return {
            "shape": [self.shape.h, self.shape.w, self.shape.channels],
            "lambda": self.lam,
            "source": self.source,
            "masked_cells": int(self.masked.sum()),
            "masked_fraction": self.masked_fraction,
            "rows": ["".join("#" if m else "." for m in row) for row in self.masked],
        }


def _check_lambda(lam: float):
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must be in (0, 1], got {lam}")


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


def build_mask_centered(shape: LatticeShape, rho_mask: float, lam: float) -> AttenuationMask:
    """Centered window covering roughly ``rho_mask`` of the lattice."""
    if not 0.0 <= rho_mask <= 1.0:
        raise ValueError("rho_mask must be in [0, 1]")
    _check_lambda(lam)
    side = math.sqrt(rho_mask)
    rows, cols = _round_half_up(side * shape.h), _round_half_up(side * shape.w)
    values = np.ones((shape.h, shape.w))
    r0, c0 = (shape.h - rows) // 2, (shape.w - cols) // 2
    values[r0:r0 + rows, c0:c0 + cols] = lam
    return AttenuationMask(shape, values, lam, {"mode": "centered", "rho_mask": rho_mask})


def _snap(v: float) -> float:
    r = round(v)
    return float(r) if abs(v - r) < 1e-9 else v


def build_mask_from_boxes(shape: LatticeShape, boxes: Sequence[BBox], page_w: float,
                          page_h: float, lam: float) -> AttenuationMask:
    """Rasterize page boxes onto the lattice, rounding outward so no box is under-covered."""
    _check_lambda(lam)
    values = np.ones((shape.h, shape.w))
    sx, sy = shape.w / page_w, shape.h / page_h
    for b in boxes:
        c0 = max(0, math.floor(_snap(b.x0 * sx)))
        c1 = min(shape.w, math.ceil(_snap(b.x1 * sx)))
        r0 = max(0, math.floor(_snap(b.y0 * sy)))
        r1 = min(shape.h, math.ceil(_snap(b.y1 * sy)))
        if r1 > r0 and c1 > c0:
            values[r0:r1, c0:c1] = lam
    return AttenuationMask(shape, values, lam, {
        "mode": "boxes", "page_size": [page_w, page_h],
        "boxes": [b.as_list() for b in boxes]})


@dataclass(frozen=True)
class GateSchedule:
    total_steps: int = 50
    start_fraction: float = 0.29

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if not 0.0 <= self.start_fraction <= 1.0:
            raise ValueError("start_fraction must be in [0, 1]")


def gate_active(k: int, schedule: GateSchedule) -> bool:
    return k / schedule.total_steps >= schedule.start_fraction


@dataclass
class LatentState:
    x: np.ndarray  # (h, w, channels)
    t: float = 1.0

    @property
    def shape(self) -> LatticeShape:
        h, w, c = self.x.shape
        return LatticeShape(h, w, c)


class VelocityProvider(Protocol):
    name: str

    def evaluate(self, state: LatentState) -> np.ndarray: ...


class ConstantVelocity:
    """Same velocity everywhere, every step."""

    def __init__(self, value, shape: LatticeShape | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.shape = shape
        self.name = "constant"

    def evaluate(self, state):
        return np.broadcast_to(self.value, state.x.shape).copy()


class StraightPathVelocity:
    """Rectified-flow style straight path from ``source`` (t=1) to ``target`` (t=0).

    The velocity ``source - target`` is constant, so an unmasked Euler run lands
    exactly on the target.
    """

    def __init__(self, source: np.ndarray, target: np.ndarray):
        self.source = np.asarray(source, dtype=np.float64)
        self.target = np.asarray(target, dtype=np.float64)
        if self.source.shape != self.target.shape:
            raise ValueError("source and target shapes differ")
        self._v = self.source - self.target
        self.name = "straight_path"

    def evaluate(self, state):
        return self._v.copy()


def procedural_texture(shape: LatticeShape, seed_text: str) -> np.ndarray:
    """Deterministic smooth colored pattern in [0, 1] seeded by a string."""
    seed = int.from_bytes(hashlib.sha256(seed_text.encode("utf-8")).digest()[:8], "little")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:shape.h, 0:shape.w]
    u, v = xx / max(1, shape.w - 1), yy / max(1, shape.h - 1)
    out = np.empty(shape.array_shape)
    base = rng.uniform(0.25, 0.8, size=shape.channels)
    for c in range(shape.channels):
        field_ = np.zeros((shape.h, shape.w))
        for _ in range(4):
            fx, fy = rng.uniform(0.5, 4.0, size=2)
            ph = rng.uniform(0, 2 * np.pi)
            amp = rng.uniform(0.03, 0.12)
            field_ += amp * np.sin(2 * np.pi * (fx * u + fy * v) + ph)
        out[..., c] = base[c] + field_
    return np.clip(out, 0.0, 1.0)


class TextureVelocity:
    """Velocity that pulls each cell toward a procedural texture, ``(x - texture) / t``.

    Unlike the straight-path provider this one depends on the current state.
    """

    def __init__(self, shape: LatticeShape, seed_text: str):
        self.target = procedural_texture(shape, seed_text)
        self.name = "texture"

    def evaluate(self, state):
        return (state.x - self.target) / max(state.t, 1e-6)


def _provider_name(provider) -> str:
    return getattr(provider, "name", type(provider).__name__)


def gated_step(state: LatentState, provider, mask: AttenuationMask, schedule: GateSchedule,
               k: int, dt: float, mode: str = ATTENUATE) -> tuple[LatentState, np.ndarray]:
    """One Euler step; returns the new state and the velocity actually applied."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if state.x.shape[:2] != mask.values.shape:
        raise MaskingError(f"state lattice {state.x.shape[:2]} != mask {mask.values.shape}")
    v = np.asarray(provider.evaluate(state), dtype=np.float64)
    if v.shape != state.x.shape:
        raise MaskingError(f"provider {_provider_name(provider)} returned shape {v.shape}, "
                           f"expected {state.x.shape}")
    if not np.all(np.isfinite(v)):
        raise MaskingError(f"provider {_provider_name(provider)} returned non-finite velocity")
    if mode == ATTENUATE and gate_active(k, schedule):
        v = mask.values[..., None] * v
    # literal mode: m*v + (1-m)*stopgrad(v) has the value of v at sampling time
    return LatentState(state.x - v * dt, state.t - dt), v


def run_sampler(x0: LatentState, provider, mask: AttenuationMask, schedule: GateSchedule,
                mode: str = ATTENUATE) -> tuple[LatentState, list[dict]]:
    """Integrate K uniform steps from t=1 to t=0. Returns final state and per-step trace."""
    K = schedule.total_steps
    dt = 1.0 / K
    state = LatentState(np.array(x0.x, dtype=np.float64), x0.t)
    inside = mask.masked
    outside = ~inside
    trace = []
    for k in range(K):
        state, v = gated_step(state, provider, mask, schedule, k, dt, mode)
        speed = np.abs(v).mean(axis=2)
        trace.append({
            "step": k,
            "t": state.t,
            "gate_active": gate_active(k, schedule),
            "mean_abs_v_inside": float(speed[inside].mean()) if inside.any() else None,
            "mean_abs_v_outside": float(speed[outside].mean()) if outside.any() else None,
        })
    return state, trace


def vanilla_sample(x0: np.ndarray, provider, total_steps: int) -> np.ndarray:
    """Plain Euler integration with no mask, for reference runs."""
    dt = 1.0 / total_steps
    state = LatentState(np.array(x0, dtype=np.float64), 1.0)
    for _ in range(total_steps):
        v = provider.evaluate(state)
        state = LatentState(state.x - v * dt, state.t - dt)
    return state.x
