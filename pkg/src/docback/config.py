"""Pipeline configuration. Defaults follow the reference setup (contrast 7.0,
coverage 0.98, padding 24, radius fraction 0.12, mask strength 0.2, gate 0.29)."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .aro import AroParams
from .latentmask import MODES, LatticeShape
from .layout import ExtractionParams
from .narrative import OPERATING_MODES, PROMPT_ONLY, PROMPT_TEXT


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MaskConfig:
    enabled: bool = True
    lam: float = 0.2
    start_fraction: float = 0.29
    mode: str = "attenuate"
    lattice: tuple[int, int, int] = (64, 64, 3)
    steps: int = 50

    def __post_init__(self):
        object.__setattr__(self, "lattice", tuple(self.lattice))
        if self.mode not in MODES:
            raise ConfigError(f"mask.mode must be one of {MODES}")
        if not 0.0 < self.lam <= 1.0:
            raise ConfigError("mask.lam must be in (0, 1]")
        if not 0.0 <= self.start_fraction <= 1.0:
            raise ConfigError("mask.start_fraction must be in [0, 1]")
        if self.steps < 1:
            raise ConfigError("mask.steps must be >= 1")
        if len(self.lattice) != 3 or self.lattice[2] < 3:
            raise ConfigError("mask.lattice is [h, w, channels] with channels >= 3")
        LatticeShape(*self.lattice)


@dataclass(frozen=True)
class NarrativeConfig:
    window_n: int = 3
    provider: str = "stub"
    operating_mode: str = PROMPT_TEXT
    user_prompt: str | None = None

    def __post_init__(self):
        if self.window_n < 0:
            raise ConfigError("narrative.window_n must be >= 0")
        if self.operating_mode not in OPERATING_MODES:
            raise ConfigError(f"narrative.operating_mode must be one of {OPERATING_MODES}")


@dataclass(frozen=True)
class RenderConfig:
    px_per_pt: float = 1.0
    page_color: str = "#ffffff"
    contrast_threshold: float = 4.5

    def __post_init__(self):
        if not self.px_per_pt > 0:
            raise ConfigError("render.px_per_pt must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    extraction: ExtractionParams = field(default_factory=ExtractionParams)
    aro: AroParams = field(default_factory=AroParams)
    mask: MaskConfig = field(default_factory=MaskConfig)
    narrative: NarrativeConfig = field(default_factory=NarrativeConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    workers: int = 1

    def validate(self) -> "PipelineConfig":
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        n = self.narrative
        if n.operating_mode == PROMPT_ONLY and not n.user_prompt:
            raise ConfigError("prompt_only mode needs narrative.user_prompt")
        if n.provider not in ("", "stub") and not Path(n.provider).is_file():
            raise ConfigError(f"provider config {n.provider!r} does not exist")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        sections = {"extraction": ExtractionParams, "aro": AroParams, "mask": MaskConfig,
                    "narrative": NarrativeConfig, "render": RenderConfig}
        unknown = set(data) - set(sections) - {"workers"}
        if unknown:
            raise ConfigError(f"unknown config section(s) {sorted(unknown)}")
        kwargs = {}
        for name, kind in sections.items():
            raw = data.get(name, {})
            if not isinstance(raw, dict):
                raise ConfigError(f"{name}: expected an object")
            known = {f.name for f in dataclasses.fields(kind)}
            bad = set(raw) - known
            if bad:
                raise ConfigError(f"{name}: unknown field(s) {sorted(bad)}")
            try:
                kwargs[name] = kind(**raw)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{name}: {e}") from None
        kwargs["workers"] = int(data.get("workers", 1))
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_dict(data)

    def with_overrides(self, **sections) -> "PipelineConfig":
        """Replace individual fields, e.g. ``with_overrides(narrative={"window_n": 2})``."""
        out = self
        for name, fields_ in sections.items():
            if fields_:
                try:
                    out = dataclasses.replace(out, **{name: dataclasses.replace(getattr(out, name), **fields_)})
                except ValueError as e:
                    raise ConfigError(f"{name}: {e}") from None
        return out
