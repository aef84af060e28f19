"""End-to-end document runs and single-page refinement.

A run directory looks like::

    run/
      manifest.json  config.json  summaries.json  instructions.json  bank.json
      page_000/ regions.json mask.json mask.png trace.json background.png
                overlays.json composite.png readability.json
                [foreground.png page.png]
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .aro import build_overlay, overlay_report
from .color import Srgb
from .compose import PageLayers, compose_page, evaluate_wcag
from .config import ConfigError, PipelineConfig
from .latentmask import (GateSchedule, LatentState, LatticeShape, StraightPathVelocity,
                         build_mask_from_boxes, procedural_texture, run_sampler)
from .layout import BBox, Extraction, extract, load_layout
from .narrative import (PROMPT_ONLY, Instruction, NarrativeBank, PageSummary, bank_prefix,
                        instruct, run_document, summarize)
from .providers import make_provider
from .raster import RasterImage, read_png, write_gray_png, write_png

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class RefineError(ValueError):
    pass


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _artifact(run_dir: Path, path: Path, image: RasterImage | None = None) -> dict:
    rel = path.relative_to(run_dir).as_posix()
    if image is not None:
        return {"path": rel, "pixel_sha256": image.pixel_digest()}
    return {"path": rel, "sha256": file_digest(path)}


def page_dir_name(index: int) -> str:
    return f"page_{index:03d}"


def find_page_image(directory: Path | None, index: int) -> Path | None:
    if directory is None:
        return None
    for name in (f"page_{index:03d}.png", f"page_{index}.png"):
        p = Path(directory) / name
        if p.is_file():
            return p
    return None


def toy_background(instruction: str, rep_boxes: Sequence[BBox], page_w: float, page_h: float,
                   width: int, height: int, config: PipelineConfig):
    """Edit a blank page toward an instruction-seeded texture with a masked flow sampler."""
    mc = config.mask
    shape = LatticeShape(*mc.lattice)
    blank = np.broadcast_to(Srgb.from_hex(config.render.page_color).as_tuple()
                            + (1.0,) * (shape.channels - 3), shape.array_shape).astype(np.float64)
    target = procedural_texture(shape, instruction)
    provider = StraightPathVelocity(blank, target)
    boxes = rep_boxes if mc.enabled else []
    mask = build_mask_from_boxes(shape, boxes, page_w, page_h, mc.lam)
    schedule = GateSchedule(mc.steps, mc.start_fraction)
    final, trace = run_sampler(LatentState(blank.copy(), 1.0), provider, mask, schedule, mc.mode)
    lattice_img = RasterImage.from_rgb(np.clip(final.x[..., :3], 0.0, 1.0))
    return lattice_img.resized(width, height), mask, trace


@dataclass
class PageResult:
    index: int
    entry: dict
    unattainable: int


def _process_page(run_dir: Path, ex: Extraction, page_w: float, page_h: float,
                  instruction: Instruction, config: PipelineConfig,
                  background: RasterImage | None = None, foreground: RasterImage | None = None,
                  write_regions: bool = True) -> PageResult:
    pdir = run_dir / page_dir_name(ex.page_index)
    pdir.mkdir(parents=True, exist_ok=True)
    arts: dict[str, dict] = {}

    regions_path = pdir / "regions.json"
    if write_regions:
        write_json(regions_path, ex.to_json())
    arts["regions"] = _artifact(run_dir, regions_path)

    supplied = background is not None
    if not supplied:
        width = max(1, round(page_w * config.render.px_per_pt))
        height = max(1, round(page_h * config.render.px_per_pt))
        background, mask, trace = toy_background(instruction.text, ex.representative_boxes,
                                                 page_w, page_h, width, height, config)
        write_json(pdir / "mask.json", mask.to_json())
        write_gray_png(mask.values, pdir / "mask.png")
        write_json(pdir / "trace.json", trace)
        arts["mask"] = _artifact(run_dir, pdir / "mask.json")
        arts["trace"] = _artifact(run_dir, pdir / "trace.json")
    background = background.quantized()
    bg_path = pdir / "background.png"
    write_png(background, bg_path)
    arts["background"] = _artifact(run_dir, bg_path, background)

    sx, sy = background.width / page_w, background.height / page_h
    px_boxes = [b.scale(sx, sy) for b in ex.text_boxes]
    overlays = [build_overlay(b, c, background, config.aro)
                for b, c in zip(px_boxes, ex.text_colors)]
    ov_path = pdir / "overlays.json"
    write_json(ov_path, overlay_report(ex.page_index, overlays))
    arts["overlays"] = _artifact(run_dir, ov_path)

    composite = compose_page(PageLayers(background, overlays)).quantized()
    comp_path = pdir / "composite.png"
    write_png(composite, comp_path)
    arts["composite"] = _artifact(run_dir, comp_path, composite)

    if foreground is not None:
        write_png(foreground, pdir / "foreground.png")
        page_img = compose_page(PageLayers(background, overlays, foreground)).quantized()
        write_png(page_img, pdir / "page.png")
        arts["page"] = _artifact(run_dir, pdir / "page.png", page_img)

    report = evaluate_wcag(composite, px_boxes, ex.text_colors,
                           config.render.contrast_threshold, config.aro.coverage)
    rep_path = pdir / "readability.json"
    write_json(rep_path, report.to_json())
    arts["readability"] = _artifact(run_dir, rep_path)

    unattainable = sum(ov.unattainable for ov in overlays)
    # backings are solved independently, so a neighbour's backing can still spoil a box
    failures = sum(not b.passed and not ov.unattainable for b, ov in zip(report.per_box, overlays))
    if failures:
        log.warning("page %d: %d box(es) fail the contrast check after compositing",
                    ex.page_index, failures)
    entry = {
        "index": ex.page_index,
        "status": "OK",
        "background_source": "supplied" if supplied else "toy_sampler",
        "page_size": [page_w, page_h],
        "text_boxes": len(ex.text_boxes),
        "representative_boxes": len(ex.representative_boxes),
        "unattainable_boxes": unattainable,
        "readability_failures": failures,
        "page_pass_rate": report.page_pass_rate,
        "pixel_pass_rate": report.pixel_pass_rate,
        "artifacts": arts,
    }
    return PageResult(ex.page_index, entry, unattainable)


@dataclass
class RunResult:
    run_dir: Path
    manifest: dict

    @property
    def unattainable(self) -> int:
        return sum(p.get("unattainable_boxes", 0) for p in self.manifest["pages"])

    @property
    def readability_failures(self) -> int:
        return sum(p.get("readability_failures", 0) for p in self.manifest["pages"])


def _write_manifest(run_dir: Path, manifest: dict):
    write_json(run_dir / MANIFEST, manifest)


def manifest_digest(run_dir: str | Path) -> str:
    return file_digest(Path(run_dir) / MANIFEST)


def run_pipeline(layout_path: str | Path, out_dir: str | Path, config: PipelineConfig | None = None,
                 backgrounds_dir: str | Path | None = None, foreground_dir: str | Path | None = None,
                 provider=None) -> RunResult:
    """Extract, summarize, instruct, generate/load backgrounds, solve backings,
    compose and evaluate every page; always leaves a manifest behind."""
    config = (config or PipelineConfig()).validate()
    run_dir = Path(out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    layout_path = Path(layout_path)
    write_json(run_dir / "config.json", config.to_dict())
    manifest = {
        "tool": "docback",
        "version": __version__,
        "status": "RUNNING",
        "failed_stage": None,
        "error": None,
        "config_sha256": config.digest(),
        "layout": {"name": layout_path.name, "sha256": file_digest(layout_path)},
        "backgrounds": "supplied" if backgrounds_dir else "toy_sampler",
        "artifacts": {"config": _artifact(run_dir, run_dir / "config.json")},
        "pages": [],
        "refinements": [],
    }
    stage = "load"
    try:
        pages = load_layout(layout_path)
        stage = "extract"
        extractions = [extract(p, config.extraction) for p in pages]

        stage = "summarize"
        provider = provider or make_provider(config.narrative.provider)
        nc = config.narrative
        if nc.operating_mode == PROMPT_ONLY:
            summaries: list[PageSummary | None] = [None] * len(pages)
        else:
            summaries = [summarize(ex.page_text, provider, ex.page_index) for ex in extractions]
        write_json(run_dir / "summaries.json", [
            None if s is None else {"page_index": s.page_index, "words": list(s.words), "raw": s.raw}
            for s in summaries])
        manifest["artifacts"]["summaries"] = _artifact(run_dir, run_dir / "summaries.json")

        stage = "instruct"
        instructions = run_document(summaries, nc.user_prompt, nc.window_n, provider)
        _write_instructions(run_dir, instructions, nc.window_n, manifest)

        stage = "render"
        bg_dir = Path(backgrounds_dir) if backgrounds_dir else None
        fg_dir = Path(foreground_dir) if foreground_dir else None
        jobs = list(zip(extractions, pages, instructions))

        def work(job):
            ex, page, u = job
            bg = find_page_image(bg_dir, ex.page_index)
            fg = find_page_image(fg_dir, ex.page_index)
            return _process_page(run_dir, ex, page.width, page.height, u, config,
                                 read_png(bg) if bg else None, read_png(fg) if fg else None)

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(work, jobs))
        for r, u in zip(results, instructions):
            r.entry["instruction"] = u.text
            r.entry["user_prompt"] = nc.user_prompt
            manifest["pages"].append(r.entry)
    except Exception as e:
        manifest["status"] = "FAILED"
        manifest["failed_stage"] = stage
        manifest["error"] = f"{type(e).__name__}: {e}"
        _write_manifest(run_dir, manifest)
        raise StageError(stage, e) from e

    manifest["status"] = "OK"
    _write_manifest(run_dir, manifest)
    return RunResult(run_dir, manifest)


def _write_instructions(run_dir: Path, instructions: Sequence[Instruction], window_n: int,
                        manifest: dict):
    write_json(run_dir / "instructions.json", [u.to_json() for u in instructions])
    bank_prefix(instructions, window_n).save(run_dir / "bank.json")
    manifest["artifacts"]["instructions"] = _artifact(run_dir, run_dir / "instructions.json")
    manifest["artifacts"]["bank"] = _artifact(run_dir, run_dir / "bank.json")


def refine_page(run_dir: str | Path, page_index: int, new_prompt: str | None,
                provider=None) -> RunResult:
    """Recompute one page's instruction with a new prompt and redo its background,
    backings and report. Other pages and all text boxes are left alone."""
    run_dir = Path(run_dir)
    mpath = run_dir / MANIFEST
    if not mpath.is_file():
        raise RefineError(f"no manifest in {run_dir}")
    manifest = read_json(mpath)
    if manifest.get("status") != "OK":
        raise RefineError(f"run status is {manifest.get('status')}; refine needs a finished run")
    config = PipelineConfig.from_dict(read_json(run_dir / "config.json"))
    indices = [p["index"] for p in manifest["pages"]]
    if page_index not in indices:
        raise RefineError(f"unknown page {page_index}; run has pages {indices}")
    pos = indices.index(page_index)
    try:
        instructions = [Instruction.from_json(d) for d in read_json(run_dir / "instructions.json")]
        summaries = read_json(run_dir / "summaries.json")
        NarrativeBank.load(run_dir / "bank.json")
    except (OSError, KeyError, ValueError) as e:
        raise RefineError(f"missing bank state: {e}") from None

    nc = config.narrative
    s = summaries[pos]
    summary = None if s is None else PageSummary(s["page_index"], tuple(s["words"]), s["raw"])
    if nc.operating_mode == PROMPT_ONLY and not new_prompt:
        raise ConfigError("prompt_only runs need a prompt to refine with")
    provider = provider or make_provider(nc.provider)
    bank = bank_prefix(instructions[:pos], nc.window_n)
    u = instruct(summary, new_prompt, bank, provider, page_index)
    instructions[pos] = u

    pdir = run_dir / page_dir_name(page_index)
    ex_json = read_json(pdir / "regions.json")
    ex = Extraction(
        page_index,
        [BBox(*b) for b in ex_json["text_boxes"]],
        [BBox(*b) for b in ex_json["representative_boxes"]],
        ex_json["page_text"],
        text_colors=[Srgb.from_hex(c) for c in ex_json["text_colors"]],
    )
    entry = manifest["pages"][pos]
    page_w, page_h = entry["page_size"]
    background = None
    if entry["background_source"] == "supplied":
        log.warning("page %d uses a supplied background; only backings are recomputed", page_index)
        background = read_png(pdir / "background.png")
    foreground = read_png(pdir / "foreground.png") if (pdir / "foreground.png").is_file() else None
    result = _process_page(run_dir, ex, page_w, page_h, u, config, background, foreground,
                           write_regions=False)
    result.entry["instruction"] = u.text
    result.entry["user_prompt"] = new_prompt
    manifest["pages"][pos] = result.entry
    _write_instructions(run_dir, instructions, nc.window_n, manifest)
    manifest["refinements"].append({"page": page_index, "prompt": new_prompt})
    _write_manifest(run_dir, manifest)
    return RunResult(run_dir, manifest)
