"""Command-line entry point.

Exit codes: 0 success, 2 config/validation error, 3 provider error,
4 readability target unattainable for at least one box.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .aro import build_overlay, overlay_report, BackingOverlay
from .compose import PageLayers, compose_page, evaluate_wcag
from .config import ConfigError, PipelineConfig
from .latentmask import (GateSchedule, LatentState, LatticeShape, TextureVelocity,
                         build_mask_centered, build_mask_from_boxes, run_sampler, vanilla_sample)
from .layout import LayoutValidationError, extract, load_layout
from .narrative import (NarrativeBank, NarrativeError, NarrativeRunError, PageSummary,
                        bank_push, instruct, summarize)
from .pipeline import StageError, read_json, refine_page, run_pipeline, write_json
from .providers import ProviderError, make_provider
from .raster import read_png, write_gray_png, write_png

log = logging.getLogger("docback")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_UNATTAINABLE = 4


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    return cfg


def _page(pages, index: int):
    for p in pages:
        if p.page_index == index:
            return p
    raise ConfigError(f"layout has no page {index}")


def _emit(obj, out: str | None):
    if out:
        write_json(Path(out), obj)
    else:
        print(json.dumps(obj, indent=2, ensure_ascii=False))


def cmd_extract(args) -> int:
    cfg = _load_config(args)
    params = cfg.extraction
    if args.no_image_boxes:
        params = cfg.with_overrides(extraction={"include_images": False}).extraction
    pages = load_layout(args.layout)
    _emit({"pages": [extract(p, params).to_json() for p in pages]}, args.output)
    return EXIT_OK


def cmd_summarize(args) -> int:
    cfg = _load_config(args)
    provider = make_provider(args.provider or cfg.narrative.provider)
    out = []
    for p in load_layout(args.layout):
        s = summarize(extract(p, cfg.extraction).page_text, provider, p.page_index)
        out.append({"page_index": s.page_index, "words": list(s.words), "raw": s.raw})
    _emit(out, args.output)
    return EXIT_OK


def cmd_instruct(args) -> int:
    cfg = _load_config(args)
    provider = make_provider(args.provider or cfg.narrative.provider)
    window = cfg.narrative.window_n if args.window is None else args.window
    bank_path = Path(args.bank) if args.bank else None
    bank = NarrativeBank.load(bank_path) if bank_path and bank_path.is_file() else NarrativeBank(window)
    summaries = [None if s is None else PageSummary(s["page_index"], tuple(s["words"]), s.get("raw", ""))
                 for s in read_json(Path(args.summaries))]
    out = []
    for i, s in enumerate(summaries):
        u = instruct(s, args.prompt, bank, provider, s.page_index if s else i)
        bank = bank_push(bank, u)
        out.append(u.to_json())
    if bank_path:
        bank.save(bank_path)
    _emit(out, args.output)
    return EXIT_OK


def cmd_mask_sim(args) -> int:
    shape = LatticeShape(*args.lattice)
    if args.layout:
        page = _page(load_layout(args.layout), args.page)
        boxes = extract(page).representative_boxes
        mask = build_mask_from_boxes(shape, boxes, page.width, page.height, args.lam)
    else:
        mask = build_mask_centered(shape, args.centered, args.lam)
    schedule = GateSchedule(args.steps, args.start)
    provider = TextureVelocity(shape, args.seed_text)
    x0 = np.ones(shape.array_shape)
    final, trace = run_sampler(LatentState(x0.copy(), 1.0), provider, mask, schedule, args.mode)
    plain = vanilla_sample(x0, provider, args.steps)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "mask.json", mask.to_json())
    write_gray_png(mask.values, out / "mask.png")
    write_json(out / "trace.json", trace)
    masked = mask.masked
    diff = np.abs(final.x - plain).mean(axis=2)
    summary = {
        "masked_fraction": mask.masked_fraction,
        "mean_abs_diff_vs_unmasked_inside": float(diff[masked].mean()) if masked.any() else 0.0,
        "mean_abs_diff_vs_unmasked_outside": float(diff[~masked].mean()) if (~masked).any() else 0.0,
    }
    write_json(out / "summary.json", summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_aro(args) -> int:
    cfg = _load_config(args)
    page = _page(load_layout(args.layout), args.page)
    ex = extract(page, cfg.extraction)
    bg = read_png(args.background)
    sx, sy = bg.width / page.width, bg.height / page.height
    overlays = [build_overlay(b.scale(sx, sy), c, bg, cfg.aro)
                for b, c in zip(ex.text_boxes, ex.text_colors)]
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "overlays.json", overlay_report(page.page_index, overlays))
    write_png(compose_page(PageLayers(bg, overlays)), out / "composite.png")
    bad = sum(o.unattainable for o in overlays)
    log.info("%d overlays, %d unattainable", len(overlays), bad)
    return EXIT_UNATTAINABLE if bad else EXIT_OK


def cmd_compose(args) -> int:
    bg = read_png(args.background)
    overlays = []
    if args.overlays:
        overlays = [BackingOverlay.from_json(d) for d in read_json(Path(args.overlays))["overlays"]]
    fg = read_png(args.foreground) if args.foreground else None
    write_png(compose_page(PageLayers(bg, overlays, fg)), args.output)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    page = _page(load_layout(args.layout), args.page)
    ex = extract(page, cfg.extraction)
    img = read_png(args.image)
    sx, sy = img.width / page.width, img.height / page.height
    report = evaluate_wcag(img, [b.scale(sx, sy) for b in ex.text_boxes], ex.text_colors,
                           args.threshold, args.coverage)
    _emit(report.to_json(), args.output)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    cfg = cfg.with_overrides(
        narrative={k: v for k, v in {
            "user_prompt": args.prompt, "operating_mode": args.mode,
            "window_n": args.window, "provider": args.provider}.items() if v is not None},
    )
    if args.workers:
        cfg = PipelineConfig(cfg.extraction, cfg.aro, cfg.mask, cfg.narrative, cfg.render, args.workers)
    result = run_pipeline(args.layout, args.output, cfg, args.backgrounds, args.foregrounds)
    print(f"{len(result.manifest['pages'])} page(s) written to {result.run_dir}")
    if result.unattainable or result.readability_failures:
        log.error("%d box(es) could not reach the contrast target, %d failed the final check",
                  result.unattainable, result.readability_failures)
        return EXIT_UNATTAINABLE
    return EXIT_OK


def cmd_refine(args) -> int:
    provider = make_provider(args.provider) if args.provider else None
    result = refine_page(args.run_dir, args.page, args.prompt, provider)
    entry = next(p for p in result.manifest["pages"] if p["index"] == args.page)
    print(f"page {args.page}: {entry['instruction']}")
    bad = entry["unattainable_boxes"] + entry["readability_failures"]
    return EXIT_UNATTAINABLE if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="docback", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        return p

    p = add("extract", cmd_extract, "text and representative boxes per page")
    p.add_argument("layout")
    p.add_argument("-o", "--output")
    p.add_argument("--config")
    p.add_argument("--no-image-boxes", action="store_true",
                   help="do not add image zones to the representative boxes")

    p = add("summarize", cmd_summarize, "short theme phrase per page")
    p.add_argument("layout")
    p.add_argument("-o", "--output")
    p.add_argument("--config")
    p.add_argument("--provider", help="'stub' or a provider config JSON")

    p = add("instruct", cmd_instruct, "background instructions from summaries")
    p.add_argument("summaries", help="JSON list as written by 'summarize'")
    p.add_argument("-o", "--output")
    p.add_argument("--config")
    p.add_argument("--prompt")
    p.add_argument("--window", type=int)
    p.add_argument("--provider")
    p.add_argument("--bank", help="bank file to resume from and update")

    p = add("mask-sim", cmd_mask_sim, "run the toy sampler with an attenuation mask")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--layout")
    src.add_argument("--centered", type=float, metavar="RHO")
    p.add_argument("--page", type=int, default=0)
    p.add_argument("--lattice", type=int, nargs=3, default=[64, 64, 4], metavar=("H", "W", "C"))
    p.add_argument("--lambda", dest="lam", type=float, default=0.2)
    p.add_argument("--start", type=float, default=0.29)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--mode", choices=["attenuate", "literal"], default="attenuate")
    p.add_argument("--seed-text", default="texture")
    p.add_argument("-o", "--output", required=True)

    p = add("aro", cmd_aro, "solve backings for one page over a background PNG")
    p.add_argument("background")
    p.add_argument("--layout", required=True)
    p.add_argument("--page", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("-o", "--output", required=True)

    p = add("compose", cmd_compose, "background + backings + optional foreground")
    p.add_argument("background")
    p.add_argument("--overlays")
    p.add_argument("--foreground")
    p.add_argument("-o", "--output", required=True)

    p = add("evaluate", cmd_evaluate, "WCAG contrast coverage under text boxes")
    p.add_argument("image")
    p.add_argument("--layout", required=True)
    p.add_argument("--page", type=int, default=0)
    p.add_argument("--threshold", type=float, default=4.5)
    p.add_argument("--coverage", type=float, default=0.98)
    p.add_argument("--config")
    p.add_argument("-o", "--output")

    p = add("pipeline", cmd_pipeline, "full document run")
    p.add_argument("layout")
    p.add_argument("-o", "--output", required=True, help="run directory")
    p.add_argument("--config")
    p.add_argument("--backgrounds", help="directory of page_NNN.png backgrounds")
    p.add_argument("--foregrounds", help="directory of page_NNN.png RGBA foreground layers")
    p.add_argument("--prompt")
    p.add_argument("--mode", choices=["prompt_text", "prompt_only"])
    p.add_argument("--window", type=int)
    p.add_argument("--provider")
    p.add_argument("--workers", type=int)

    p = add("refine", cmd_refine, "regenerate one page's background with a new prompt")
    p.add_argument("run_dir")
    p.add_argument("--page", type=int, required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--provider")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as e:
        cause = e.cause
        print(f"error: {e}", file=sys.stderr)
        if isinstance(cause, (ProviderError, NarrativeRunError)):
            return EXIT_PROVIDER
        if isinstance(cause, (ConfigError, LayoutValidationError, NarrativeError, ValueError, OSError)):
            return EXIT_CONFIG
        raise
    except (ProviderError, NarrativeRunError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PROVIDER
    except (ConfigError, LayoutValidationError, NarrativeError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
