"""Ablate the two readability mechanisms on a layout file.

Runs the pipeline with the latent mask on and off and reports, per page,
how many text boxes already read at 4.5:1 on the bare background, the mean
backing opacity that was needed, and the final pass rate with backings.

    python3 scripts/ablation.py fixtures/three_page.json --prompt "muted watercolor"
"""
import argparse
import tempfile
from pathlib import Path

import numpy as np

from docback.compose import evaluate_wcag
from docback.config import PipelineConfig
from docback.layout import BBox
from docback.pipeline import read_json, run_pipeline
from docback.raster import read_png
from docback.color import Srgb


def bare_pass_rate(page_dir: Path) -> float:
    regions = read_json(page_dir / "regions.json")
    boxes = [BBox(*b) for b in regions["text_boxes"]]
    colors = [Srgb.from_hex(c) for c in regions["text_colors"]]
    bg = read_png(page_dir / "background.png")
    return evaluate_wcag(bg, boxes, colors).page_pass_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("layout")
    ap.add_argument("--prompt", default="muted watercolor")
    args = ap.parse_args()
    base = PipelineConfig().with_overrides(narrative={"user_prompt": args.prompt})
    print(f"{'mask':>5} {'page':>4} {'bare pass':>10} {'mean alpha':>11} {'final pass':>11}")
    for enabled in (False, True):
        cfg = base.with_overrides(mask={"enabled": enabled})
        with tempfile.TemporaryDirectory() as d:
            result = run_pipeline(args.layout, d, cfg)
            for p in result.manifest["pages"]:
                pdir = Path(d) / f"page_{p['index']:03d}"
                alphas = [o["alpha"] for o in read_json(pdir / "overlays.json")["overlays"]]
                print(f"{'on' if enabled else 'off':>5} {p['index']:4d} {bare_pass_rate(pdir):10.3f} "
                      f"{np.mean(alphas):11.3f} {p['page_pass_rate']:11.3f}")


if __name__ == "__main__":
    main()
