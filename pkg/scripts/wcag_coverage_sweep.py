"""Sweep the contrast target and coverage fraction over random backgrounds.

For each (tau, rho) setting, solve backings for black and white text on a
batch of procedural backgrounds and report the WCAG AA pass rate, the mean
final opacity and how many boxes were flagged unattainable.

    python3 scripts/wcag_coverage_sweep.py --n 60
"""
import argparse
import time

import numpy as np

from docback.aro import AroParams, build_overlay
from docback.color import BLACK, WHITE
from docback.compose import PageLayers, compose_page, evaluate_wcag
from docback.latentmask import LatticeShape, procedural_texture
from docback.layout import BBox
from docback.raster import RasterImage

W, H = 320, 200
BOXES = [BBox(30, 30, 290, 52), BBox(60, 110, 240, 126), BBox(40, 160, 180, 180)]


def background(rng, i):
    if i % 2:
        tex = procedural_texture(LatticeShape(16, 16, 3), f"bg-{i}")
        return RasterImage.from_rgb(tex).resized(W, H)
    return RasterImage.from_rgb(rng.random((H, W, 3))).quantized()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=40, help="backgrounds per setting")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'tau':>5} {'rho':>5} {'pass@4.5':>9} {'mean alpha':>11} {'flagged':>8} {'sec':>6}")
    for tau in (3.0, 4.5, 7.0):
        for rho in (0.9, 0.98, 1.0):
            params = AroParams(target_contrast=tau, coverage=rho)
            rng = np.random.default_rng(args.seed)
            passed = total = flagged = 0
            alphas = []
            t0 = time.perf_counter()
            for i in range(args.n):
                bg = background(rng, i)
                text = BLACK if i % 4 < 2 else WHITE
                ovs = [build_overlay(b, text, bg, params) for b in BOXES]
                out = compose_page(PageLayers(bg, ovs)).quantized()
                rep = evaluate_wcag(out, BOXES, text)
                passed += sum(b.passed for b in rep.per_box)
                total += len(BOXES)
                flagged += sum(o.unattainable for o in ovs)
                alphas += [o.alpha for o in ovs]
            print(f"{tau:5.1f} {rho:5.2f} {passed / total:9.3f} {np.mean(alphas):11.3f} "
                  f"{flagged:8d} {time.perf_counter() - t0:6.1f}")


if __name__ == "__main__":
    main()
