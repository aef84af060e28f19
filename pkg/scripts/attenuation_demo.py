"""Show how the gated mask keeps protected cells close to the source.

Runs the straight-path toy sampler from a blank lattice toward a texture,
with the centre of the lattice protected, and prints the fraction of the
path each region travels for several gate start fractions. Optionally
writes the final lattices as PNGs.

    python3 scripts/attenuation_demo.py --out /tmp/atten
"""
import argparse
from pathlib import Path

import numpy as np

from docback.latentmask import (ATTENUATE, LITERAL, GateSchedule, LatentState, LatticeShape,
                                StraightPathVelocity, build_mask_centered, procedural_texture,
                                run_sampler)
from docback.raster import RasterImage, write_png


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--lam", type=float, default=0.2)
    ap.add_argument("--rho", type=float, default=0.25, help="protected fraction of the lattice")
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    shape = LatticeShape(48, 48, 3)
    src = np.ones(shape.array_shape)
    tgt = procedural_texture(shape, "sea glass mosaic")
    prov = StraightPathVelocity(src, tgt)
    mask = build_mask_centered(shape, args.rho, args.lam)
    m = mask.masked

    print(f"{'mode':>9} {'start':>6} {'inside':>8} {'outside':>8} {'closed form':>12}")
    for mode in (ATTENUATE, LITERAL):
        for start in (0.0, 0.29, 0.5, 1.0):
            sched = GateSchedule(args.steps, start)
            final, _ = run_sampler(LatentState(src.copy()), prov, mask, sched, mode)
            frac = (final.x - src) / (tgt - src)
            n_open = sum(k / args.steps >= start for k in range(args.steps))
            closed = (args.steps - n_open + n_open * args.lam) / args.steps if mode == ATTENUATE else 1.0
            print(f"{mode:>9} {start:6.2f} {frac[m].mean():8.4f} {frac[~m].mean():8.4f} {closed:12.4f}")
            if args.out:
                args.out.mkdir(parents=True, exist_ok=True)
                img = RasterImage.from_rgb(np.clip(final.x, 0, 1)).resized(192, 192)
                write_png(img, args.out / f"{mode}_{start:.2f}.png")


if __name__ == "__main__":
    main()
