#!/usr/bin/env python3
"""Generate the committed synthetic mini-dataset used by the CLI tests.

Two widget archetypes at 64x64:
- blob widgets: a few bright elliptical instances; defective ones carry a
  small very-bright spot (exercises the default one-tile-per-component path)
- strip widgets: one elongated bar carrying 22 small studs; defective ones
  have a dark gash (exercises the strip-tiling path, the part-count rule and
  the shadow-style coverage filter)

Intensities sit safely inside the mock backend's quantization bands so the
generated proposals are stable under 8-bit PNG round-trips. Deterministic:
rerunning reproduces the identical files.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
from PIL import Image

SIZE = 64
BG = 0.15
NOISE = 0.012


def save_image(path: Path, gray: np.ndarray) -> None:
    rgb = np.repeat(np.clip(gray, 0, 1)[..., None], 3, axis=2)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.rint(rgb * 255).astype(np.uint8), mode="RGB").save(path)


def save_mask(path: Path, mask: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path)


def base_canvas(rng: np.random.Generator) -> np.ndarray:
    return BG + rng.uniform(-NOISE, NOISE, size=(SIZE, SIZE))


def paint_ellipse(img, cy, cx, ry, rx, value, rng):
    yy, xx = np.ogrid[:SIZE, :SIZE]
    region = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    img[region] = value + rng.uniform(-NOISE, NOISE, size=int(region.sum()))
    return region


def blob_widget(rng, defective):
    img = base_canvas(rng)
    centers = [(20 + rng.integers(-3, 4), 17 + rng.integers(-3, 4)),
               (45 + rng.integers(-3, 4), 46 + rng.integers(-3, 4))]
    regions = []
    for cy, cx in centers:
        regions.append(paint_ellipse(img, cy, cx, 8, 7, 0.70, rng))
    mask = np.zeros((SIZE, SIZE), dtype=bool)
    if defective:
        cy, cx = centers[int(rng.integers(2))]
        spot = np.zeros_like(mask)
        spot[cy - 2 : cy + 2, cx - 2 : cx + 2] = True
        img[spot] = 0.92 + rng.uniform(-NOISE, NOISE, size=int(spot.sum()))
        mask = spot
    return img, mask


def strip_widget(rng, defective):
    img = base_canvas(rng)
    strip = np.zeros((SIZE, SIZE), dtype=bool)
    strip[28:36, 2:62] = True
    img[strip] = 0.55 + rng.uniform(-NOISE, NOISE, size=int(strip.sum()))
    # 22 studs, 2x2 each, in two rows of 11; all small enough that the mock
    # proposer reports every one, pushing the part count past the threshold.
    for row_y in (29, 33):
        for k in range(11):
            x = 4 + 5 * k
            img[row_y : row_y + 2, x : x + 2] = 0.88 + rng.uniform(
                -NOISE, NOISE, size=(2, 2)
            )
    mask = np.zeros((SIZE, SIZE), dtype=bool)
    if defective:
        # Interior gash: dark like a shadow, so the salient mask excludes it
        # and the coverage filter drops its proposal.
        gash = np.zeros_like(mask)
        gash[29:33, 31:33] = True
        img[gash] = 0.04 + rng.uniform(-NOISE, 0.0, size=int(gash.sum())) + NOISE
        mask = gash
    return img, mask


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).parent.parent / "tests" / "data" / "mini"),
        help="dataset root to (re)generate",
    )
    args = parser.parse_args()
    root = Path(args.out)
    class_dir = root / "widget"

    rng = np.random.default_rng(20230607)
    makers = (blob_widget, strip_widget)
    for i in range(4):
        img, _ = makers[i % 2](rng, defective=False)
        save_image(class_dir / "test" / "good" / f"{i:03d}.png", img)
    for i in range(4):
        img, mask = makers[i % 2](rng, defective=True)
        save_image(class_dir / "test" / "bad" / f"{i:03d}.png", img)
        save_mask(class_dir / "ground_truth" / "bad" / f"{i:03d}.png", mask)
    print(f"wrote mini dataset under {root}")


if __name__ == "__main__":
    main()
