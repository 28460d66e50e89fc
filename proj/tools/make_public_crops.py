#!/usr/bin/env python3
"""Write 256x256 clean RGB crops from scikit-image's bundled photos.

Train and validation crops come from disjoint source images:
  OUT/train/gt/*.png  (64 crops)
  OUT/val/gt/*.png    (8 crops)
"""
import argparse
import pathlib

import numpy as np
from PIL import Image
from skimage import data

TRAIN_SOURCES = ["astronaut", "rocket", "immunohistochemistry", "hubble_deep_field", "retina"]
VAL_SOURCES = ["chelsea", "coffee"]


def crops(names, count, size, rng):
    images = [getattr(data, n)()[..., :3] for n in names]
    out = []
    for i in range(count):
        k = i % len(images)
        img = images[k]
        r = rng.integers(0, img.shape[0] - size + 1)
        c = rng.integers(0, img.shape[1] - size + 1)
        out.append((f"{names[k]}_{i:03d}", img[r:r + size, c:c + size]))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--train", type=int, default=64)
    ap.add_argument("--val", type=int, default=8)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    for split, names, n in (("train", TRAIN_SOURCES, args.train), ("val", VAL_SOURCES, args.val)):
        dst = args.out / split / "gt"
        dst.mkdir(parents=True, exist_ok=True)
        for name, crop in crops(names, n, args.size, rng):
            Image.fromarray(np.ascontiguousarray(crop)).save(dst / f"{name}.png")
        print(f"{split}: {n} crops -> {dst}")


if __name__ == "__main__":
    main()
