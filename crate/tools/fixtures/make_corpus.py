#!/usr/bin/env python3
"""Build the JPEG fixture corpus and its libjpeg reference dumps.

Writes into crates/core/tests/fixtures/corpus/:
  NN_name.jpg   baseline JPEG encoded with libjpeg (via Pillow)
  NN_name.ref   binary dump produced by refdump (tables, coefficients, planes)
and a few negative fixtures into crates/core/tests/fixtures/invalid/.

Everything is seeded; rerunning reproduces identical files for a given
Pillow/libjpeg build.
"""
import io
import os
import subprocess
import sys

import numpy as np
import skimage.data
from PIL import Image

ROOT = os.path.dirname(os.path.abspath(__file__))
REPO = os.path.abspath(os.path.join(ROOT, "..", ".."))
OUT = os.path.join(REPO, "crates", "core", "tests", "fixtures", "corpus")
BAD = os.path.join(REPO, "crates", "core", "tests", "fixtures", "invalid")
REFDUMP = os.path.join(ROOT, "refdump")


def build_refdump():
    src = os.path.join(ROOT, "refdump.c")
    subprocess.check_call(["cc", "-O2", "-o", REFDUMP, src, "-ljpeg"])


def crop_resize(img, size, box=None):
    im = Image.fromarray(img)
    if box is not None:
        im = im.crop(box)
    return im.resize(size, Image.BILINEAR)


def synthetic(seed, w, h):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.zeros((h, w, 3))
    for c in range(3):
        fx, fy = rng.uniform(0.01, 0.4, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        out[..., c] = 128 + 90 * np.sin(fx * xx + fy * yy + phase)
    out += rng.normal(0, 12, size=out.shape)
    # a few solid rectangles for sharp edges
    for _ in range(4):
        x0, y0 = rng.integers(0, w // 2), rng.integers(0, h // 2)
        x1, y1 = x0 + rng.integers(4, w // 2), y0 + rng.integers(4, h // 2)
        out[y0:y1, x0:x1] = rng.uniform(0, 255, size=3)
    return Image.fromarray(np.clip(out, 0, 255).astype(np.uint8))


def encode(im, **kw):
    buf = io.BytesIO()
    opts = dict(quality=95, subsampling=2, optimize=False)
    opts.update(kw)
    im.save(buf, "JPEG", **opts)
    return buf.getvalue()


def main():
    os.makedirs(OUT, exist_ok=True)
    os.makedirs(BAD, exist_ok=True)
    build_refdump()

    photos = {
        "astronaut": skimage.data.astronaut(),
        "coffee": skimage.data.coffee(),
        "chelsea": skimage.data.chelsea(),
        "rocket": skimage.data.rocket(),
    }
    items = []
    # full-scale 256x256 photos
    for name, arr in photos.items():
        items.append((f"{name}_256", encode(crop_resize(arr, (256, 256)))))
    # smaller crops of the photos at assorted MCU-aligned sizes
    sizes = [(128, 128), (96, 64), (64, 128), (48, 48), (160, 112), (32, 32)]
    for i, (w, h) in enumerate(sizes):
        name, arr = list(photos.items())[i % len(photos)]
        H, W = arr.shape[:2]
        box = (W // 8 * (i % 3), H // 8 * (i % 2), W // 8 * (i % 3) + W // 2, H // 8 * (i % 2) + H // 2)
        items.append((f"{name}_crop{w}x{h}", encode(crop_resize(arr, (w, h), box))))
    # synthetic content
    for seed in range(8):
        w, h = [(64, 64), (128, 64), (64, 96), (256, 256)][seed % 4]
        items.append((f"synth{seed}_{w}x{h}", encode(synthetic(seed, w, h))))
    # flat gray single MCU
    items.append(("flat_gray_16x16", encode(Image.new("RGB", (16, 16), (128, 128, 128)))))
    # restart intervals
    items.append(("restart_rows", encode(crop_resize(photos["coffee"], (128, 96)), restart_marker_rows=1)))
    items.append(("restart_blocks", encode(synthetic(100, 80, 64), restart_marker_blocks=5)))
    # quality 100 noise forces blocks that code zigzag index 63 (no EOB)
    rng = np.random.default_rng(7)
    noise = Image.fromarray(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8))
    items.append(("noise_q100_no_eob", encode(noise, quality=100)))
    # non-MCU-aligned dims (encoder edge padding)
    items.append(("odd_size_37x29", encode(crop_resize(photos["chelsea"], (37, 29)))))
    # 4:4:4 sampling
    items.append(("sampling444_64x48", encode(crop_resize(photos["astronaut"], (64, 48)), subsampling=0)))

    for idx, (name, data) in enumerate(items):
        base = os.path.join(OUT, f"{idx:02d}_{name}")
        with open(base + ".jpg", "wb") as f:
            f.write(data)
        subprocess.check_call([REFDUMP, base + ".jpg", base + ".ref"])

    # invalid fixtures
    im = crop_resize(photos["chelsea"], (64, 64))
    with open(os.path.join(BAD, "progressive.jpg"), "wb") as f:
        f.write(encode(im, progressive=True))
    good = encode(im)
    with open(os.path.join(BAD, "truncated.jpg"), "wb") as f:
        f.write(good[: len(good) * 2 // 3])
    with open(os.path.join(BAD, "grayscale.jpg"), "wb") as f:
        f.write(encode(im.convert("L")))
    print(f"wrote {len(items)} corpus files to {OUT}")


if __name__ == "__main__":
    sys.exit(main())
