#!/usr/bin/env python3
"""Exercise the full enhancement set on a noisy synthetic capture.

Renders a checkerboard frame, corrupts it with salt & pepper, then writes
one PPM per operation (grayscale, complement, denoised, adjusted, edges,
rotation) plus the histogram as CSV, so the results can be eyeballed.

    python scripts/enhancement_demo.py --out ./enhance-out
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from fanet_gcs import imaging
from fanet_gcs.capture import save_image
from fanet_gcs.imaging import GrayImage, RgbImage
from fanet_gcs.sim import (
    Checkerboard,
    NoiseSpec,
    Phase,
    SimDroneState,
    SimScene,
    inject_noise,
    render_frame,
)


def as_rgb(img) -> RgbImage:
    if isinstance(img, GrayImage):
        return RgbImage.from_array(np.repeat(img.to_array()[..., None], 3, axis=2))
    return img


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("./enhance-out"))
    parser.add_argument("--noise-p", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    pose = SimDroneState(
        phase=Phase.FLYING, x=0, y=0, heading=0, altitude=100,
        battery=100, sdk_mode=True, streaming=True,
    )
    scene = SimScene(Checkerboard(cell_px=16), (128, 128))
    clean = render_frame(pose, scene)
    noisy = inject_noise(clean, NoiseSpec("salt_pepper", p=args.noise_p, seed=args.seed))

    gray = imaging.rgb_to_gray(noisy)
    outputs = {
        "00-clean": clean,
        "01-noisy": noisy,
        "02-gray": gray,
        "03-complement": imaging.complement(gray),
        "04-median": imaging.noise_filter(gray, "median", 3),
        "05-mean": imaging.noise_filter(gray, "mean", 3),
        "06-adjusted": imaging.gray_adjust(gray, 0.1, 0.9, 1.5),
        "07-sobel": imaging.edge_detect(imaging.noise_filter(gray, "median", 3), "sobel"),
        "08-canny": imaging.edge_detect(imaging.noise_filter(gray, "median", 3), "canny"),
        "09-rotated": imaging.rotate_quarter(noisy, 1),
    }
    for name, img in outputs.items():
        save_image(as_rgb(img), args.out / f"{name}.ppm")
        print(f"wrote {name}.ppm ({img.width}x{img.height})")

    hist = imaging.histogram(gray)
    csv = args.out / "10-histogram.csv"
    csv.write_text("level,count\n" + "\n".join(f"{i},{c}" for i, c in enumerate(hist.bins)))
    print(f"wrote {csv.name} (total {hist.total()} pixels)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
