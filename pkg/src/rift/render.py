"""Match overlays, keypoint CSV files and debug rasters."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .imgproc import normalize_minmax, save_png

YELLOW = (255, 255, 0)
RED = (255, 0, 0)
GREEN = (0, 255, 0)
MARKER_RADIUS = 3

# one colour per orientation label, cycled if there are more labels
MIM_PALETTE = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 212),
]


def _to_rgb(img) -> Image.Image:
    gray = np.round(normalize_minmax(img) * 255).astype(np.uint8)
    return Image.fromarray(gray).convert("RGB")


def render_matches(ref_img, tgt_img, result, path=None):
    """Side-by-side overlay of a match result.

    Reference keypoints are red circles and target keypoints green
    crosshairs; inlier correspondences are joined by yellow lines and
    outliers by red ones.  Returns the RGB array and the list of drawn
    segments as ``(colour, (x0, y0), (x1, y1))`` in composite coordinates.
    """
    ref = _to_rgb(ref_img)
    tgt = _to_rgb(tgt_img)
    offset = ref.width
    canvas = Image.new("RGB", (ref.width + tgt.width, max(ref.height, tgt.height)))
    canvas.paste(ref, (0, 0))
    canvas.paste(tgt, (offset, 0))
    draw = ImageDraw.Draw(canvas)

    r = MARKER_RADIUS
    for kp in result.ref_keypoints:
        draw.ellipse((kp.x - r, kp.y - r, kp.x + r, kp.y + r), outline=RED)
    for kp in result.tgt_keypoints:
        x = kp.x + offset
        draw.line((x - r, kp.y, x + r, kp.y), fill=GREEN)
        draw.line((x, kp.y - r, x, kp.y + r), fill=GREEN)

    segments = []
    # outliers first so inliers stay visible where lines cross
    for want_inlier, colour in ((False, RED), (True, YELLOW)):
        for c in result.correspondences:
            if c.inlier != want_inlier:
                continue
            p0 = (c.ref_kp.x, c.ref_kp.y)
            p1 = (c.tgt_kp.x + offset, c.tgt_kp.y)
            draw.line(p0 + p1, fill=colour, width=1)
            segments.append((colour, p0, p1))

    rgb = np.asarray(canvas)
    if path is not None:
        canvas.save(Path(path), format="PNG")
    return rgb, segments


def write_keypoints_csv(keypoints, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "kind", "strength", "orientation"])
        for kp in keypoints:
            writer.writerow([kp.x, kp.y, kp.kind, repr(kp.strength), repr(kp.orientation)])


def save_mim_png(mim, path) -> None:
    """Paletted PNG with one colour per orientation label."""
    im = Image.fromarray((mim.index - 1).astype(np.uint8), mode="P")
    palette = [MIM_PALETTE[i % len(MIM_PALETTE)] for i in range(mim.n_orientations)]
    im.putpalette([v for rgb in palette for v in rgb])
    im.save(Path(path), format="PNG")


def dump_debug(features, directory, prefix: str, kinds) -> list[Path]:
    """Write the requested intermediate rasters of ``features``; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if "pc" in kinds and features.pc is not None:
        p = directory / f"{prefix}_pc.png"
        save_png(features.pc.combined, p)
        written.append(p)
    if "moments" in kinds and features.moments is not None:
        for name in ("min_moment", "max_moment"):
            p = directory / f"{prefix}_{name}.png"
            save_png(getattr(features.moments, name), p)
            written.append(p)
    if "mim" in kinds and features.mims:
        p = directory / f"{prefix}_mim.png"
        save_mim_png(features.mims[0], p)
        written.append(p)
    return written
