"""Corner and edge keypoints from the moment maps.

Corners are local maxima of the minimum-moment map; edge points come from a
FAST-9 segment test run on the min-max normalised maximum-moment map.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .imgproc import normalize_minmax
from .phasecong import MomentMaps

CORNER = "corner"
EDGE = "edge"

# Bresenham circle of radius 3, clockwise from 12 o'clock, as (dx, dy)
FAST_RING = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)
FAST_ARC = 9


@dataclass
class Keypoint:
    x: float
    y: float
    kind: str
    strength: float
    orientation: float = 0.0

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class DetectParams:
    nms_radius: int = 3
    max_corners: int = 2500
    max_edges: int = 2500
    fast_threshold: float = 0.05
    corner_percentile: float = 80.0
    border_margin: int = 68

    def __post_init__(self):
        if self.nms_radius < 1:
            raise ValueError("nms_radius must be >= 1")
        if self.max_corners < 1 or self.max_edges < 1:
            raise ValueError("max_corners and max_edges must be >= 1")
        if not 0 < self.fast_threshold < 1:
            raise ValueError("fast_threshold must lie in (0, 1)")
        if not 0 <= self.corner_percentile < 100:
            raise ValueError("corner_percentile must lie in [0, 100)")
        if self.border_margin < 0:
            raise ValueError("border_margin must be >= 0")


def _disk(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return xx * xx + yy * yy <= r * r


def _border_mask(shape, margin: int) -> np.ndarray:
    h, w = shape
    mask = np.zeros(shape, dtype=bool)
    if h > 2 * margin and w > 2 * margin:
        mask[margin:h - margin, margin:w - margin] = True
    return mask


def non_max_suppression(score: np.ndarray, candidates: np.ndarray, radius: int) -> np.ndarray:
    """Row-major flat indices of suppression survivors, strongest first.

    A candidate must equal the maximum of ``score`` over a disk of
    ``radius``.  Plateaus are then thinned greedily in order of decreasing
    score, ties going to the smaller row-major index.
    """
    peak = ndimage.maximum_filter(score, footprint=_disk(radius), mode="constant", cval=-np.inf)
    cand = candidates & (score >= peak)
    flat = np.flatnonzero(cand)
    if flat.size == 0:
        return flat
    values = score.ravel()[flat]
    order = np.lexsort((flat, -values))
    flat = flat[order]
    ys, xs = np.divmod(flat, score.shape[1])
    pts = np.column_stack((xs, ys)).astype(np.float64)
    tree = cKDTree(pts)
    suppressed = np.zeros(flat.size, dtype=bool)
    keep = []
    for i in range(flat.size):
        if suppressed[i]:
            continue
        keep.append(i)
        suppressed[tree.query_ball_point(pts[i], radius)] = True
    return flat[np.asarray(keep, dtype=np.int64)]


def detect_corners(m: MomentMaps, p: DetectParams | None = None) -> list[Keypoint]:
    p = p or DetectParams()
    cornerness = m.min_moment
    positive = cornerness[cornerness > 0]
    if positive.size == 0:
        return []
    threshold = np.percentile(positive, p.corner_percentile)
    cand = (cornerness > 0) & (cornerness >= threshold) & _border_mask(cornerness.shape, p.border_margin)
    flat = non_max_suppression(cornerness, cand, p.nms_radius)[: p.max_corners]
    ys, xs = np.divmod(flat, cornerness.shape[1])
    vals = cornerness.ravel()[flat]
    return [Keypoint(float(x), float(y), CORNER, float(v)) for x, y, v in zip(xs, ys, vals)]


def _ring_differences(img: np.ndarray) -> np.ndarray:
    """``ring_pixel - centre`` for the 16 ring positions; zero near borders."""
    h, w = img.shape
    diffs = np.zeros((16, h, w))
    if h <= 6 or w <= 6:
        return diffs
    centre = img[3:h - 3, 3:w - 3]
    for i, (dx, dy) in enumerate(FAST_RING):
        diffs[i, 3:h - 3, 3:w - 3] = img[3 + dy:h - 3 + dy, 3 + dx:w - 3 + dx] - centre
    return diffs


def _max_arc_min(d: np.ndarray) -> np.ndarray:
    """max over the 16 circular 9-arcs of the minimum of ``d`` along the arc."""
    m2 = np.minimum(d, np.roll(d, -1, axis=0))
    m4 = np.minimum(m2, np.roll(m2, -2, axis=0))
    m8 = np.minimum(m4, np.roll(m4, -4, axis=0))
    m9 = np.minimum(m8, np.roll(d, -8, axis=0))
    return m9.max(axis=0)


def fast_score(img) -> np.ndarray:
    """FAST-9 score: the largest threshold for which the segment test still fires.

    A pixel passes the test at threshold ``t`` when 9 contiguous ring pixels
    are all brighter than ``centre + t`` or all darker than ``centre - t``,
    i.e. exactly when its score exceeds ``t``.  Pixels closer than 3 to the
    border score 0.
    """
    d = _ring_differences(np.asarray(img, dtype=np.float64))
    return np.maximum(np.maximum(_max_arc_min(d), _max_arc_min(-d)), 0.0)


def detect_edges(m: MomentMaps, p: DetectParams | None = None) -> list[Keypoint]:
    p = p or DetectParams()
    edge_map = normalize_minmax(m.max_moment)
    score = fast_score(edge_map)
    cand = (score > p.fast_threshold) & _border_mask(score.shape, max(p.border_margin, 3))
    flat = non_max_suppression(score, cand, p.nms_radius)[: p.max_edges]
    ys, xs = np.divmod(flat, score.shape[1])
    vals = score.ravel()[flat]
    return [Keypoint(float(x), float(y), EDGE, float(v)) for x, y, v in zip(xs, ys, vals)]


def merge_keypoints(corners, edges, p: DetectParams | None = None) -> list[Keypoint]:
    """Corners first, then edge points farther than ``nms_radius`` from every corner."""
    p = p or DetectParams()
    corners = list(corners)
    edges = list(edges)
    if corners and edges:
        tree = cKDTree([k.xy for k in corners])
        dist, _ = tree.query([k.xy for k in edges], k=1)
        edges = [k for k, d in zip(edges, dist) if d > p.nms_radius]
    return (corners + edges)[: p.max_corners + p.max_edges]


def detect(m: MomentMaps, p: DetectParams | None = None) -> list[Keypoint]:
    p = p or DetectParams()
    return merge_keypoints(detect_corners(m, p), detect_edges(m, p), p)
