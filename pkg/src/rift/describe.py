"""Maximum index maps, keypoint orientation and histogram descriptors.

The maximum index map (MIM) labels every pixel with the orientation channel
(1-based) whose scale-summed log-Gabor amplitude is largest.  Rotating the
image cyclically permutes which channel responds, so the target image is
described once per cyclic re-ordering of its channels while the reference
image uses the natural order only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detect import Keypoint
from .loggabor import ConvolutionSequence

GRID = 6
ORIENTATION_BINS = 36
MIN_PEAK_RATIO = 1.5
_CHUNK_PIXELS = 4_000_000


@dataclass(frozen=True, eq=False)
class MaxIndexMap:
    index: np.ndarray  # int, values 1..n_orientations
    max_amplitude: np.ndarray
    shift: int
    n_orientations: int


@dataclass(frozen=True)
class OrientationEstimate:
    angle: float  # doubled-angle histogram peak, [0, 2*pi)
    flagged: bool
    peak_ratio: float


@dataclass(eq=False)
class Descriptor:
    vector: np.ndarray
    keypoint: Keypoint
    shift: int
    degenerate: bool = False


def build_mim(seq: ConvolutionSequence, shift: int = 0) -> MaxIndexMap:
    """MIM of the channel sequence re-ordered so channel ``shift + 1`` comes first.

    Ties go to the earliest position in the re-ordered sequence.
    """
    n = seq.params.n_orientations
    if not 0 <= shift < n:
        raise ValueError(f"shift must lie in [0, {n}), got {shift}")
    layers = np.roll(seq.summed_amplitude, -shift, axis=0)
    pos = np.argmax(layers, axis=0)
    amax = np.take_along_axis(layers, pos[np.newaxis], axis=0)[0]
    return MaxIndexMap((pos + 1).astype(np.int16), amax, shift, n)


def build_mim_set(seq: ConvolutionSequence, all_variants: bool = True) -> list[MaxIndexMap]:
    n = seq.params.n_orientations if all_variants else 1
    return [build_mim(seq, k) for k in range(n)]


def relabel(index: np.ndarray, shift: int, n_orientations: int) -> np.ndarray:
    """Label a shift-0 index map would carry in variant ``shift``."""
    return (index.astype(np.int64) - shift - 1) % n_orientations + 1


def _check_inside(xs, ys, shape, what: str):
    h, w = shape
    if xs.min() < 0 or ys.min() < 0 or xs.max() >= w or ys.max() >= h:
        raise ValueError(f"{what} extends beyond the image; increase the border margin")


def _disk_offsets(radius: float):
    r = int(math.floor(radius))
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    inside = dx * dx + dy * dy <= radius * radius
    return dx[inside], dy[inside]


def _smooth_circular(hist: np.ndarray, sigma_bins: float) -> np.ndarray:
    nb = hist.shape[-1]
    k = np.arange(nb)
    dist = np.minimum(k, nb - k)
    kernel = np.exp(-0.5 * (dist / sigma_bins) ** 2)
    kernel /= kernel.sum()
    return np.real(np.fft.ifft(np.fft.fft(hist, axis=-1) * np.fft.fft(kernel), axis=-1))


def orientation_histograms(mim: MaxIndexMap, points: np.ndarray, radius: float) -> np.ndarray:
    """36-bin doubled-angle histograms for an ``(n, 2)`` array of integer points."""
    n_o = mim.n_orientations
    dx, dy = _disk_offsets(radius)
    sigma = radius / 2.0
    gauss = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    bin_width = 2.0 * math.pi / ORIENTATION_BINS
    # doubled label angle 2*(i-1)*pi/n_o, rounded onto bins centred at multiples of bin_width
    label_bins = np.round(2.0 * np.arange(n_o) * math.pi / n_o / bin_width).astype(np.int64)
    label_bins %= ORIENTATION_BINS

    hists = np.zeros((len(points), ORIENTATION_BINS))
    step = max(1, _CHUNK_PIXELS // dx.size)
    for start in range(0, len(points), step):
        pts = points[start:start + step]
        xs = pts[:, 0:1] + dx
        ys = pts[:, 1:2] + dy
        _check_inside(xs, ys, mim.index.shape, "orientation window")
        labels = mim.index[ys, xs].astype(np.int64) - 1
        weights = mim.max_amplitude[ys, xs] * gauss
        rows = np.arange(len(pts))[:, None] * ORIENTATION_BINS
        flat = (rows + label_bins[labels]).ravel()
        hists[start:start + len(pts)] = np.bincount(
            flat, weights=weights.ravel(), minlength=len(pts) * ORIENTATION_BINS
        ).reshape(len(pts), ORIENTATION_BINS)
    return hists


def _peak_angles(hists: np.ndarray, n_orientations: int, min_peak_ratio: float):
    bin_width = 2.0 * math.pi / ORIENTATION_BINS
    total = hists.sum(axis=1)
    # confidence from the per-label mass: uniform labels give a ratio near 1
    per_label = hists.reshape(len(hists), -1)
    label_mass = np.sort(per_label, axis=1)[:, -n_orientations:]
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(total > 0, label_mass.max(axis=1) * n_orientations / total, 0.0)

    # adjacent label spikes sit 2*pi/n_o apart; half that spacing merges them smoothly
    spacing = ORIENTATION_BINS / n_orientations
    smooth = _smooth_circular(hists, spacing / 2.0)
    peak = np.argmax(smooth, axis=1)
    rows = np.arange(len(hists))
    left = smooth[rows, (peak - 1) % ORIENTATION_BINS]
    mid = smooth[rows, peak]
    right = smooth[rows, (peak + 1) % ORIENTATION_BINS]
    denom = left - 2.0 * mid + right
    with np.errstate(invalid="ignore", divide="ignore"):
        offset = np.where(denom < 0, 0.5 * (left - right) / denom, 0.0)
    angles = ((peak + offset) * bin_width) % (2.0 * math.pi)

    flagged = (total <= 0) | (ratio < min_peak_ratio)
    angles = np.where(flagged, 0.0, angles)
    return angles, flagged, ratio


def dominant_orientation(
    mim: MaxIndexMap, kp: Keypoint, radius: float, min_peak_ratio: float = MIN_PEAK_RATIO
) -> OrientationEstimate:
    """Dominant orientation of a keypoint neighbourhood, as a doubled angle.

    Each pixel votes for ``2 * (index - 1) * pi / n_orientations``, weighted
    by its maximum amplitude and a Gaussian of sigma ``radius / 2``.  The
    doubling makes the pi-periodic channel angles single-valued on the
    circle.  An empty or near-uniform histogram is flagged and reported as 0.
    """
    pt = np.array([[int(round(kp.x)), int(round(kp.y))]])
    hist = orientation_histograms(mim, pt, radius)
    angles, flagged, ratio = _peak_angles(hist, mim.n_orientations, min_peak_ratio)
    return OrientationEstimate(float(angles[0]), bool(flagged[0]), float(ratio[0]))


def amplitude_centroid_angles(mim: MaxIndexMap, points: np.ndarray, radius: float) -> np.ndarray:
    """Direction from each point to the Gaussian-weighted centroid of ``max_amplitude``."""
    dx, dy = _disk_offsets(radius)
    sigma = radius / 2.0
    gauss = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    out = np.zeros(len(points))
    step = max(1, _CHUNK_PIXELS // dx.size)
    for start in range(0, len(points), step):
        pts = points[start:start + step]
        xs = pts[:, 0:1] + dx
        ys = pts[:, 1:2] + dy
        _check_inside(xs, ys, mim.index.shape, "orientation window")
        w = mim.max_amplitude[ys, xs] * gauss
        out[start:start + len(pts)] = np.arctan2(w @ dy, w @ dx)
    return out


def assign_orientations(
    mim: MaxIndexMap, keypoints: list[Keypoint], radius: float, min_peak_ratio: float = MIN_PEAK_RATIO
) -> np.ndarray:
    """Set ``kp.orientation`` for every keypoint and return the flag array.

    The histogram peak fixes the feature axis modulo pi; the half-plane
    holding most of the local amplitude mass picks the direction along it.
    Both cues are unchanged by intensity inversion.
    """
    if not keypoints:
        return np.zeros(0, dtype=bool)
    pts = np.array([[int(round(k.x)), int(round(k.y))] for k in keypoints], dtype=np.int64)
    hists = orientation_histograms(mim, pts, radius)
    doubled, flagged, _ = _peak_angles(hists, mim.n_orientations, min_peak_ratio)
    axis = doubled / 2.0
    centroid = amplitude_centroid_angles(mim, pts, radius)
    flip = np.cos(centroid - axis) < 0
    theta = np.where(flip, axis + math.pi, axis) % (2.0 * math.pi)
    for kp, t in zip(keypoints, theta):
        kp.orientation = float(t)
    return flagged


def _patch_geometry(patch_size: int, weighted: bool = True):
    half = patch_size / 2.0
    u = np.arange(patch_size) - half + 0.5
    uu, vv = np.meshgrid(u, u)
    uu, vv = uu.ravel(), vv.ravel()
    sigma = patch_size / 2.0
    weight = np.exp(-(uu * uu + vv * vv) / (2.0 * sigma * sigma))
    if not weighted:
        weight = np.ones_like(weight)
    cell = patch_size / GRID
    cx = np.minimum(((uu + half) // cell).astype(np.int64), GRID - 1)
    cy = np.minimum(((vv + half) // cell).astype(np.int64), GRID - 1)
    return uu, vv, weight, cy * GRID + cx


def describe_keypoints(
    mim_set: list[MaxIndexMap], keypoints: list[Keypoint], patch_size: int = 96,
    weighted: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Descriptors of all keypoints against every MIM of ``mim_set``.

    Returns an array ``(n_keypoints, len(mim_set), 6 * 6 * n_orientations)``
    and a boolean ``degenerate`` flag per keypoint (no amplitude anywhere in
    the patch).  Patches are rotated by ``kp.orientation`` and sampled at
    the nearest pixel, since the map values are categorical.  Each sample
    adds a Gaussian weight (sigma ``patch_size / 2``) to its cell histogram,
    or a plain count when ``weighted`` is false.
    """
    if not mim_set:
        raise ValueError("mim_set is empty")
    if patch_size % GRID:
        raise ValueError(f"patch size must be divisible by {GRID}, got {patch_size}")
    n_o = mim_set[0].n_orientations
    dim = GRID * GRID * n_o
    n_kp = len(keypoints)
    out = np.zeros((n_kp, len(mim_set), dim))
    degenerate = np.zeros(n_kp, dtype=bool)
    if n_kp == 0:
        return out, degenerate

    uu, vv, weight, cell = _patch_geometry(patch_size, weighted)
    kx = np.array([k.x for k in keypoints])[:, None]
    ky = np.array([k.y for k in keypoints])[:, None]
    theta = np.array([k.orientation for k in keypoints])[:, None]
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    shape = mim_set[0].index.shape

    step = max(1, _CHUNK_PIXELS // uu.size)
    for start in range(0, n_kp, step):
        sl = slice(start, min(start + step, n_kp))
        m = sl.stop - sl.start
        xs = np.rint(kx[sl] + cos_t[sl] * uu - sin_t[sl] * vv).astype(np.int64)
        ys = np.rint(ky[sl] + sin_t[sl] * uu + cos_t[sl] * vv).astype(np.int64)
        _check_inside(xs, ys, shape, "descriptor patch")
        flat_pix = ys * shape[1] + xs
        base = np.arange(m)[:, None] * dim + cell * n_o
        w = np.broadcast_to(weight, (m, weight.size)).ravel()
        degenerate[sl] = ~np.any(mim_set[0].max_amplitude.ravel()[flat_pix] > 0, axis=1)
        for v, mim in enumerate(mim_set):
            labels = mim.index.ravel()[flat_pix].astype(np.int64) - 1
            hist = np.bincount((base + labels).ravel(), weights=w, minlength=m * dim)
            out[sl, v] = hist.reshape(m, dim)

    norms = np.linalg.norm(out, axis=2, keepdims=True)
    np.divide(out, norms, out=out, where=norms > 0)
    return out, degenerate


def describe(mim_set: list[MaxIndexMap], kp: Keypoint, patch_size: int = 96,
             weighted: bool = True) -> list[Descriptor]:
    """One descriptor per MIM in ``mim_set`` for a single keypoint."""
    vecs, degenerate = describe_keypoints(mim_set, [kp], patch_size, weighted)
    return [
        Descriptor(vecs[0, v], kp, mim.shift, bool(degenerate[0]))
        for v, mim in enumerate(mim_set)
    ]
