"""Nearest-neighbour descriptor matching and robust affine fitting."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .detect import Keypoint
from .errors import DegenerateConfigurationError
from .imgproc import AffineTransform

MIN_AFFINE_POINTS = 3
_ROW_CHUNK = 512


@dataclass
class Correspondence:
    ref_kp: Keypoint
    tgt_kp: Keypoint
    distance: float
    variant: int = 0
    inlier: bool = False
    ref_index: int = -1
    tgt_index: int = -1


@dataclass
class MatchResult:
    correspondences: list[Correspondence]
    affine: AffineTransform | None
    inlier_count: int
    ref_keypoints: list[Keypoint] = field(default_factory=list)
    tgt_keypoints: list[Keypoint] = field(default_factory=list)
    min_inliers: int = 4

    @property
    def success(self) -> bool:
        return self.affine is not None and self.inlier_count >= self.min_inliers

    @property
    def inliers(self) -> list[Correspondence]:
        return [c for c in self.correspondences if c.inlier]


def nearest_neighbours(ref: np.ndarray, tgt: np.ndarray, mutual: bool = True):
    """Index-level nearest-neighbour search.

    ``ref`` is ``(n, d)``; ``tgt`` is ``(m, v, d)`` holding ``v`` variants per
    target keypoint.  Returns ``(ref_idx, tgt_idx, variant, distance)``
    arrays.  Ties resolve to the smaller target index, then variant.
    """
    ref = np.asarray(ref, dtype=np.float64)
    tgt = np.asarray(tgt, dtype=np.float64)
    if tgt.ndim == 2:
        tgt = tgt[:, np.newaxis, :]
    if ref.ndim != 2 or len(ref) == 0 or len(tgt) == 0:
        raise ValueError("nearest-neighbour matching needs non-empty descriptor sets")
    if ref.shape[1] != tgt.shape[2]:
        raise ValueError("reference and target descriptors differ in dimension")
    m, v, d = tgt.shape
    flat = tgt.reshape(m * v, d)
    flat_sq = np.einsum("ij,ij->i", flat, flat)

    best_col = np.empty(len(ref), dtype=np.int64)
    # reverse direction: best reference row for every target keypoint
    col_best_d = np.full(m, np.inf)
    col_best_row = np.full(m, -1, dtype=np.int64)
    for start in range(0, len(ref), _ROW_CHUNK):
        block = ref[start:start + _ROW_CHUNK]
        sq = np.einsum("ij,ij->i", block, block)[:, None] + flat_sq[None, :] - 2.0 * block @ flat.T
        np.maximum(sq, 0.0, out=sq)
        best_col[start:start + len(block)] = np.argmin(sq, axis=1)
        per_kp = sq.reshape(len(block), m, v).min(axis=2)
        rows = np.argmin(per_kp, axis=0)
        vals = per_kp[rows, np.arange(m)]
        better = vals < col_best_d
        col_best_d[better] = vals[better]
        col_best_row[better] = rows[better] + start

    ref_idx = np.arange(len(ref))
    tgt_idx, variant = np.divmod(best_col, v)
    if mutual:
        keep = col_best_row[tgt_idx] == ref_idx
        ref_idx, tgt_idx, variant = ref_idx[keep], tgt_idx[keep], variant[keep]
    dist = np.linalg.norm(ref[ref_idx] - tgt[tgt_idx, variant], axis=1)
    return ref_idx, tgt_idx, variant, dist


def match_nn(
    ref_descs: np.ndarray,
    tgt_descs: np.ndarray,
    ref_kps: list[Keypoint] | None = None,
    tgt_kps: list[Keypoint] | None = None,
    mutual: bool = True,
    variant_ids=None,
) -> list[Correspondence]:
    """Match every reference descriptor to its globally nearest target descriptor.

    ``tgt_descs`` is ``(m, n_variants, d)``; a plain ``(m, d)`` array is a
    single variant.  With ``mutual`` a pair survives only if the reference
    descriptor is also the nearest one for the target keypoint over all of
    its variants.
    """
    ref_idx, tgt_idx, variant, dist = nearest_neighbours(ref_descs, tgt_descs, mutual)
    if ref_kps is None:
        ref_kps = [Keypoint(0.0, 0.0, "corner", 0.0) for _ in range(len(ref_descs))]
    if tgt_kps is None:
        tgt_kps = [Keypoint(0.0, 0.0, "corner", 0.0) for _ in range(len(tgt_descs))]
    ids = np.arange(np.asarray(tgt_descs).shape[1] if np.ndim(tgt_descs) == 3 else 1)
    if variant_ids is not None:
        ids = np.asarray(variant_ids)
    return [
        Correspondence(ref_kps[i], tgt_kps[j], float(dd), int(ids[k]), False, int(i), int(j))
        for i, j, k, dd in zip(ref_idx, tgt_idx, variant, dist)
    ]


def _design(src: np.ndarray) -> np.ndarray:
    return np.column_stack((src, np.ones(len(src))))


def estimate_affine(src, dst, return_residuals: bool = False):
    """Least-squares affine transform taking ``src`` points onto ``dst``.

    Raises ``DegenerateConfigurationError`` for fewer than three points or a
    collinear configuration.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if len(src) != len(dst):
        raise ValueError("src and dst must hold the same number of points")
    if len(src) < MIN_AFFINE_POINTS:
        raise DegenerateConfigurationError(f"need at least 3 point pairs, got {len(src)}")
    centred = src - src.mean(axis=0)
    scale = max(np.abs(centred).max(), 1.0)
    sv = np.linalg.svd(centred / scale, compute_uv=False)
    if sv[-1] < 1e-9 * max(sv[0], 1e-300) or sv[0] == 0:
        raise DegenerateConfigurationError("point configuration is collinear or coincident")
    a = _design(src)
    coef, *_ = np.linalg.lstsq(a, dst, rcond=None)
    t = AffineTransform(coef[0, 0], coef[1, 0], coef[0, 1], coef[1, 1], coef[2, 0], coef[2, 1])
    if return_residuals:
        return t, np.linalg.norm(t.apply(src) - dst, axis=1)
    return t


def _batch_affines(src: np.ndarray, dst: np.ndarray, samples: np.ndarray):
    """Exact affine fits for ``(k, 3)`` index triples; returns params and validity."""
    a = np.concatenate((src[samples], np.ones(samples.shape + (1,))), axis=2)  # (k, 3, 3)
    b = dst[samples]  # (k, 3, 2)
    p0 = src[samples]
    cross = (p0[:, 1, 0] - p0[:, 0, 0]) * (p0[:, 2, 1] - p0[:, 0, 1]) - (
        p0[:, 1, 1] - p0[:, 0, 1]
    ) * (p0[:, 2, 0] - p0[:, 0, 0])
    ok = np.abs(cross) > 1e-6
    a_safe = np.where(ok[:, None, None], a, np.eye(3))
    params = np.linalg.solve(a_safe, b)  # (k, 3, 2): rows x, y, 1
    return params, ok


def _draw_triples(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """``k`` triples of distinct indices below ``n``, drawn uniformly."""
    a = rng.integers(0, n, k)
    b = rng.integers(0, n - 1, k)
    b += b >= a
    c = rng.integers(0, n - 2, k) if n > 3 else np.zeros(k, dtype=np.int64)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    c += c >= lo
    c += c >= hi
    return np.column_stack((a, b, c))


def _required_iterations(inlier_ratio: float, confidence: float) -> int:
    good = inlier_ratio ** MIN_AFFINE_POINTS
    if good >= 1.0:
        return 1
    if good <= 0.0:
        return np.iinfo(np.int64).max
    return int(np.ceil(np.log(1.0 - confidence) / np.log1p(-good)))


def _canonical_order(cands: list[Correspondence]) -> list[int]:
    keys = [
        (c.ref_kp.x, c.ref_kp.y, c.tgt_kp.x, c.tgt_kp.y, c.distance, c.variant) for c in cands
    ]
    return sorted(range(len(cands)), key=keys.__getitem__)


def remove_outliers(
    cands: list[Correspondence],
    threshold: float = 3.0,
    iterations: int = 10000,
    seed: int = 0,
    min_inliers: int = 4,
    confidence: float = 0.9999,
) -> MatchResult:
    """Random-sample affine consensus followed by a least-squares refit.

    Candidates are put in a canonical order first, so the outcome does not
    depend on the order they arrive in.  Sampling stops early once the best
    consensus makes further draws pointless at the requested ``confidence``.  With fewer than three candidates,
    or no non-degenerate sample, the result carries no affine.
    """
    order = _canonical_order(cands)
    cands = [replace(cands[i], inlier=False) for i in order]
    n = len(cands)
    if n < MIN_AFFINE_POINTS:
        return MatchResult(cands, None, 0, min_inliers=min_inliers)

    src = np.array([c.ref_kp.xy for c in cands], dtype=np.float64)
    dst = np.array([c.tgt_kp.xy for c in cands], dtype=np.float64)
    src_h = _design(src)
    rng = np.random.default_rng(seed)

    best_count, best_cost, best_mask = -1, np.inf, None
    batch = 256
    done = 0
    while done < iterations:
        k = min(batch, iterations - done)
        samples = _draw_triples(rng, n, k)
        done += k
        params, ok = _batch_affines(src, dst, samples)
        if not ok.any():
            continue
        params = params[ok]
        pred = np.einsum("nj,kjc->knc", src_h, params)
        err = np.linalg.norm(pred - dst[None], axis=2)
        inl = err < threshold
        counts = inl.sum(axis=1)
        cost = np.where(inl, err, threshold).sum(axis=1)
        # best by count, then by truncated residual sum; first wins remaining ties
        idx = np.lexsort((cost, -counts))[0]
        if counts[idx] > best_count or (counts[idx] == best_count and cost[idx] < best_cost):
            best_count, best_cost, best_mask = int(counts[idx]), float(cost[idx]), inl[idx]
            iterations = min(iterations, _required_iterations(best_count / n, confidence))

    if best_mask is None or best_count < MIN_AFFINE_POINTS:
        return MatchResult(cands, None, 0, min_inliers=min_inliers)

    mask = best_mask
    affine = None
    for _ in range(10):
        try:
            affine = estimate_affine(src[mask], dst[mask])
        except DegenerateConfigurationError:
            break
        new_mask = np.linalg.norm(affine.apply(src) - dst, axis=1) < threshold
        if new_mask.sum() < MIN_AFFINE_POINTS:
            break
        if np.array_equal(new_mask, mask):
            break
        mask = new_mask
    if affine is None:
        return MatchResult(cands, None, 0, min_inliers=min_inliers)
    for c, flag in zip(cands, mask):
        c.inlier = bool(flag)
    return MatchResult(cands, affine, int(mask.sum()), min_inliers=min_inliers)
