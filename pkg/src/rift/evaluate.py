"""Ground-truth evaluation, the rotation sweep and JSON reports."""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .imgproc import AffineTransform, as_raster, load_grayscale, warp_affine
from .match import MatchResult, estimate_affine
from .pipeline import Features, RiftConfig, extract_features, match_features
from .errors import NoKeypointsError

GT_POINT_COUNT = 5
MIN_CORRECT = 4


@dataclass(frozen=True)
class GroundTruth:
    affine: AffineTransform
    source_points: tuple = ()
    target_points: tuple = ()

    def __post_init__(self):
        if self.source_points:
            src = np.asarray(self.source_points, dtype=np.float64)
            dst = np.asarray(self.target_points, dtype=np.float64)
            if src.shape != (GT_POINT_COUNT, 2) or dst.shape != src.shape:
                raise ValueError(f"ground truth needs exactly {GT_POINT_COUNT} point pairs")
            rmse = math.sqrt(np.mean(np.sum((self.affine.apply(src) - dst) ** 2, axis=1)))
            if rmse >= 1.0:
                raise ValueError(f"ground-truth affine fits its points with RMSE {rmse:.3f} px (>= 1)")

    @classmethod
    def from_points(cls, source_points, target_points) -> "GroundTruth":
        affine = estimate_affine(source_points, target_points)
        return cls(affine, tuple(map(tuple, np.asarray(source_points, float))),
                   tuple(map(tuple, np.asarray(target_points, float))))

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruth":
        """Accepts ``{"affine": [a11, a12, a21, a22, tx, ty]}`` and/or
        ``{"points": [{"ref": [x, y], "tgt": [x, y]}, ...]}`` (five pairs)."""
        points = data.get("points")
        if points is not None:
            src = [p["ref"] for p in points]
            dst = [p["tgt"] for p in points]
            if "affine" in data:
                return cls(AffineTransform(*data["affine"]), tuple(map(tuple, src)), tuple(map(tuple, dst)))
            return cls.from_points(src, dst)
        if "affine" in data:
            return cls(AffineTransform(*data["affine"]))
        raise ValueError("ground truth must provide 'affine' coefficients or 'points'")

    @classmethod
    def load(cls, path) -> "GroundTruth":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class EvaluationReport:
    ncm: int
    me: float | None
    rmse: float | None
    success: bool
    runtime: float = 0.0
    inlier_count: int = 0
    angle: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationReport":
        return cls(**data)


def residual_stats(residuals, threshold: float = 3.0) -> tuple[int, float | None, float | None]:
    """NCM, mean error and RMSE over the residuals below ``threshold``."""
    r = np.asarray(residuals, dtype=np.float64)
    correct = r[r < threshold]
    if correct.size == 0:
        return 0, None, None
    return int(correct.size), float(correct.mean()), float(math.sqrt(np.mean(correct ** 2)))


def evaluate(result: MatchResult, gt: GroundTruth, threshold: float = 3.0,
             runtime: float = 0.0) -> EvaluationReport:
    """Score the inlier correspondences of ``result`` against ``gt``.

    A residual is the distance between the ground-truth image of the
    reference point and the matched target point.  Mean error and RMSE are
    taken over the correct matches only; the pair counts as matched when
    there are at least four of them.
    """
    inliers = result.inliers
    if inliers:
        src = np.array([c.ref_kp.xy for c in inliers])
        dst = np.array([c.tgt_kp.xy for c in inliers])
        residuals = np.linalg.norm(gt.affine.apply(src) - dst, axis=1)
    else:
        residuals = np.zeros(0)
    ncm, me, rmse = residual_stats(residuals, threshold)
    return EvaluationReport(ncm, me, rmse, ncm >= MIN_CORRECT, runtime, len(inliers))


def success_rate(reports) -> float:
    reports = list(reports)
    if not reports:
        return 0.0
    return sum(r.success for r in reports) / len(reports)


def sweep_angles(step: float = 5.0) -> list[float]:
    """``0, step, ...`` below 360, plus 359 when not already present."""
    if step <= 0:
        raise ValueError("step must be positive")
    angles = []
    k = 0
    while k * step < 360:
        angles.append(float(k * step))
        k += 1
    if 359.0 not in angles:
        angles.append(359.0)
    return angles


def rotation_about_center(degrees: float, shape) -> AffineTransform:
    h, w = shape
    return AffineTransform.rotation(degrees, ((w - 1) / 2.0, (h - 1) / 2.0))


@dataclass
class SweepReport:
    reports: list[EvaluationReport] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return success_rate(self.reports)

    def to_dict(self) -> dict:
        return {"success_rate": self.success_rate, "reports": [r.to_dict() for r in self.reports]}


# per-process state for the worker pool
_SWEEP_STATE: dict = {}


def _sweep_init(img, ref: Features, cfg: RiftConfig, threshold: float):
    _SWEEP_STATE.update(img=img, ref=ref, cfg=cfg, threshold=threshold)


def _sweep_one(angle: float) -> EvaluationReport:
    img, ref, cfg = _SWEEP_STATE["img"], _SWEEP_STATE["ref"], _SWEEP_STATE["cfg"]
    threshold = _SWEEP_STATE["threshold"]
    t0 = time.perf_counter()
    gt_t = rotation_about_center(angle, img.shape)
    rotated = warp_affine(img, gt_t, (img.shape[1], img.shape[0]))
    try:
        tgt = extract_features(rotated, cfg, all_variants=True)
        result = match_features(ref, tgt, cfg)
    except NoKeypointsError:
        return EvaluationReport(0, None, None, False, time.perf_counter() - t0, 0, angle)
    report = evaluate(result, GroundTruth(gt_t), threshold, time.perf_counter() - t0)
    report.angle = angle
    return report


def rotation_sweep(reference, cfg: RiftConfig | None = None, step: float = 5.0,
                   workers: int = 1, threshold: float = 3.0, angles=None) -> SweepReport:
    """Match rotated copies of ``reference`` against the original.

    ``reference`` is a path or an image array.  Each copy is rotated about
    the image centre onto a canvas of the same size; the rotation itself is
    the ground truth.  Reports come back ordered by angle.
    """
    cfg = cfg or RiftConfig()
    img = as_raster(load_grayscale(reference) if isinstance(reference, (str, Path)) else reference)
    ref = extract_features(img, cfg, all_variants=False)
    angles = sweep_angles(step) if angles is None else [float(a) for a in angles]
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_sweep_init,
                                 initargs=(img, ref, cfg, threshold)) as pool:
            reports = list(pool.map(_sweep_one, angles))
    else:
        _sweep_init(img, ref, cfg, threshold)
        try:
            reports = [_sweep_one(a) for a in angles]
        finally:
            _SWEEP_STATE.clear()
    return SweepReport(reports)


def result_to_dict(result: MatchResult) -> dict:
    """JSON-ready view of a match result."""
    return {
        "success": result.success,
        "inlier_count": result.inlier_count,
        "candidate_count": len(result.correspondences),
        "reference_keypoints": len(result.ref_keypoints),
        "target_keypoints": len(result.tgt_keypoints),
        "affine": list(result.affine.coefficients) if result.affine is not None else None,
        "matches": [
            {
                "ref": [c.ref_kp.x, c.ref_kp.y],
                "tgt": [c.tgt_kp.x, c.tgt_kp.y],
                "distance": c.distance,
                "variant": c.variant,
                "inlier": c.inlier,
            }
            for c in result.correspondences
        ],
    }


def dumps(obj) -> str:
    """Stable JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
