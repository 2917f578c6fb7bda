"""End-to-end matching of an image pair."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .describe import MaxIndexMap, assign_orientations, build_mim_set, describe_keypoints
from .detect import DetectParams, Keypoint, detect
from .errors import ImageTooSmallError, NoKeypointsError
from .imgproc import as_raster
from .loggabor import ConvolutionSequence, FilterBankParams, build_filter_bank, convolve
from .match import MatchResult, match_nn, remove_outliers
from .phasecong import MomentMaps, PcMaps, PcParams, compute_moments, compute_pc


@dataclass(frozen=True)
class MatchParams:
    threshold: float = 3.0
    iterations: int = 10000
    seed: int = 0
    mutual: bool = True
    min_inliers: int = 4

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("match threshold must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class RiftConfig:
    filter: FilterBankParams = field(default_factory=FilterBankParams)
    pc: PcParams = field(default_factory=PcParams)
    detect: DetectParams = field(default_factory=DetectParams)
    patch_size: int = 96
    match: MatchParams = field(default_factory=MatchParams)

    def __post_init__(self):
        if self.patch_size <= 0 or self.patch_size % 6:
            raise ValueError(f"patch_size must be a positive multiple of 6, got {self.patch_size}")
        need = required_margin(self.patch_size)
        if self.detect.border_margin < need:
            raise ValueError(
                f"border_margin {self.detect.border_margin} is too small for rotated "
                f"{self.patch_size}px patches (need >= {need})"
            )

    def to_toml(self) -> str:
        lines = []
        lines.append(f"patch_size = {self.patch_size}")
        for section in ("filter", "pc", "detect", "match"):
            lines.append("")
            lines.append(f"[{section}]")
            for f in dataclasses.fields(getattr(self, section)):
                lines.append(f"{f.name} = {_toml_value(getattr(getattr(self, section), f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_toml(cls, text: str) -> "RiftConfig":
        data = tomllib.loads(text)
        sections = {
            "filter": FilterBankParams, "pc": PcParams, "detect": DetectParams, "match": MatchParams,
        }
        kwargs = {}
        for key, value in data.items():
            if key in sections:
                known = {f.name for f in dataclasses.fields(sections[key])}
                unknown = set(value) - known
                if unknown:
                    raise ValueError(f"unknown keys in [{key}]: {sorted(unknown)}")
                kwargs[key] = sections[key](**value)
            elif key == "patch_size":
                kwargs[key] = int(value)
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RiftConfig":
        return cls.from_toml(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_toml())


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return repr(v)


def required_margin(patch_size: int) -> int:
    """Border distance that keeps a patch inside the image at any rotation."""
    return int(math.ceil(patch_size / 2.0 * math.sqrt(2.0)))


@dataclass(eq=False)
class Features:
    keypoints: list[Keypoint]
    descriptors: np.ndarray  # (n_keypoints, n_variants, dim)
    degenerate: np.ndarray
    orientation_flagged: np.ndarray
    shifts: list[int]
    sequence: ConvolutionSequence | None = None
    pc: PcMaps | None = None
    moments: MomentMaps | None = None
    mims: list[MaxIndexMap] | None = None


def extract_features(img, cfg: RiftConfig | None = None, all_variants: bool = False,
                     keep_intermediates: bool = False) -> Features:
    """Detect and describe keypoints of one image.

    ``all_variants`` selects the target-image treatment (one descriptor per
    cyclic channel order); otherwise only the natural order is used.
    """
    cfg = cfg or RiftConfig()
    data = as_raster(img)
    h, w = data.shape
    if min(h, w) < 2 * cfg.patch_size:
        raise ImageTooSmallError(
            f"image is {w}x{h}; need at least {2 * cfg.patch_size} pixels in each dimension"
        )
    bank = build_filter_bank(w, h, cfg.filter)
    seq = convolve(data, bank)
    pc = compute_pc(seq, cfg.pc)
    moments = compute_moments(pc)
    keypoints = detect(moments, cfg.detect)
    mims = build_mim_set(seq, all_variants)
    flagged = assign_orientations(mims[0], keypoints, cfg.patch_size / 2.0)
    descs, degenerate = describe_keypoints(mims, keypoints, cfg.patch_size)
    feats = Features(keypoints, descs, degenerate, flagged, [m.shift for m in mims])
    if keep_intermediates:
        feats.sequence, feats.pc, feats.moments, feats.mims = seq, pc, moments, mims
    return feats


def match_features(ref: Features, tgt: Features, cfg: RiftConfig | None = None) -> MatchResult:
    cfg = cfg or RiftConfig()
    mp = cfg.match
    ref_ok = np.flatnonzero(~ref.degenerate)
    tgt_ok = np.flatnonzero(~tgt.degenerate)
    ref_kps = [ref.keypoints[i] for i in ref_ok]
    tgt_kps = [tgt.keypoints[i] for i in tgt_ok]
    if len(ref_kps) == 0 or len(tgt_kps) == 0:
        raise NoKeypointsError("no describable keypoints in one of the images")
    cands = match_nn(
        ref.descriptors[ref_ok, 0], tgt.descriptors[tgt_ok], ref_kps, tgt_kps,
        mutual=mp.mutual, variant_ids=tgt.shifts,
    )
    for c in cands:
        c.ref_index = int(ref_ok[c.ref_index])
        c.tgt_index = int(tgt_ok[c.tgt_index])
    result = remove_outliers(cands, mp.threshold, mp.iterations, mp.seed, mp.min_inliers)
    result.ref_keypoints = ref.keypoints
    result.tgt_keypoints = tgt.keypoints
    return result


def match_pair(reference, target, cfg: RiftConfig | None = None) -> MatchResult:
    """Match ``target`` against ``reference``.

    The reference is described with the natural channel order only and the
    target with every cyclic re-ordering, so swapping the roles can change
    the result slightly.  Check ``result.success`` (at least
    ``min_inliers`` consistent matches) for the outcome.
    """
    cfg = cfg or RiftConfig()
    ref = extract_features(reference, cfg, all_variants=False)
    if not ref.keypoints:
        raise NoKeypointsError("no keypoints detected in the reference image")
    tgt = extract_features(target, cfg, all_variants=True)
    if not tgt.keypoints:
        raise NoKeypointsError("no keypoints detected in the target image")
    return match_features(ref, tgt, cfg)
