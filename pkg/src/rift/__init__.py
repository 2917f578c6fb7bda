"""Multi-modal image matching with phase congruency keypoints and maximum index maps."""
from .detect import DetectParams, Keypoint
from .errors import RiftError
from .imgproc import AffineTransform, load_grayscale, normalize_minmax, warp_affine
from .loggabor import FilterBankParams
from .match import Correspondence, MatchResult
from .phasecong import PcParams
from .pipeline import MatchParams, RiftConfig, extract_features, match_pair

__all__ = [
    "AffineTransform", "Correspondence", "DetectParams", "FilterBankParams", "Keypoint",
    "MatchParams", "MatchResult", "PcParams", "RiftConfig", "RiftError", "extract_features",
    "load_grayscale", "match_pair", "normalize_minmax", "warp_affine",
]
__version__ = "0.1.0"
