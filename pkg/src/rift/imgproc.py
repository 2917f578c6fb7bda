"""Image containers and pixel-level utilities.

Images are plain 2-D ``numpy`` arrays indexed ``img[y, x]``: row-major, origin
at the top-left pixel, ``x`` to the right and ``y`` downwards.  Keypoint
coordinates and affine parameters everywhere in the package use the same
``(x, y)`` convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageLoadError, SingularTransformError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def as_raster(img, name: str = "image") -> np.ndarray:
    """Validate a single-channel image and return it as a float64 array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf values")
    return arr


@dataclass(frozen=True)
class AffineTransform:
    """Maps ``(x, y)`` to ``(a11*x + a12*y + tx, a21*x + a22*y + ty)``."""

    a11: float = 1.0
    a12: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22", "tx", "ty"):
            object.__setattr__(self, name, float(getattr(self, name)))
        det = self.determinant
        if not math.isfinite(det) or abs(det) < 1e-12:
            raise SingularTransformError(f"affine transform is singular (det={det!r})")

    @property
    def determinant(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def coefficients(self) -> tuple[float, float, float, float, float, float]:
        return (self.a11, self.a12, self.a21, self.a22, self.tx, self.ty)

    @property
    def matrix(self) -> np.ndarray:
        """3x3 homogeneous matrix."""
        return np.array(
            [[self.a11, self.a12, self.tx], [self.a21, self.a22, self.ty], [0.0, 0.0, 1.0]]
        )

    @classmethod
    def from_matrix(cls, m) -> "AffineTransform":
        m = np.asarray(m, dtype=np.float64)
        return cls(
            float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]),
            float(m[0, 2]), float(m[1, 2]),
        )

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls()

    @classmethod
    def rotation(cls, degrees: float, center=(0.0, 0.0)) -> "AffineTransform":
        """Rotation by ``degrees`` about ``center``.

        With ``y`` pointing down a positive angle turns the picture clockwise
        on screen.
        """
        t = math.radians(degrees)
        c, s = math.cos(t), math.sin(t)
        cx, cy = center
        return cls(c, -s, s, c, cx - c * cx + s * cy, cy - s * cx - c * cy)

    def apply(self, points) -> np.ndarray:
        """Transform an ``(n, 2)`` array of ``(x, y)`` points."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        x, y = p[:, 0], p[:, 1]
        return np.column_stack(
            (self.a11 * x + self.a12 * y + self.tx, self.a21 * x + self.a22 * y + self.ty)
        )

    def inverse(self) -> "AffineTransform":
        return AffineTransform.from_matrix(np.linalg.inv(self.matrix))

    def compose(self, other: "AffineTransform") -> "AffineTransform":
        """Return ``self ∘ other`` (apply ``other`` first)."""
        return AffineTransform.from_matrix(self.matrix @ other.matrix)


def load_grayscale(path) -> np.ndarray:
    """Read an image file as a float32 grayscale raster with values in [0, 1].

    Colour images are reduced with the 0.299/0.587/0.114 luma weights.
    Integer images are divided by the full scale of their bit depth; float
    images are min-max normalised.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("P", "PA", "LA", "RGBA", "CMYK", "YCbCr"):
                im = im.convert("RGB")
                mode = "RGB"
            arr = np.asarray(im)
    except FileNotFoundError as exc:
        raise ImageLoadError(f"{path}: file not found") from exc
    except UnidentifiedImageError as exc:
        raise ImageLoadError(f"{path}: unsupported or undecodable image format") from exc
    except OSError as exc:
        raise ImageLoadError(f"{path}: {exc}") from exc

    if mode == "1":
        data = arr.astype(np.float64)
    elif arr.dtype.kind in "ui":
        full = 255.0 if arr.dtype.itemsize == 1 else 65535.0
        if mode.startswith("I") and arr.dtype.itemsize == 4:
            full = float(max(arr.max(), 1))
        data = arr.astype(np.float64) / full
    else:
        data = normalize_minmax(arr.astype(np.float64)) if arr.ndim == 2 else arr.astype(np.float64)

    if data.ndim == 3:
        data = data[..., :3] @ np.asarray(LUMA_WEIGHTS)
    if data.ndim != 2:
        raise ImageLoadError(f"{path}: cannot interpret image of shape {arr.shape}")
    return np.clip(data, 0.0, 1.0).astype(np.float32)


def save_png(img, path, normalize: bool = True) -> None:
    """Write a single-channel raster (or an RGB uint8 array) as PNG."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        data = normalize_minmax(arr) if normalize else np.clip(arr, 0.0, 1.0)
        arr = np.round(data * 255.0).astype(np.uint8)
    Image.fromarray(arr).save(Path(path), format="PNG")


def warp_affine(img, t: AffineTransform, out_size: tuple[int, int]) -> np.ndarray:
    """Resample ``img`` under ``t`` into an output of ``out_size = (width, height)``.

    Every output pixel pulls its value from ``t^-1`` applied to its own
    coordinates, with bilinear interpolation.  Samples falling outside the
    input read as 0.
    """
    src = as_raster(img)
    width, height = out_size
    if width <= 0 or height <= 0:
        raise ValueError(f"invalid output size {out_size}")
    inv = t.inverse()
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    sx = inv.a11 * xs + inv.a12 * ys + inv.tx
    sy = inv.a21 * xs + inv.a22 * ys + inv.ty

    h, w = src.shape
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    out = np.zeros((height, width), dtype=np.float64)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xi = x0 + dx
            yi = y0 + dy
            ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            vals = np.zeros_like(out)
            vals[ok] = src[yi[ok], xi[ok]]
            out += wx * wy * vals
    return out


def normalize_minmax(img) -> np.ndarray:
    """Linearly rescale to [0, 1]; a constant input maps to all zeros."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot normalise an empty array")
    lo = arr.min()
    span = arr.max() - lo
    if span <= 0:
        return np.zeros_like(arr)
    return np.clip((arr - lo) / span, 0.0, 1.0)
