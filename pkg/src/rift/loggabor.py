"""Frequency-domain log-Gabor filter bank and FFT convolution.

Filters are stored in the unshifted FFT layout (``numpy.fft.fftfreq``
ordering), so the zero-frequency sample sits at index ``[0, 0]``.  Frequency
angles are measured with ``atan2(fy, fx)`` in the image's own ``(x, y)``
frame, which makes a spatial rotation of the image rotate the filter
orientations in the same sense.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .imgproc import as_raster

LOWPASS_CUTOFF = 0.45
LOWPASS_ORDER = 15


@dataclass(frozen=True)
class FilterBankParams:
    n_scales: int = 4
    n_orientations: int = 6
    min_wavelength: float = 3.0
    scale_mult: float = 2.1
    sigma_on_f: float = 0.55
    angular_sigma_ratio: float = 1.2

    def __post_init__(self):
        if self.n_scales < 2:
            raise ValueError(f"n_scales must be >= 2, got {self.n_scales}")
        if self.n_orientations < 3:
            raise ValueError(f"n_orientations must be >= 3, got {self.n_orientations}")
        if not self.min_wavelength > 2:
            raise ValueError(f"min_wavelength must be > 2 pixels, got {self.min_wavelength}")
        if not self.scale_mult > 1:
            raise ValueError(f"scale_mult must be > 1, got {self.scale_mult}")
        if not 0 < self.sigma_on_f < 1:
            raise ValueError(f"sigma_on_f must lie in (0, 1), got {self.sigma_on_f}")
        if not self.angular_sigma_ratio > 0:
            raise ValueError("angular_sigma_ratio must be positive")

    @property
    def orientations(self) -> np.ndarray:
        """Filter angles ``o * pi / n_orientations`` for ``o = 0 .. n-1``."""
        return np.arange(self.n_orientations) * (math.pi / self.n_orientations)

    @property
    def center_frequencies(self) -> np.ndarray:
        """Radial centre frequencies in cycles per pixel, finest scale first."""
        return 1.0 / (self.min_wavelength * self.scale_mult ** np.arange(self.n_scales))

    @property
    def angular_sigma(self) -> float:
        return self.angular_sigma_ratio * math.pi / self.n_orientations


def frequency_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Radius (cycles/pixel) and angle of every FFT sample, DC at ``[0, 0]``."""
    fx = np.fft.fftfreq(width)[np.newaxis, :]
    fy = np.fft.fftfreq(height)[:, np.newaxis]
    radius = np.hypot(fx, fy)
    angle = np.arctan2(np.broadcast_to(fy, radius.shape), np.broadcast_to(fx, radius.shape))
    return radius, angle


@dataclass(frozen=True, eq=False)
class FilterBank:
    width: int
    height: int
    params: FilterBankParams
    radial_filters: np.ndarray  # (n_scales, h, w)
    angular_spreads: np.ndarray  # (n_orientations, h, w)
    lowpass: np.ndarray  # (h, w)

    def combined(self, scale: int, orientation: int) -> np.ndarray:
        """Transfer function of one (scale, orientation) filter."""
        return self.radial_filters[scale] * self.lowpass * self.angular_spreads[orientation]


def build_filter_bank(width: int, height: int, params: FilterBankParams | None = None) -> FilterBank:
    params = params or FilterBankParams()
    if width < 16 or height < 16:
        raise ValueError(f"filter bank needs at least 16x16 pixels, got {width}x{height}")

    radius, angle = frequency_grid(width, height)
    safe_radius = radius.copy()
    safe_radius[0, 0] = 1.0

    lowpass = 1.0 / (1.0 + (radius / LOWPASS_CUTOFF) ** (2 * LOWPASS_ORDER))

    log_sigma_sq = 2.0 * math.log(params.sigma_on_f) ** 2
    radial = np.empty((params.n_scales, height, width))
    for s, f0 in enumerate(params.center_frequencies):
        radial[s] = np.exp(-np.log(safe_radius / f0) ** 2 / log_sigma_sq)
        radial[s, 0, 0] = 0.0

    sin_a, cos_a = np.sin(angle), np.cos(angle)
    two_sigma_sq = 2.0 * params.angular_sigma ** 2
    spreads = np.empty((params.n_orientations, height, width))
    for o, theta in enumerate(params.orientations):
        # wrapped angular distance, via sine/cosine differences
        ds = sin_a * math.cos(theta) - cos_a * math.sin(theta)
        dc = cos_a * math.cos(theta) + sin_a * math.sin(theta)
        dtheta = np.abs(np.arctan2(ds, dc))
        spreads[o] = np.exp(-dtheta ** 2 / two_sigma_sq)

    for arr in (radial, spreads, lowpass):
        arr.setflags(write=False)
    return FilterBank(width, height, params, radial, spreads, lowpass)


@dataclass(frozen=True, eq=False)
class ConvolutionSequence:
    """Even/odd responses of one image, arrays shaped ``(n_scales, n_orient, h, w)``."""

    even: np.ndarray
    odd: np.ndarray
    params: FilterBankParams
    amplitude: np.ndarray = field(init=False)
    summed_amplitude: np.ndarray = field(init=False)

    def __post_init__(self):
        amp = np.hypot(self.even, self.odd)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "summed_amplitude", amp.sum(axis=0))

    @property
    def shape(self) -> tuple[int, int]:
        return self.even.shape[-2:]


def convolve(img, bank: FilterBank) -> ConvolutionSequence:
    """Filter ``img`` with every (scale, orientation) pair of ``bank``.

    Boundary handling is circular, as implied by the FFT.
    """
    data = as_raster(img)
    if data.shape != (bank.height, bank.width):
        raise ValueError(
            f"image is {data.shape[1]}x{data.shape[0]} but filter bank is {bank.width}x{bank.height}"
        )
    p = bank.params
    spectrum = np.fft.fft2(data)
    even = np.empty((p.n_scales, p.n_orientations) + data.shape)
    odd = np.empty_like(even)
    for s in range(p.n_scales):
        band = spectrum * (bank.radial_filters[s] * bank.lowpass)
        for o in range(p.n_orientations):
            response = np.fft.ifft2(band * bank.angular_spreads[o])
            even[s, o] = response.real
            odd[s, o] = response.imag
    return ConvolutionSequence(even, odd, p)


def phase(even, odd) -> np.ndarray:
    """Local phase ``atan2(odd, even)`` in (-pi, pi]; ``atan2(0, 0) = 0``."""
    even = np.asarray(even, dtype=np.float64)
    odd = np.asarray(odd, dtype=np.float64)
    if even.shape != odd.shape:
        raise ValueError("even and odd responses must have the same shape")
    out = np.arctan2(odd, even)
    # atan2 returns -pi for (-0.0, negative); fold onto the closed upper end
    out[out == -math.pi] = math.pi
    return out
