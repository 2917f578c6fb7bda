"""Phase congruency maps and their orientation moments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .loggabor import ConvolutionSequence


@dataclass(frozen=True)
class PcParams:
    """
    Parameters
    ----------
    noise_k : float
        Number of noise standard deviations above the mean at which the
        noise threshold is placed.
    epsilon : float
        Guard added to denominators, on the [0, 1] amplitude scale.
    weight_cutoff, weight_gain : float
        Centre and steepness of the sigmoid that penalises a narrow spread
        of filter responses across scales.
    """

    noise_k: float = 2.0
    epsilon: float = 1e-4
    weight_cutoff: float = 0.5
    weight_gain: float = 10.0

    def __post_init__(self):
        if self.noise_k < 0:
            raise ValueError("noise_k must be >= 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not 0 < self.weight_cutoff < 1:
            raise ValueError("weight_cutoff must lie in (0, 1)")
        if not self.weight_gain > 0:
            raise ValueError("weight_gain must be > 0")


@dataclass(frozen=True, eq=False)
class PcMaps:
    per_orientation: np.ndarray  # (n_orient, h, w)
    combined: np.ndarray  # (h, w)
    orientations: np.ndarray  # filter angles, radians
    noise_threshold: np.ndarray  # T per orientation


@dataclass(frozen=True, eq=False)
class MomentMaps:
    principal_axis: np.ndarray
    min_moment: np.ndarray
    max_moment: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


def estimate_noise_threshold(seq: ConvolutionSequence, params: PcParams | None = None) -> np.ndarray:
    """Noise threshold for each orientation.

    The finest-scale amplitudes are modelled as Rayleigh distributed; the
    median gives the Rayleigh parameter, which is propagated to coarser
    scales in proportion to their bandwidth (a geometric series in
    ``1/scale_mult``) before forming ``mean + noise_k * std``.
    """
    params = params or PcParams()
    p = seq.params
    finest = seq.amplitude[0].reshape(p.n_orientations, -1)
    tau = np.median(finest, axis=1) / math.sqrt(math.log(4.0))
    r = 1.0 / p.scale_mult
    total_tau = tau * (1.0 - r ** p.n_scales) / (1.0 - r)
    noise_mean = total_tau * math.sqrt(math.pi / 2.0)
    noise_std = total_tau * math.sqrt((4.0 - math.pi) / 2.0)
    return np.maximum(noise_mean + params.noise_k * noise_std, 0.0)


def compute_pc(seq: ConvolutionSequence, params: PcParams | None = None) -> PcMaps:
    params = params or PcParams()
    eps = params.epsilon
    n_scales = seq.params.n_scales
    thresholds = estimate_noise_threshold(seq, params)

    sum_e = seq.even.sum(axis=0)  # (n_orient, h, w)
    sum_o = seq.odd.sum(axis=0)
    sum_a = seq.summed_amplitude
    norm = np.hypot(sum_e, sum_o)
    safe = np.where(norm > 0, norm, 1.0)
    mean_e = np.where(norm > 0, sum_e / safe, 0.0)
    mean_o = np.where(norm > 0, sum_o / safe, 0.0)

    # A * (cos(dphi) - |sin(dphi)|), summed over scales
    energy = (
        seq.even * mean_e + seq.odd * mean_o - np.abs(seq.even * mean_o - seq.odd * mean_e)
    ).sum(axis=0)
    energy = np.maximum(energy - thresholds[:, None, None], 0.0)

    spread = sum_a / (n_scales * (seq.amplitude.max(axis=0) + eps))
    weight = 1.0 / (1.0 + np.exp(params.weight_gain * (params.weight_cutoff - spread)))
    weighted = weight * energy

    per_orientation = np.clip(weighted / (sum_a + eps), 0.0, 1.0)
    combined = np.clip(weighted.sum(axis=0) / (sum_a.sum(axis=0) + eps), 0.0, 1.0)
    return PcMaps(per_orientation, combined, seq.params.orientations, thresholds)


def compute_moments(pc: PcMaps) -> MomentMaps:
    """Moment analysis of the per-orientation maps.

    The ``+sqrt`` root is returned as ``max_moment`` (edge strength) and the
    ``-sqrt`` root as ``min_moment`` (cornerness).
    """
    maps = pc.per_orientation
    cos_t = np.cos(pc.orientations)[:, None, None]
    sin_t = np.sin(pc.orientations)[:, None, None]
    pc_cos = maps * cos_t
    pc_sin = maps * sin_t
    a = (pc_cos ** 2).sum(axis=0)
    b = 2.0 * (pc_cos * pc_sin).sum(axis=0)
    c = (pc_sin ** 2).sum(axis=0)

    root = np.hypot(b, a - c)
    total = a + c
    max_moment = 0.5 * (total + root)
    min_moment = np.maximum(0.5 * (total - root), 0.0)
    psi = 0.5 * np.arctan2(b, a - c)
    return MomentMaps(psi, min_moment, max_moment, a, b, c)
