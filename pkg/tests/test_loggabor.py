import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rift.loggabor import (
    FilterBankParams,
    build_filter_bank,
    convolve,
    frequency_grid,
    phase,
)


def naive_circular_convolution(img, kernel):
    """out[y, x] = sum_{v,u} img[v, u] * kernel[(y - v) % h, (x - u) % w]."""
    h, w = img.shape
    out = np.zeros((h, w), dtype=complex)
    for y in range(h):
        for x in range(w):
            acc = 0j
            for v in range(h):
                for u in range(w):
                    acc += img[v, u] * kernel[(y - v) % h, (x - u) % w]
            out[y, x] = acc
    return out


def test_default_bank_shape():
    bank = build_filter_bank(64, 48, FilterBankParams(n_scales=4, n_orientations=6))
    assert bank.radial_filters.shape == (4, 48, 64)
    assert bank.angular_spreads.shape == (6, 48, 64)
    combos = {(s, o) for s in range(4) for o in range(6)}
    assert len(combos) == 24


def test_orientations_and_frequencies():
    p = FilterBankParams(n_orientations=6, min_wavelength=3, scale_mult=2.1)
    np.testing.assert_allclose(np.degrees(p.orientations), [0, 30, 60, 90, 120, 150])
    np.testing.assert_allclose(p.center_frequencies, 1 / (3 * 2.1 ** np.arange(4)))


@pytest.mark.parametrize("params", [FilterBankParams(), FilterBankParams(3, 8, 4.0, 1.7, 0.65, 1.0)])
def test_filters_bounded_and_zero_dc(params):
    bank = build_filter_bank(40, 32, params)
    for arr in (bank.radial_filters, bank.angular_spreads, bank.lowpass):
        assert arr.min() >= 0.0 and arr.max() <= 1.0
    assert np.all(bank.radial_filters[:, 0, 0] == 0.0)


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_scales=1), dict(min_wavelength=2.0), dict(sigma_on_f=1.0), dict(sigma_on_f=0.0),
     dict(n_orientations=2), dict(scale_mult=1.0)],
)
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        FilterBankParams(**kwargs)


def test_bank_too_small():
    with pytest.raises(ValueError):
        build_filter_bank(15, 32)


def test_radial_peak_at_nearest_grid_frequency():
    bank = build_filter_bank(64, 64, FilterBankParams(min_wavelength=3.0))
    radius, _ = frequency_grid(64, 64)
    gap = np.abs(radius - 1 / 3.0)
    nearest = np.isclose(gap, gap.min())
    peak = bank.radial_filters[0] == bank.radial_filters[0].max()
    assert np.all(nearest[peak])


def test_constant_image_gives_zero_response():
    bank = build_filter_bank(32, 32)
    seq = convolve(np.full((32, 32), 0.7), bank)
    assert np.abs(seq.even).max() < 1e-8
    assert np.abs(seq.odd).max() < 1e-8


def test_fft_matches_spatial_convolution(rng):
    img = rng.random((16, 16))
    bank = build_filter_bank(16, 16)
    seq = convolve(img, bank)
    for s in (0, 3):
        for o in (0, 2, 5):
            kernel = np.fft.ifft2(bank.combined(s, o))
            ref = naive_circular_convolution(img, kernel)
            assert np.abs(seq.even[s, o] - ref.real).max() < 1e-6
            assert np.abs(seq.odd[s, o] - ref.imag).max() < 1e-6


def test_amplitude_scales_linearly(rng):
    img = rng.random((32, 32))
    bank = build_filter_bank(32, 32)
    a1 = convolve(img, bank).amplitude
    a3 = convolve(3.7 * img, bank).amplitude
    mask = a1 > 1e-12
    rel = np.abs(a3[mask] - 3.7 * a1[mask]) / (3.7 * a1[mask])
    assert rel.max() < 1e-10


def test_linearity(rng):
    i, j = rng.random((2, 24, 24))
    bank = build_filter_bank(24, 24)
    lhs = convolve(2.0 * i - 0.5 * j, bank)
    si, sj = convolve(i, bank), convolve(j, bank)
    assert np.abs(lhs.even - (2.0 * si.even - 0.5 * sj.even)).max() < 1e-8
    assert np.abs(lhs.odd - (2.0 * si.odd - 0.5 * sj.odd)).max() < 1e-8


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(-5.0, 5.0), st.integers(0, 2**31 - 1))
def test_amplitude_contrast_equivariance(a, c, seed):
    img = np.random.default_rng(seed).random((16, 16))
    bank = build_filter_bank(16, 16)
    base = convolve(img, bank).amplitude
    moved = convolve(a * img + c, bank).amplitude
    mask = base > 1e-6
    assert np.all(np.abs(moved[mask] - a * base[mask]) <= 1e-8 * a * base[mask] + 1e-12)


def test_sequence_invariants(rng):
    seq = convolve(rng.random((20, 20)), build_filter_bank(20, 20))
    assert np.all(seq.amplitude >= 0)
    assert np.array_equal(seq.summed_amplitude, seq.amplitude.sum(axis=0))
    np.testing.assert_allclose(seq.amplitude, np.sqrt(seq.even ** 2 + seq.odd ** 2))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        convolve(np.zeros((20, 20)), build_filter_bank(16, 16))


@pytest.mark.parametrize(
    "e, o, expected",
    [(1.0, 0.0, 0.0), (0.0, 1.0, math.pi / 2), (-1.0, -1.0, -3 * math.pi / 4), (0.0, 0.0, 0.0),
     (-1.0, 0.0, math.pi), (-1.0, -0.0, math.pi)],
)
def test_phase_examples(e, o, expected):
    assert phase(np.array([e]), np.array([o]))[0] == pytest.approx(expected)
