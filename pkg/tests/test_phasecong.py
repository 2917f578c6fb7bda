import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rift.loggabor import FilterBankParams, build_filter_bank, convolve
from rift.phasecong import PcMaps, PcParams, compute_moments, compute_pc, estimate_noise_threshold


def pc_of(img, params=None, fb=None):
    h, w = img.shape
    seq = convolve(img, build_filter_bank(w, h, fb or FilterBankParams()))
    return seq, compute_pc(seq, params or PcParams())


def brute_force_pc(seq, params, thresholds):
    """Pixel-by-pixel phase-angle form of the PC model."""
    n_s, n_o, h, w = seq.even.shape
    eps = params.epsilon
    per = np.zeros((n_o, h, w))
    combined = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            num_total = 0.0
            den_total = 0.0
            for o in range(n_o):
                e = [float(seq.even[s, o, y, x]) for s in range(n_s)]
                od = [float(seq.odd[s, o, y, x]) for s in range(n_s)]
                amps = [math.hypot(e[s], od[s]) for s in range(n_s)]
                mean_phase = math.atan2(sum(od), sum(e))
                energy = 0.0
                for s in range(n_s):
                    dphi = math.atan2(od[s], e[s]) - mean_phase
                    energy += amps[s] * (math.cos(dphi) - abs(math.sin(dphi)))
                energy = max(energy - thresholds[o], 0.0)
                spread = sum(amps) / (n_s * (max(amps) + eps))
                weight = 1.0 / (1.0 + math.exp(params.weight_gain * (params.weight_cutoff - spread)))
                per[o, y, x] = min(max(weight * energy / (sum(amps) + eps), 0.0), 1.0)
                num_total += weight * energy
                den_total += sum(amps)
            combined[y, x] = min(max(num_total / (den_total + eps), 0.0), 1.0)
    return per, combined


def test_matches_brute_force(rng):
    img = rng.random((16, 16))
    for params in (PcParams(), PcParams(noise_k=0.5, weight_cutoff=0.3, weight_gain=4.0)):
        seq, pc = pc_of(img, params)
        per, combined = brute_force_pc(seq, params, pc.noise_threshold)
        assert np.abs(pc.per_orientation - per).max() < 1e-8
        assert np.abs(pc.combined - combined).max() < 1e-8


def test_constant_image():
    _, pc = pc_of(np.full((32, 32), 0.42))
    assert pc.combined.max() < 1e-6
    assert pc.per_orientation.max() < 1e-6


@pytest.mark.parametrize("seed", range(20))
def test_bounds_on_random_images(seed):
    img = np.random.default_rng(seed).random((24, 24)) ** (1 + seed % 3)
    _, pc = pc_of(img)
    for arr in (pc.combined, pc.per_orientation):
        assert arr.min() >= 0.0 and arr.max() <= 1.0


def test_step_edge_peaks_on_edge_column():
    img = np.zeros((32, 32))
    img[:, 16:] = 1.0
    _, pc = pc_of(img, PcParams(noise_k=0.0))
    cutoff = np.quantile(pc.combined, 0.99)
    # the discontinuity sits between columns 15 and 16; the circular spectrum adds one at the wrap
    top_cols = set(np.nonzero(pc.combined >= cutoff)[1])
    assert top_cols <= {15, 16, 0, 31}
    assert top_cols & {15, 16}
    row = pc.combined[16]
    assert max(row[15], row[16]) == pytest.approx(row.max())


def test_white_noise_is_suppressed():
    img = np.random.default_rng(2024).standard_normal((128, 128))
    _, pc = pc_of(img)
    assert pc.combined.mean() < 0.15


@pytest.mark.parametrize("a, c", [(0.5, 0.0), (2.0, 0.0), (0.5, 0.3), (2.0, 0.3)])
def test_contrast_invariance(camera, a, c):
    img = camera[200:328, 200:328]
    _, base = pc_of(img)
    _, moved = pc_of(a * img + c)
    assert np.abs(base.combined - moved.combined).max() < 5e-2


def test_noise_threshold_doubles_with_contrast(rng):
    img = rng.random((48, 48))
    h, w = img.shape
    bank = build_filter_bank(w, h)
    t1 = estimate_noise_threshold(convolve(img, bank))
    t2 = estimate_noise_threshold(convolve(2.0 * img, bank))
    np.testing.assert_allclose(t2, 2.0 * t1, rtol=1e-6)
    assert np.all(t1 > 0)


def test_noise_threshold_zero_case():
    bank = build_filter_bank(32, 32)
    seq = convolve(np.zeros((32, 32)), bank)
    t = estimate_noise_threshold(seq, PcParams(noise_k=0.0))
    assert np.all(t == 0.0)


def test_invalid_params():
    for kwargs in (dict(noise_k=-1), dict(epsilon=0), dict(weight_cutoff=1.0), dict(weight_gain=0)):
        with pytest.raises(ValueError):
            PcParams(**kwargs)


def maps_from(values, thetas=None):
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    thetas = np.arange(n) * math.pi / n if thetas is None else np.asarray(thetas, float)
    per = values.reshape(n, 1, -1) if values.ndim == 1 else values
    return PcMaps(per, per.mean(axis=0), thetas, np.zeros(n))


def test_moments_zero():
    m = compute_moments(maps_from(np.zeros(6)))
    for arr in (m.a, m.b, m.c, m.min_moment, m.max_moment):
        assert np.all(arr == 0.0)


def test_moments_single_orientation():
    p = 0.7
    m = compute_moments(maps_from([p, 0, 0, 0, 0, 0]))
    assert m.a.item() == pytest.approx(p * p)
    assert m.b.item() == pytest.approx(0.0, abs=1e-15)
    assert m.c.item() == pytest.approx(0.0, abs=1e-15)
    assert m.max_moment.item() == pytest.approx(p * p)
    assert m.min_moment.item() == pytest.approx(0.0, abs=1e-15)


def test_moments_isotropic():
    p = 0.4
    m = compute_moments(maps_from(np.full(6, p)))
    assert abs(m.max_moment.item() - m.min_moment.item()) < 1e-10
    assert m.max_moment.item() == pytest.approx((m.a.item() + m.c.item()) / 2)


def test_principal_axis_of_single_orientation():
    thetas = np.arange(6) * math.pi / 6
    vals = np.zeros(6)
    vals[2] = 1.0
    m = compute_moments(maps_from(vals, thetas))
    assert m.principal_axis.item() == pytest.approx(thetas[2])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6), st.integers(3, 9))
def test_moment_identities(values, n):
    vals = (np.resize(np.asarray(values), n)).reshape(n, 1, 1)
    pc = maps_from(vals)
    m = compute_moments(pc)
    assert np.all(m.max_moment >= m.min_moment)
    assert np.all(m.min_moment >= 0.0)
    assert np.abs(m.max_moment + m.min_moment - (m.a + m.c)).max() < 1e-10

    shifted = compute_moments(PcMaps(pc.per_orientation, pc.combined, pc.orientations + math.pi,
                                     pc.noise_threshold))
    for name in ("a", "b", "c"):
        assert np.abs(getattr(shifted, name) - getattr(m, name)).max() < 1e-12


def test_moment_identities_on_image(camera):
    _, pc = pc_of(camera[100:196, 100:196])
    m = compute_moments(pc)
    assert np.all(m.max_moment >= m.min_moment) and m.min_moment.min() >= 0
    assert np.abs(m.max_moment + m.min_moment - (m.a + m.c)).max() < 1e-10
