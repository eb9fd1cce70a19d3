import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ngrc_readout.data import Layout, bits_to_label, philox
from ngrc_readout.dsp import demodulate, moving_average
from ngrc_readout.sim import (CrosstalkModel, QubitSimParams, SimConfig, draw_jump,
                              generate_dataset, mean_trajectory, multiplexed_trace,
                              simulate_multiplexed, simulate_shot)


def test_noiseless_shot_equals_mean_trajectory():
    p = QubitSimParams(noise_sigma=0.0)
    shot = simulate_shot(p, 0, rng_seed=3, n_samples=100)
    np.testing.assert_array_equal(shot.channels[0].z, mean_trajectory(p, 0, 100))


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_noiseless_relaxation_is_piecewise(seed):
    p = QubitSimParams(noise_sigma=0.0, t1_steps=40.0)
    n = 120
    jump, final = draw_jump(p, 1, n, philox(seed, 0))
    want = mean_trajectory(p, 1, n)
    if jump < n:
        assert final == 0
        want[jump:] = mean_trajectory(p, 0, n)[jump:]
    np.testing.assert_array_equal(simulate_shot(p, 1, seed, n).channels[0].z, want)


def test_relaxation_fraction_matches_exponential_law():
    t1, n, shots = 300.0, 200, 100_000
    p = QubitSimParams(t1_steps=t1)
    rng = philox(42, 0)
    jumped = sum(draw_jump(p, 1, n, rng)[0] < n for _ in range(shots))
    want = 1 - math.exp(-n / t1)
    sd = math.sqrt(want * (1 - want) / shots)
    assert abs(jumped / shots - want) <= 3 * sd


def test_ground_state_never_relaxes():
    p = QubitSimParams(t1_steps=1.0)
    assert draw_jump(p, 0, 50, philox(0)) == (50, 0)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        QubitSimParams(noise_sigma=-1)
    with pytest.raises(ValueError):
        QubitSimParams(kappa=0)
    with pytest.raises(ValueError):
        QubitSimParams(if_freq=0.5)
    with pytest.raises(ValueError):
        simulate_shot(QubitSimParams(), 2, 0)
    with pytest.raises(ValueError):
        CrosstalkModel(np.array([[1.0, 0.1], [0.1, 0.9]]))


def test_single_tone_multiplexed_matches_low_passed_baseband():
    p = QubitSimParams(noise_sigma=0.0, if_freq=0.2, state_means=(1 + 1j, -1))
    raw = simulate_multiplexed([p], CrosstalkModel.identity(1), "1", 80, rng_seed=5)
    base = mean_trajectory(p, 1, 80)
    np.testing.assert_allclose(demodulate(raw.channels[0].z, 0.2, 4), moving_average(base, 4), atol=1e-12)


def test_zero_crosstalk_channels_independent():
    freqs = [0.05, 0.15, 0.25]
    params = [QubitSimParams(noise_sigma=0.0, if_freq=f) for f in freqs]
    ident = CrosstalkModel.identity(3)
    a = multiplexed_trace(params, ident, "000", 400, philox(0))
    b = multiplexed_trace(params, ident, "011", 400, philox(0))
    da = demodulate(a, 0.05, 10)
    db = demodulate(b, 0.05, 10)
    # the length-10 average nulls the other tones once their envelopes settle
    np.testing.assert_allclose(da[300:], db[300:], atol=1e-5)


def test_coupling_shifts_neighbour_channel_mean():
    freqs = [0.05, 0.15, 0.25, 0.35, 0.45]
    params = [QubitSimParams(noise_sigma=1.0, if_freq=f) for f in freqs]
    c = np.eye(5)
    c[0, 1] = 0.1
    xt = CrosstalkModel(c)
    shots = 1000
    n = 200
    expected = 0.1 * (mean_trajectory(params[1], 1, n) - mean_trajectory(params[1], 0, n))[-50:].mean()
    offsets = []
    for seed in (1, 2):
        means = []
        for bits in ("00000", "01000"):
            rows = [multiplexed_trace(params, xt, bits, n, philox(seed, bits_to_label(bits), m))
                    for m in range(shots)]
            means.append(demodulate(np.array(rows), freqs[0], 10)[:, -50:].mean())
        offsets.append(means[1] - means[0])
    for off in offsets:
        # raw noise std sqrt(5), averaged over 50 correlated samples and 1000 shots
        assert abs(off - expected) < 0.05
        assert abs(off) > 0.1
    assert abs(offsets[0] - offsets[1]) < 0.07


def test_duplicate_frequencies_rejected():
    p = [QubitSimParams(if_freq=0.1), QubitSimParams(if_freq=0.1)]
    with pytest.raises(ValueError):
        multiplexed_trace(p, CrosstalkModel.identity(2), "00", 10, philox(0))
    with pytest.raises(ValueError):
        SimConfig(tuple(p), task="multiplexed")


def test_dataset_shapes():
    s = generate_dataset(SimConfig((QubitSimParams(),), n_samples=20, shots_per_config=100), 0)
    assert s.n_shots == 200 and np.bincount(s.labels).tolist() == [100, 100]
    assert s.layout is Layout.PER_QUBIT_DEMODULATED
    freqs = [0.05, 0.15, 0.25, 0.35, 0.45]
    cfg = SimConfig(tuple(QubitSimParams(if_freq=f) for f in freqs), task="multiplexed",
                    n_samples=16, shots_per_config=50)
    m = generate_dataset(cfg, 0)
    assert m.n_shots == 1600 and np.all(np.bincount(m.labels) == 50)
    assert m.layout is Layout.RAW_MULTIPLEXED and m.meta["if_freqs"].count(",") == 4


def test_excitation_populates_third_class():
    means = (1 + 0j, 1j, -1 + 0j)
    p = QubitSimParams(state_means=means, noise_sigma=0.0, excitation_prob_per_step=0.002)
    s = generate_dataset(SimConfig((p,), n_samples=100, shots_per_config=400), 3)
    last = s.iq[s.labels == 1, 0, -1]
    end2 = mean_trajectory(p, 2, 100)[-1]
    assert np.sum(np.isclose(last, end2)) > 0


def test_dataset_determinism():
    cfg = SimConfig((QubitSimParams(noise_sigma=1.0, t1_steps=30),), n_samples=30, shots_per_config=20)
    assert generate_dataset(cfg, 9) == generate_dataset(cfg, 9)
    assert not generate_dataset(cfg, 9).same_as(generate_dataset(cfg, 10))


def test_ensemble_mean_converges():
    sigma, m, n = 2.0, 4000, 60
    p = QubitSimParams(noise_sigma=sigma)
    s = generate_dataset(SimConfig((p,), n_samples=n, shots_per_config=m), 1)
    for c in (0, 1):
        err = np.abs(s.iq[s.labels == c, 0].mean(axis=0) - mean_trajectory(p, c, n))
        assert np.all(err <= 5 * sigma / math.sqrt(m))


def test_student_t_noise_has_requested_std():
    p = QubitSimParams(noise_sigma=2.0, noise_kind="student_t", student_nu=6)
    s = generate_dataset(SimConfig((p,), n_samples=50, shots_per_config=2000), 0)
    resid = s.iq[s.labels == 0, 0] - mean_trajectory(p, 0, 50)
    assert resid.real.std() == pytest.approx(2.0, rel=0.05)


@given(st.integers(0, 2**40), st.integers(0, 1))
def test_shot_regenerates_from_its_stream(seed, cls):
    p = QubitSimParams(noise_sigma=1.0, t1_steps=20)
    cfg = SimConfig((p,), n_samples=12, shots_per_config=2)
    s = generate_dataset(cfg, seed)
    m = 2 * cls + 1
    again = simulate_shot(p, cls, seed, 12, shot_index=m)
    np.testing.assert_array_equal(again.channels[0].z, s.iq[m, 0])
