import numpy as np
import pytest
from hypothesis import given, strategies as st

from ngrc_readout.baselines import (MatchedFilterWeights, boxcar_filter, fit_boxcar,
                                    fit_complex_discriminator, fit_matched_filter,
                                    matched_filter_apply, matched_filter_weights)
from ngrc_readout.data import IQTrace
from ngrc_readout.errors import DataError, LengthMismatchError, NumericalError


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def gaussian_classes(rng, m, n=30, sigma=1.0):
    # time-dependent separation so weighting beats a flat sum
    t = np.arange(n)
    mu0 = np.zeros(n, complex)
    mu1 = 0.4 * (1 - np.exp(-t / 5.0)) * np.exp(-t / 40.0) * (1 + 1j)
    y = np.arange(m) % 2
    z = np.where(y[:, None] == 1, mu1, mu0) + sigma / np.sqrt(2) * cplx(rng, m, n)
    return z, y


def test_boxcar_examples(rng):
    assert boxcar_filter(IQTrace(np.ones(4), np.ones(4))) == 4 + 4j
    z = cplx(rng, 12)
    assert boxcar_filter(z, 5, 6) == z[5]
    assert boxcar_filter(z, 2, 9) == pytest.approx(sum(z[2:9]))
    with pytest.raises(ValueError):
        boxcar_filter(z, 3, 3)


def test_matched_filter_apply_examples(rng):
    z = cplx(rng, 7, 25)
    np.testing.assert_array_equal(matched_filter_apply(z, MatchedFilterWeights(np.ones(25))), boxcar_filter(z))
    assert matched_filter_apply(z[0], MatchedFilterWeights(np.zeros(25))) == 0
    k = cplx(rng, 25)
    assert matched_filter_apply(z[3], MatchedFilterWeights(k)) == pytest.approx(sum(a * b for a, b in zip(z[3], k)))
    with pytest.raises(LengthMismatchError):
        matched_filter_apply(z, MatchedFilterWeights(np.ones(24)))


def test_weights_identical_means_are_zero():
    s = np.array([[1 + 1j, 2], [-1 - 1j, 0]])
    w = matched_filter_weights(s, s[::-1])
    np.testing.assert_array_equal(w.k, 0)


def test_weights_match_plug_in_formula(rng):
    n, m, sigma = 6, 4000, 0.7
    mu0, mu1 = 1 + 0.5j, -0.5 + 0j
    s0 = mu0 + sigma * cplx(rng, m, n)
    s1 = mu1 + sigma * cplx(rng, m, n)
    w = matched_filter_weights(s0, s1)
    expect = (mu0 - mu1) / (4 * sigma**2)
    # relative estimator error is dominated by the variance term, ~ 1/sqrt(m)
    assert np.all(np.abs(w.k - expect) < 3 * abs(expect) * 2 / np.sqrt(m) + 3 * sigma / np.sqrt(m) / (2 * sigma**2))


def test_zero_variance_names_the_step():
    s0 = np.array([[0, 1, 2], [0, 2, 3]], complex)
    s1 = np.array([[0, 0, 1], [0, 1, 1]], complex)
    with pytest.raises(NumericalError, match="time step 0"):
        matched_filter_weights(s0, s1)
    with pytest.raises(DataError):
        matched_filter_weights(s0[:1], s1)


def test_weights_save_load(tmp_path, rng):
    w = MatchedFilterWeights(cplx(rng, 9))
    w.save(tmp_path / "w.mfw")
    np.testing.assert_array_equal(MatchedFilterWeights.load(tmp_path / "w.mfw").k, w.k)


def test_separated_clusters_fit_perfectly(rng):
    v = np.concatenate([0.1 * cplx(rng, 50), 5 + 5j + 0.1 * cplx(rng, 50)])
    y = np.repeat([0, 1], 50)
    d = fit_complex_discriminator(v, y)
    assert (d.predict(v) == y).all()


def test_symmetric_threshold_sits_between_means(rng):
    y = np.arange(20000) % 2
    v = np.where(y == 1, 2.0, 0.0) + 0.5 * cplx(rng, y.size)
    d = fit_complex_discriminator(v, y)
    x = d.center + d.threshold * d.axis
    assert abs(x.real - 1.0) < 0.05
    assert abs(d.axis - 1) < 0.02


def test_label_swap_swaps_regions(rng):
    y = np.arange(400) % 2
    v = np.where(y == 1, 1 + 1j, 0) + 0.6 * cplx(rng, y.size)
    a = fit_complex_discriminator(v, y)
    b = fit_complex_discriminator(v, 1 - y)
    probe = 3 * cplx(rng, 1000)
    # a probe value lying exactly on a boundary would break the swap, not expected here
    np.testing.assert_array_equal(a.predict(probe), 1 - b.predict(probe))


def test_degenerate_discriminator_inputs():
    with pytest.raises(DataError):
        fit_complex_discriminator(np.ones(4, complex), np.zeros(4, int))
    with pytest.raises(NumericalError):
        fit_complex_discriminator(np.ones(4, complex), np.array([0, 1, 0, 1]))


@given(st.integers(0, 2**31), st.floats(-5, 5), st.floats(-5, 5))
def test_filters_are_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y, k = cplx(rng, 16), cplx(rng, 16), MatchedFilterWeights(cplx(rng, 16))
    for f in (boxcar_filter, lambda t: matched_filter_apply(t, k)):
        lhs = f(a * x + b * y)
        rhs = a * f(x) + b * f(y)
        assert abs(lhs - rhs) <= 1e-9 * (1 + abs(a) + abs(b)) * 16 * 10


def test_scaling_shots_keeps_predictions(rng):
    z, y = gaussian_classes(rng, 600)
    a = fit_matched_filter(z, y)
    b = fit_matched_filter(7.5 * z, y)
    np.testing.assert_allclose(b.weights.k * 7.5, a.weights.k, rtol=1e-12)
    assert np.mean(a.predict(z) == b.predict(7.5 * z)) > 0.995


def test_matched_filter_beats_boxcar_on_gaussian_noise():
    worse = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        z, y = gaussian_classes(rng, 4000)
        tr, te = slice(0, 2000), slice(2000, None)
        mf = np.mean(fit_matched_filter(z[tr], y[tr]).predict(z[te]) == y[te])
        bc = np.mean(fit_boxcar(z[tr], y[tr]).predict(z[te]) == y[te])
        if mf < bc - 0.002:
            worse += 1
    assert worse <= 1
