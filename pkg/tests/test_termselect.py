import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ngrc_readout.data import ShotSet
from ngrc_readout.errors import ConfigError
from ngrc_readout.features import FeatureSpec, count_complexity, feature_matrix
from ngrc_readout.termselect import (information_value, reduced_spec, select_for_shotset,
                                     select_terms, truncate_terms)


def test_exact_column_is_picked_first(rng):
    x = rng.standard_normal((8, 200))
    sel = select_terms(x, x[5], 3)
    assert sel.indices[0] == 5
    assert sel.objective[0] == pytest.approx(0.0, abs=1e-18)


def test_scaled_column_with_tiny_noise(rng):
    x = rng.standard_normal((10, 300))
    y = 2 * x[3] + 1e-9 * rng.standard_normal(300)
    # brute force: best single-term least-squares fit
    rss = [np.sum((y - (x[k] @ y) / (x[k] @ x[k]) * x[k]) ** 2) for k in range(10)]
    assert select_terms(x, y, 1).indices[0] == int(np.argmin(rss)) == 3


def test_orthonormal_library_sorts_by_correlation(rng):
    q, _ = np.linalg.qr(rng.standard_normal((100, 12)))
    y = rng.standard_normal(100)
    sel = select_terms(q.T, y, 12)
    expect = np.argsort(-np.abs(q.T @ y), kind="stable")
    assert list(sel.indices) == list(expect)


@given(st.integers(0, 2**31), st.floats(0, 10))
def test_residual_never_increases(seed, lam):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((9, 60))
    y = rng.standard_normal(60)
    obj = select_terms(x, y, 9, lam).objective
    assert all(b <= a + 1e-9 for a, b in zip(obj, obj[1:]))
    assert obj[0] <= np.sum(y * y) + 1e-9


@given(st.integers(0, 2**31))
def test_permuting_the_library_permutes_the_choice(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((7, 50))
    y = x[2] - 0.5 * x[6] + 0.3 * rng.standard_normal(50)
    perm = rng.permutation(7)
    a = select_terms(x, y, 4).indices
    b = select_terms(x[perm], y, 4).indices
    assert [int(perm[i]) for i in b] == list(a)


def test_reduced_model_fits_no_better(rng):
    x = rng.standard_normal((10, 80))
    y = rng.standard_normal(80)
    sel = select_terms(x, y, 4)
    sub = x[list(sel.indices)]
    rss_sub = np.sum((y - np.linalg.lstsq(sub.T, y, rcond=None)[0] @ sub) ** 2)
    rss_full = np.sum((y - np.linalg.lstsq(x.T, y, rcond=None)[0] @ x) ** 2)
    assert rss_sub >= rss_full - 1e-9
    # without shrinkage the greedy objective is the least-squares residual of the chosen set
    assert sel.objective[-1] == pytest.approx(rss_sub, rel=1e-9)


def test_select_terms_errors(rng):
    x = rng.standard_normal((3, 10))
    with pytest.raises(ValueError):
        select_terms(x, x[0], 0)
    with pytest.raises(ValueError):
        select_terms(x, x[0], 4)


def test_information_value_formula():
    assert information_value(50.0, 100, 3) == pytest.approx(100 * np.log(0.5) + 6)


def test_truncation_examples():
    assert truncate_terms([10, 5, 4.99, 4.98]) == 2
    assert truncate_terms([100, 60, 30, 10]) == 4
    assert truncate_terms([3, 3, 3]) == 1
    assert truncate_terms([100, 60, 30, 10, 5, 4.5, 4.2, 4.1]) == 5
    with pytest.raises(ValueError):
        truncate_terms([1.0])


def test_reduced_spec_counts():
    spec = FeatureSpec(2, 1, 3, 1)
    full = spec.n_features()
    assert reduced_spec(spec, range(full)).n_features() == full
    r = reduced_spec(spec, [0, 2, 9])
    assert r.term_subset == (0, 2, 9)
    # indices are relative to an already-reduced spec
    assert reduced_spec(r, [2]).term_subset == (9,)
    with pytest.raises(ConfigError):
        reduced_spec(spec, [full])
    with pytest.raises(ConfigError):
        reduced_spec(spec, [1, 1])


def test_reduced_complexity_from_selection():
    raw = FeatureSpec(3, 1, 3, 1, layout="raw_multiplexed")
    assert count_complexity(reduced_spec(raw, [0, 1])).multiplications == 2
    plan = raw.plan()
    k = plan.retained.index((0, 1, 2))
    c = count_complexity(reduced_spec(raw, [k]))
    assert c.product_multiplications == 2


def test_selection_on_a_shotset_recovers_a_planted_term(rng):
    m, n = 2000, 3
    iq = rng.standard_normal((m, 1, n)) + 1j * rng.standard_normal((m, 1, n))
    # the class is decided by the product I0 * Q1
    labels = (iq[:, 0, 0].real * iq[:, 0, 1].imag > 0).astype(int)
    data = ShotSet(iq, labels, 1, 2)
    spec = FeatureSpec(2, 1, n, 1)
    red, sel = select_for_shotset(data, spec, max_terms=10)
    plan = spec.plan()
    assert plan.describe(sel.indices[0]) in ((), (0, 3)) or plan.describe(sel.indices[1]) == (0, 3)
    assert red.n_features() <= 10
    f = feature_matrix(data, red)
    assert f.shape == (m, red.n_features())
