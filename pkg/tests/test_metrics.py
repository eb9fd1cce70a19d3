import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ngrc_readout.errors import DataError
from ngrc_readout.metrics import (RunResult, assemble_report, cross_fidelity,
                                  cross_fidelity_by_distance, cross_fidelity_matrix, fidelity,
                                  geometric_mean_fidelity, infidelity_reduction, report_rows,
                                  write_report)

fid = st.floats(0, 1)


def test_fidelity_examples():
    y = np.arange(10) % 2
    assert fidelity(y, y) == 1.0
    assert fidelity(1 - y, y) == 0.0
    p = y.copy()
    p[3] ^= 1
    assert fidelity(p, y) == 0.9
    with pytest.raises(ValueError):
        fidelity([], [])


def test_infidelity_reduction_examples():
    assert infidelity_reduction(0.8, 0.8) == 0.0
    assert infidelity_reduction(0.9, 0.95) == 0.5
    assert infidelity_reduction(0.7, 1.0) == 1.0
    with pytest.raises(ValueError):
        infidelity_reduction(1.0, 0.9)


@given(st.floats(0, 0.999), fid)
def test_infidelity_reduction_bounds(a, b):
    eta = infidelity_reduction(a, b)
    assert eta <= 1.0
    assert (eta > 0) == (b > a)


def test_geometric_mean_examples():
    assert geometric_mean_fidelity([0.8] * 5) == pytest.approx(0.8)
    assert abs(geometric_mean_fidelity([0.967, 0.739, 0.931, 0.943, 0.966]) - 0.905) <= 0.0005
    assert geometric_mean_fidelity([0.9, 0.0, 0.8]) == 0.0
    with pytest.raises(ValueError):
        geometric_mean_fidelity([])


@given(st.lists(fid, min_size=1, max_size=8))
def test_geometric_mean_between_extremes(f):
    g = geometric_mean_fidelity(f)
    assert min(f) - 1e-12 <= g <= max(f) + 1e-12


def all_configs(n_qubits, reps):
    return np.tile(np.arange(2 ** n_qubits), reps)


def test_self_cross_fidelity_of_perfect_predictions():
    labels = all_configs(3, 10)
    for j in range(3):
        assert cross_fidelity((labels >> j) & 1, labels, j, 3) == 1.0


def test_cross_fidelity_needs_both_states():
    labels = np.zeros(8, dtype=int)
    with pytest.raises(DataError):
        cross_fidelity(labels, labels, 1, 2)


def test_perfect_independent_qubit_has_zero_cross_fidelity():
    labels = all_configs(2, 50)
    assert cross_fidelity(labels & 1, labels, 1, 2) == 0.0


def test_monte_carlo_small_coupling():
    # prediction for qubit 0 copies the complement of qubit 1 with probability eps;
    # averaging over configurations gives F = -eps exactly in expectation
    rng = np.random.default_rng(7)
    eps = 0.02
    labels = all_configs(2, 100000)
    b0, b1 = labels & 1, (labels >> 1) & 1
    pull = rng.random(labels.size) < eps
    pred = np.where(pull, 1 - b1, b0)
    f = cross_fidelity(pred, labels, 1, 2)
    assert abs(f + eps) < 4 * np.sqrt(eps / 100000)


def test_independent_predictions_bound(rng):
    labels = all_configs(3, 2000)
    pred = rng.integers(0, 2, labels.size)
    n_cond = labels.size // 2
    for k in range(3):
        assert abs(cross_fidelity(pred, labels, k, 3)) <= 4 / np.sqrt(n_cond)


def test_distance_buckets():
    per, overall = cross_fidelity_by_distance(np.zeros((5, 5)))
    assert per == {1: 0, 2: 0, 3: 0, 4: 0} and overall == 0
    d = np.abs(np.subtract.outer(np.arange(5), np.arange(5)))
    assert [int((d == k).sum()) for k in range(1, 5)] == [8, 6, 4, 2]
    m = np.zeros((5, 5))
    m[1, 2] = m[2, 1] = 0.01
    per, _ = cross_fidelity_by_distance(m)
    assert per[1] == pytest.approx(0.0025)
    m = np.eye(5)
    for k, v in zip(range(1, 5), (0.0037, 0.0049, 0.0020, 0.0009)):
        idx = np.where(d == k)
        m[idx] = -v
    per, overall = cross_fidelity_by_distance(m)
    assert overall == pytest.approx(np.mean([0.0037, 0.0049, 0.0020, 0.0009]))
    with pytest.raises(ValueError):
        cross_fidelity_by_distance(np.zeros((1, 1)))


def test_cross_fidelity_matrix_shape():
    labels = all_configs(3, 4)
    preds = np.stack([(labels >> j) & 1 for j in range(3)])
    m = cross_fidelity_matrix(preds, labels, 3)
    np.testing.assert_array_equal(m, np.eye(3))


def test_report_single_model_has_fidelity_only():
    rep = assemble_report([RunResult("quad", [0.9123456789])])
    (entry,) = rep["models"]
    assert entry["fidelity"] == 0.912346
    assert "eta" not in entry and rep["notes"] == []


def test_report_with_baseline_has_eta():
    runs = [RunResult("mf", [0.9], baseline=True), RunResult("quad", [0.95], window=20, alpha=[1e-4])]
    rep = assemble_report(runs)
    assert rep["models"][1]["eta"] == [0.5]
    rep = assemble_report(runs[1:] + [RunResult("lin", [0.93])])
    assert any("eta omitted" in n for n in rep["notes"])


def test_report_multi_qubit_fields(tmp_path):
    cf = np.eye(5) + 0.001
    runs = [RunResult("mf", [0.9] * 5, baseline=True),
            RunResult("quad", [0.95] * 5, 50, [0.0] * 5, {"parameters": 1, "multiplications": 2}, cf)]
    rep = write_report(runs, tmp_path / "r.json", tmp_path / "r.csv", "demo")
    quad = rep["models"][1]
    assert quad["f_gm"] == pytest.approx(0.95)
    assert quad["eta_gm"] == pytest.approx(0.5)
    assert quad["cross_fidelity_mean"] == pytest.approx(0.001)
    assert json.loads((tmp_path / "r.json").read_text())["dataset"] == "demo"
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert len(rows) == 2 and rows[1]["window"] == "50"


def test_csv_has_one_row_per_sweep_point():
    grid = [(w, a, [0.9, 0.91]) for w in (10, 50) for a in (0.0, 1e-3, 1e-1)]
    rows = report_rows([RunResult("quad", [0.9, 0.91], grid=grid), RunResult("mf", [0.8, 0.8])])
    assert len(rows) == 7
    assert rows[0]["qubit_fidelities"] == "0.9;0.91"
