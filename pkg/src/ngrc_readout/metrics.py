"""Readout metrics and report assembly."""

from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import qubit_bits
from .errors import DataError


def fidelity(pred, truth) -> float:
    """Fraction of correct classifications."""
    p = np.asarray(pred)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise ValueError("prediction and truth lengths differ")
    if p.size == 0:
        raise ValueError("fidelity of an empty set is undefined")
    return float(np.count_nonzero(p == t)) / p.size


def infidelity_reduction(f_mf: float, f_ml: float) -> float:
    """Relative drop in error of a model versus the matched-filter baseline.

    Evaluated in exact rational arithmetic on the inputs' shortest decimal
    forms, so decimal inputs such as (0.9, 0.95) give exactly 0.5.
    """
    if f_mf >= 1.0:
        raise ValueError("baseline fidelity is 1; infidelity reduction is undefined")
    if not (math.isfinite(f_mf) and math.isfinite(f_ml)):
        return ((1.0 - f_mf) - (1.0 - f_ml)) / (1.0 - f_mf)
    a, b = Fraction(repr(float(f_mf))), Fraction(repr(float(f_ml)))
    return float(((1 - a) - (1 - b)) / (1 - a))


def geometric_mean_fidelity(fids: Sequence[float]) -> float:
    f = np.asarray(fids, dtype=np.float64)
    if f.size == 0:
        raise ValueError("need at least one fidelity")
    if np.any(f < 0):
        raise ValueError("fidelities must be >= 0")
    if np.any(f == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(f))))


def cross_fidelity(pred_j, labels, k: int, n_qubits: int) -> float:
    """``1 - [P(1_j | 0_k) + P(0_j | 1_k)]`` from predictions for qubit ``j``.

    The conditional frequencies are measured separately for every prepared
    configuration of the other qubits and then averaged with equal weight.
    ``labels`` are packed prepared labels.
    """
    pred = np.asarray(pred_j).astype(np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    bit_k = qubit_bits(labels, k)
    if not (np.any(bit_k == 0) and np.any(bit_k == 1)):
        raise DataError(f"qubit {k} was not prepared in both states")
    rest = labels & ~np.int64(1 << k)
    p10, p01 = [], []
    for r in np.unique(rest):
        grp = rest == r
        g0 = grp & (bit_k == 0)
        g1 = grp & (bit_k == 1)
        if g0.any():
            p10.append(np.mean(pred[g0] == 1))
        if g1.any():
            p01.append(np.mean(pred[g1] == 0))
    return 1.0 - (float(np.mean(p10)) + float(np.mean(p01)))


def cross_fidelity_matrix(preds, labels, n_qubits: int) -> np.ndarray:
    """``M[j, k]`` for predictions ``preds[j]`` of every qubit."""
    out = np.empty((n_qubits, n_qubits))
    for j in range(n_qubits):
        for k in range(n_qubits):
            out[j, k] = cross_fidelity(preds[j], labels, k, n_qubits)
    return out


def cross_fidelity_by_distance(cf_matrix) -> tuple[dict[int, float], float]:
    """Mean ``|F^CF_jk|`` over ordered pairs at each distance ``|j - k|``, and
    the mean of those per-distance means."""
    cf = np.abs(np.asarray(cf_matrix, dtype=np.float64))
    n = cf.shape[0]
    if cf.shape != (n, n) or n < 2:
        raise ValueError("need a square matrix for at least two qubits")
    j, k = np.indices(cf.shape)
    dist = np.abs(j - k)
    per = {d: float(cf[dist == d].mean()) for d in range(1, n)}
    return per, float(np.mean(list(per.values())))


@dataclass
class RunResult:
    """One evaluated discriminator family on one dataset.

    ``grid`` holds rows ``(window, alpha, per-qubit fidelities)`` when a
    sweep was run.
    """

    model: str
    qubit_fidelities: list[float]
    window: int | None = None
    alpha: list[float] | None = None
    complexity: dict | None = None
    cross_fidelity: np.ndarray | None = None
    baseline: bool = False
    grid: list[tuple] = field(default_factory=list)


def _sig(x, digits: int = 6):
    if x is None:
        return None
    if isinstance(x, (list, tuple)):
        return [_sig(v, digits) for v in x]
    if isinstance(x, dict):
        return {str(k): _sig(v, digits) for k, v in x.items()}
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            return None
        return float(f"{float(x):.{digits}g}")
    return x


def assemble_report(runs: Sequence[RunResult], dataset: str = "") -> dict:
    """Collate runs into a JSON-ready dict.

    Infidelity reduction is computed against the run flagged ``baseline``
    (or named ``mf``); when none exists the field is left out and a note
    explains why.
    """
    base = next((r for r in runs if r.baseline), None) or next(
        (r for r in runs if r.model.lower() == "mf"), None)
    notes = []
    models = []
    for r in runs:
        entry = {
            "model": r.model,
            "window": r.window,
            "alpha": r.alpha,
            "qubit_fidelities": r.qubit_fidelities,
            "fidelity": r.qubit_fidelities[0] if len(r.qubit_fidelities) == 1 else None,
        }
        if len(r.qubit_fidelities) > 1:
            entry["f_gm"] = geometric_mean_fidelity(r.qubit_fidelities)
        if base is not None and r is not base:
            try:
                entry["eta"] = [infidelity_reduction(b, f) for b, f in
                                zip(base.qubit_fidelities, r.qubit_fidelities)]
                if len(r.qubit_fidelities) > 1:
                    entry["eta_gm"] = infidelity_reduction(
                        geometric_mean_fidelity(base.qubit_fidelities),
                        geometric_mean_fidelity(r.qubit_fidelities))
            except ValueError as exc:
                notes.append(f"{r.model}: eta omitted ({exc})")
        if r.complexity:
            entry["complexity"] = r.complexity
        if r.cross_fidelity is not None and len(r.qubit_fidelities) > 1:
            per, overall = cross_fidelity_by_distance(r.cross_fidelity)
            entry["cross_fidelity"] = np.asarray(r.cross_fidelity).tolist()
            entry["cross_fidelity_by_distance"] = per
            entry["cross_fidelity_mean"] = overall
        models.append({k: v for k, v in entry.items() if v is not None})
    if base is None and len(runs) > 1:
        notes.append("no matched-filter baseline in this run; eta omitted")
    return _sig({"dataset": dataset, "models": models, "notes": notes})


CSV_FIELDS = ("model", "window", "alpha", "fidelity", "f_gm", "qubit_fidelities")


def report_rows(runs: Sequence[RunResult]) -> list[dict]:
    """One row per (model, window, alpha)."""
    rows = []
    for r in runs:
        entries = r.grid or [(r.window, r.alpha[0] if r.alpha else None, r.qubit_fidelities)]
        for window, alpha, fids in entries:
            rows.append({
                "model": r.model,
                "window": window,
                "alpha": alpha,
                "fidelity": fids[0] if len(fids) == 1 else None,
                "f_gm": geometric_mean_fidelity(fids) if len(fids) > 1 else None,
                "qubit_fidelities": ";".join(f"{f:.6g}" for f in fids),
            })
    return rows


def write_report(runs: Sequence[RunResult], json_path, csv_path=None, dataset: str = "") -> dict:
    report = assemble_report(runs, dataset)
    with open(json_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
            w.writeheader()
            for row in report_rows(runs):
                w.writerow({k: ("" if v is None else (f"{v:.6g}" if isinstance(v, float) else v))
                            for k, v in row.items()})
    return report
