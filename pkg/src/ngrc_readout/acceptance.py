"""Desk-scale acceptance suite.

Each criterion is a named check that returns pass/fail plus a one-line
detail. ``run_suite`` executes them in order; the CLI's ``repro`` command
and ``tests/test_acceptance.py`` both go through it.
"""

from __future__ import annotations

import io
import json
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import trainer
from .baselines import (MatchedFilterWeights, boxcar_filter, matched_filter_apply,
                        matched_filter_weights)
from .config import FEATURE_PRESETS, SIM_PRESETS, TABLE_PRESETS, TrainOptions, feature_spec, sim_config
from .data import philox, split_train_test
from .features import FeatureSpec, count_complexity, enumerate_monomials
from .io import shotset_from_bytes, shotset_to_bytes
from .metrics import (assemble_report, cross_fidelity_by_distance, cross_fidelity_matrix,
                      geometric_mean_fidelity, infidelity_reduction)
from .pipeline import baseline_predictions, fit_baselines, model_predictions, run_result, train_models
from .sim import QubitSimParams, generate_dataset, mean_trajectory
from .termselect import select_terms, truncate_terms
from .trainer import ridge_fit, seq_init, seq_solve, seq_update, sweep

N_TRIALS = 10
MIN_TRIAL_PASSES = 8

REFERENCE_COUNTS = {
    "5q-linear-nodemod": (5005, 5005),
    "5q-linear-w10": (2075, 10299),
    "5q-quadratic-w50": (18275, 30069),
    "5q-cubic-w200": (18270, 30121),
}
# printed values in units of 1e4, for the rows that appear rounded
COUNTS_PRINTED = {
    "5q-linear-w10": (None, 1.03),
    "5q-quadratic-w50": (1.83, 3.01),
    "5q-cubic-w200": (1.83, 3.01),
}


@dataclass
class Outcome:
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass(frozen=True)
class Criterion:
    id: str
    title: str
    run: Callable[[int], Outcome]


def _sig3(x: int) -> float:
    return float(f"{x / 1e4:.3g}")


def check_protocol(_trials: int = N_TRIALS) -> Outcome:
    """The fixed protocol constants the other criteria rely on."""
    grid = np.asarray(trainer.THRESHOLD_GRID, dtype=np.float64)
    problems = []
    if grid.shape != (101,) or not np.allclose(grid, np.arange(101) / 100, atol=1e-12, rtol=0):
        problems.append("threshold grid is not 0.00..1.00 in steps of 0.01")
    single = trainer.alpha_grid("single")
    multi = trainer.alpha_grid("multi")
    if single[0] != 0 or not math.isclose(single[1], 1e-7) or not math.isclose(single[-1], 1e-1):
        problems.append("single-qubit alpha grid is not {0, 1e-7 .. 1e-1}")
    if multi[0] != 0 or not math.isclose(multi[1], 1e-7) or not math.isclose(multi[-1], 1e3):
        problems.append("multi-qubit alpha grid is not {0, 1e-7 .. 1e3}")
    if problems:
        return Outcome(False, "; ".join(problems))
    return Outcome(True, f"threshold grid 101 points, alpha grids {single.size}/{multi.size} values")


def check_complexity(_trials: int = N_TRIALS) -> Outcome:
    t0 = time.perf_counter()
    parts, ok = [], True
    for name in TABLE_PRESETS:
        spec, n_models = feature_spec(FEATURE_PRESETS[name])
        c = count_complexity(spec, n_models or 1)
        want = REFERENCE_COUNTS[name]
        good = (c.parameters, c.multiplications) == want
        printed = COUNTS_PRINTED.get(name)
        if printed:
            if printed[0] is not None and _sig3(c.parameters) != printed[0]:
                good = False
            if _sig3(c.multiplications) != printed[1]:
                good = False
        ok &= good
        parts.append(f"{name} {c.parameters}/{c.multiplications}")
    dt = time.perf_counter() - t0
    ok &= dt < 1.0
    return Outcome(ok, ", ".join(parts) + f" in {dt:.3f} s")


def check_sequential_ridge(_trials: int = N_TRIALS, n_problems: int = 20) -> Outcome:
    t0 = time.perf_counter()
    rng = philox(2024, 2)
    alphas = [0.0] + list(np.logspace(-7, 3, 11))
    worst = 0.0
    for p in range(n_problems):
        n_f = int(rng.integers(5, 201))
        m = int(rng.integers(n_f + 20, 5001))
        d = int(rng.integers(1, 4))
        alpha = float(alphas[rng.integers(len(alphas))])
        n_batches = 15 if p % 3 == 0 else int(rng.integers(1, 40))
        o = rng.standard_normal((n_f, m)) * rng.uniform(0.1, 10)
        y = rng.standard_normal((d, m))
        cuts = np.sort(rng.choice(np.arange(1, m), size=n_batches - 1, replace=False))
        acc = seq_init(alpha, n_f, d)
        for sel in np.split(np.arange(m), cuts):
            acc = seq_update(acc, o[:, sel], y[:, sel])
        w_seq = seq_solve(acc)
        w_cf = ridge_fit(o, y, alpha)
        err = np.linalg.norm(w_seq - w_cf) / np.linalg.norm(w_cf)
        worst = max(worst, err)
    dt = time.perf_counter() - t0
    return Outcome(worst <= 1e-8 and dt < 30, f"max relative error {worst:.2e} over {n_problems} problems in {dt:.1f} s")


def check_filters(trials: int = N_TRIALS) -> Outcome:
    t0 = time.perf_counter()
    exact = True
    zs_worst = 0.0
    chi_worst = 0.0
    for seed in range(trials):
        rng = philox(seed, 3)
        z = rng.standard_normal((50, 120)) + 1j * rng.standard_normal((50, 120))
        unit = MatchedFilterWeights(np.ones(120))
        exact &= bool(np.array_equal(matched_filter_apply(z, unit), boxcar_filter(z)))

        # Gaussian shots around known trajectories; compare the weight estimate
        # with the population formula, step by step
        m0, m1, n, sigma = 3000, 2500, 100, 1.5
        params = QubitSimParams(state_means=(1.0, -1.0), kappa=0.05)
        mu0 = mean_trajectory(params, 0, n)
        mu1 = mean_trajectory(params, 1, n)
        s0 = mu0 + sigma * (rng.standard_normal((m0, n)) + 1j * rng.standard_normal((m0, n)))
        s1 = mu1 + sigma * (rng.standard_normal((m1, n)) + 1j * rng.standard_normal((m1, n)))
        k_hat = matched_filter_weights(s0, s1).k
        den = 2 * sigma**2 * ((m0 - 1) / m0 + (m1 - 1) / m1)
        k = (mu0 - mu1) / den
        var_num = sigma**2 / m0 + sigma**2 / m1
        var_den = 4 * sigma**4 * ((m0 - 1) / m0**2 + (m1 - 1) / m1**2)
        se_re = np.sqrt(var_num / den**2 + k.real**2 * var_den / den**2)
        se_im = np.sqrt(var_num / den**2 + k.imag**2 * var_den / den**2)
        zs = np.concatenate([(k_hat.real - k.real) / se_re, (k_hat.imag - k.imag) / se_im])
        # mean standardized error, and the spread of the standardized errors
        z_mean = abs(zs.mean()) * math.sqrt(zs.size)
        chi = abs(np.mean(zs**2) - 1) / math.sqrt(2 / zs.size)
        zs_worst = max(zs_worst, z_mean)
        chi_worst = max(chi_worst, chi)
    dt = time.perf_counter() - t0
    ok = exact and zs_worst <= 3 and chi_worst <= 3 and dt < 10
    return Outcome(ok, f"unit weights == boxcar: {exact}; worst mean z {zs_worst:.2f}, "
                       f"worst spread z {chi_worst:.2f} (limit 3) in {dt:.1f} s")


def check_metrics(_trials: int = N_TRIALS) -> Outcome:
    gm = geometric_mean_fidelity([0.967, 0.739, 0.931, 0.943, 0.966])
    eta = infidelity_reduction(0.9, 0.95)
    # one matrix whose per-distance means are a reference cross-fidelity row
    cf = np.zeros((5, 5))
    target = {1: 0.0037, 2: 0.0049, 3: 0.0020, 4: 0.0009}
    for j in range(5):
        for k in range(5):
            if j != k:
                cf[j, k] = target[abs(j - k)]
    per, overall = cross_fidelity_by_distance(cf)
    ok = abs(gm - 0.905) <= 0.0005 and eta == 0.5 and abs(overall - 0.0029) <= 0.00005
    return Outcome(ok, f"F_GM {gm:.5f}, eta {eta!r}, bucket-mean overall {overall:.5f}")


def _trial_data(preset: str, seed: int, **overrides):
    cfg = sim_config({**SIM_PRESETS[preset], **overrides})
    data = generate_dataset(cfg, seed)
    return split_train_test(data, 0.5, seed)


def _ngrc_fidelity(train, test, degree: int, window: int) -> float:
    spec = FeatureSpec(degree, window, train.n_samples, 1, count_demod=False)
    return sweep(train, test, spec).test_fidelity[0]


def _mf_fidelity(train, test, kind: str = "mf") -> float:
    filters = fit_baselines(train, kind)
    return float(np.mean(baseline_predictions(filters, test)[0] == test.labels))


def _tally(passes, trials, label):
    return f"{label} {sum(passes)}/{trials}"


def check_gaussian_mf(trials: int = N_TRIALS) -> Outcome:
    t0 = time.perf_counter()
    passes, gaps = [], []
    for seed in range(trials):
        train, test = _trial_data("1q-gaussian", 5100 + seed)
        mf = _mf_fidelity(train, test, "mf")
        box = _mf_fidelity(train, test, "boxcar")
        passes.append(mf >= box - 0.002)
        gaps.append(mf - box)
    dt = time.perf_counter() - t0
    return Outcome(sum(passes) >= MIN_TRIAL_PASSES,
                   _tally(passes, trials, "MF >= boxcar - 0.002:")
                   + f"; mean MF - boxcar {np.mean(gaps):+.4f} in {dt:.0f} s")


def check_relaxation(trials: int = N_TRIALS) -> Outcome:
    t0 = time.perf_counter()
    lin_mf, quad_lin, d1, d2 = [], [], [], []
    for seed in range(trials):
        train, test = _trial_data("1q-relaxation", 5200 + seed)
        mf = _mf_fidelity(train, test)
        lin = max(_ngrc_fidelity(train, test, 1, w) for w in (1, 10))
        quad = max(_ngrc_fidelity(train, test, 2, w) for w in (10, 20))
        lin_mf.append(lin >= mf)
        quad_lin.append(quad >= lin - 0.002)
        d1.append(lin - mf)
        d2.append(quad - lin)
    dt = time.perf_counter() - t0
    ok = sum(lin_mf) >= MIN_TRIAL_PASSES and sum(quad_lin) >= MIN_TRIAL_PASSES
    return Outcome(ok, _tally(lin_mf, trials, "linear >= MF:") + ", "
                   + _tally(quad_lin, trials, "quadratic >= linear - 0.002:")
                   + f"; mean gaps {np.mean(d1):+.4f}, {np.mean(d2):+.4f} in {dt:.0f} s")


def check_three_class(trials: int = N_TRIALS) -> Outcome:
    t0 = time.perf_counter()
    passes, gaps = [], []
    for seed in range(trials):
        train, test = _trial_data("1q-3state", 5300 + seed)
        lin = max(_ngrc_fidelity(train, test, 1, w) for w in (1, 10, 25, 50))
        quad = max(_ngrc_fidelity(train, test, 2, w) for w in (25, 50))
        passes.append(quad - lin >= 0.005)
        gaps.append(quad - lin)
    dt = time.perf_counter() - t0
    return Outcome(sum(passes) >= MIN_TRIAL_PASSES,
                   _tally(passes, trials, "quadratic - best linear >= 0.005:")
                   + f"; mean gap {np.mean(gaps):+.4f} in {dt:.0f} s")


def check_crosstalk(trials: int = N_TRIALS) -> Outcome:
    passes, ratios, longest = [], [], 0.0
    cross, _ = feature_spec(FEATURE_PRESETS["5q-quadratic-w100"])
    own, _ = feature_spec(FEATURE_PRESETS["5q-quadratic-w100-own"])
    for seed in range(trials):
        t0 = time.perf_counter()
        train, test = _trial_data("5q-coupled", 5400 + seed)
        cf = []
        for spec in (cross, own):
            r = sweep(train, test, spec)
            _, overall = cross_fidelity_by_distance(
                cross_fidelity_matrix(r.test_predictions, test.labels, test.n_qubits))
            cf.append(overall)
        ratio = cf[0] / cf[1] if cf[1] > 0 else math.inf
        longest = max(longest, time.perf_counter() - t0)
        ratios.append(ratio)
        passes.append(ratio <= 0.5)
    ok = sum(passes) >= MIN_TRIAL_PASSES and longest <= 180
    return Outcome(ok, _tally(passes, trials, "cross/own mean |F_CF| <= 0.5:")
                   + f"; median ratio {np.median(ratios):.3f}, slowest run {longest:.0f} s")


def _library(rng, m: int):
    """30 monomials (degree <= 3) of four uniform variables, constant excluded."""
    x = rng.uniform(-1, 1, size=(4, m))
    terms = ([(i,) for i in range(4)] + enumerate_monomials(4, 3))[:30]
    return np.stack([np.prod(x[list(t)], axis=0) for t in terms])


def check_term_selection(trials: int = N_TRIALS) -> Outcome:
    hits = []
    for seed in range(trials):
        rng = philox(seed, 6)
        lib = _library(rng, 400)
        planted = rng.choice(30, size=3, replace=False)
        coef = rng.uniform(0.5, 1.5, 3) * rng.choice([-1, 1], 3)
        y = coef @ lib[planted] + 0.01 * rng.standard_normal(lib.shape[1])
        sel = select_terms(lib, y, max_terms=5)
        hits.append(set(planted.tolist()) <= set(sel.indices))
    seq = [100.0, 60.0, 30.0, 10.0, 5.0, 4.5, 4.2, 4.1]
    n = truncate_terms(seq)
    flat = truncate_terms([10.0, 8.0, 6.0, 4.0, 2.0])
    ok = sum(hits) >= 9 and n == 5 and flat == 5
    return Outcome(ok, f"planted set in first 5 picks {sum(hits)}/{trials}; "
                       f"truncation {n} (expect 5), no-plateau {flat} (expect 5)")


def _pipeline_bytes(seed: int) -> list[bytes]:
    cfg = sim_config({**SIM_PRESETS["5q-coupled"], "shots_per_config": "20"})
    data = generate_dataset(cfg, seed)
    spec, _ = feature_spec(FEATURE_PRESETS["5q-quadratic-w50"])
    out = train_models(data, spec, TrainOptions(), seed)
    filters = fit_baselines(out.train, "mf", spec)
    runs = [run_result("mf", baseline_predictions(filters, out.test, spec), out.test, baseline=True),
            run_result("ngrc", model_predictions(out.models, out.test), out.test, out.models)]
    report = json.dumps(assemble_report(runs), sort_keys=True).encode()
    return [shotset_to_bytes(data)] + [m.to_bytes() for m in out.models] + [report]


def check_roundtrip(_trials: int = N_TRIALS) -> Outcome:
    roundtrip = True
    for preset, spc in (("1q-3state", "5"), ("5q-coupled", "2")):
        data = generate_dataset(sim_config({**SIM_PRESETS[preset], "shots_per_config": spc}), 11)
        back = shotset_from_bytes(shotset_to_bytes(data))
        roundtrip &= back.same_as(data) and shotset_to_bytes(back) == shotset_to_bytes(data)
    first = _pipeline_bytes(77)
    second = _pipeline_bytes(77)
    same = first == second
    return Outcome(roundtrip and same, f"binary round trip {roundtrip}; "
                                      f"two pipeline runs byte-identical {same} ({len(first)} artifacts)")


CRITERIA: tuple[Criterion, ...] = (
    Criterion("0-protocol", "protocol constants (threshold and alpha grids)", check_protocol),
    Criterion("1-complexity", "complexity table counts", check_complexity),
    Criterion("2-sequential-ridge", "sequential ridge equals closed form", check_sequential_ridge),
    Criterion("3-filters", "boxcar / matched-filter identities", check_filters),
    Criterion("4-metrics", "metric formulas", check_metrics),
    Criterion("5a-gaussian-mf", "Gaussian set: matched filter vs boxcar", check_gaussian_mf),
    Criterion("5b-relaxation", "relaxation set: linear vs MF, quadratic vs linear", check_relaxation),
    Criterion("5c-three-class", "three-class set: quadratic beats linear", check_three_class),
    Criterion("5d-crosstalk", "5-qubit set: cross-qubit features halve cross-fidelity", check_crosstalk),
    Criterion("6-term-selection", "term selection and truncation", check_term_selection),
    Criterion("7-roundtrip", "binary round trip and pipeline determinism", check_roundtrip),
)


def criterion_ids() -> list[str]:
    return [c.id for c in CRITERIA]


def run_criterion(c: Criterion, trials: int = N_TRIALS) -> Outcome:
    t0 = time.perf_counter()
    try:
        out = c.run(trials)
    except Exception as exc:  # a crash is a failed criterion, reported by name
        out = Outcome(False, f"raised {type(exc).__name__}: {exc}")
    out.seconds = time.perf_counter() - t0
    return out


def format_line(c: Criterion, out: Outcome) -> str:
    return f"{'PASS' if out.passed else 'FAIL'} {c.id}: {out.detail}"


def run_suite(ids=None, trials: int = N_TRIALS, stream: io.TextIOBase | None = None) -> list[tuple[Criterion, Outcome]]:
    chosen = [c for c in CRITERIA if ids is None or c.id in ids]
    unknown = set(ids or ()) - {c.id for c in CRITERIA}
    if unknown:
        raise KeyError(f"unknown criteria: {', '.join(sorted(unknown))}")
    results = []
    for c in chosen:
        out = run_criterion(c, trials)
        results.append((c, out))
        if stream is not None:
            print(format_line(c, out), file=stream, flush=True)
    return results
