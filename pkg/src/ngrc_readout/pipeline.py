"""Train / evaluate orchestration shared by the CLI and the acceptance runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .baselines import FilterDiscriminator, fit_boxcar, fit_matched_filter
from .config import TrainOptions
from .data import Layout, ShotSet, split_train_test
from .errors import ConfigError, LayoutMismatchError
from .features import FeatureSpec, count_complexity
from .metrics import RunResult, cross_fidelity_matrix, fidelity
from .termselect import select_for_shotset
from .trainer import Discriminator, SweepResult, sweep


def qubit_channels(shotset: ShotSet, lpf_len: int | None = None) -> np.ndarray:
    """Per-qubit complex baseband traces ``(M, n_qubits, N)`` for filter baselines.

    Raw multiplexed shots are demodulated with the carriers recorded in the
    metadata.
    """
    nq = shotset.n_qubits
    if shotset.layout is Layout.RAW_MULTIPLEXED:
        if "if_freqs" not in shotset.meta:
            raise LayoutMismatchError("raw multiplexed data carries no if_freqs metadata")
        freqs = [float(f) for f in shotset.meta["if_freqs"].split(",")]
        if len(freqs) != nq:
            raise LayoutMismatchError(f"{len(freqs)} if_freqs for {nq} qubits")
        lpf = lpf_len or int(shotset.meta.get("lpf_len", dsp.DEFAULT_LPF_LEN))
        return np.stack([dsp.demodulate(shotset.iq[:, 0, :], f, lpf) for f in freqs], axis=1)
    return shotset.iq


def _baseline_ends(shotset: ShotSet, spec: FeatureSpec | None) -> list[int]:
    """Per-qubit integration ends: the spec's boxcar masks when they fit, else the full trace."""
    if spec is not None and spec.masks is not None and len(spec.masks) == shotset.n_qubits:
        return list(spec.masks)
    return [shotset.n_samples] * shotset.n_qubits


def fit_baselines(train: ShotSet, kind: str = "mf", spec: FeatureSpec | None = None) -> list[FilterDiscriminator]:
    """One filter discriminator per qubit (binary classes only).

    A masked channel is integrated over ``[0, end)`` only, which is what
    zeroing its tail would do, without the zero-variance steps.
    """
    if train.n_classes != 2:
        raise ValueError("filter baselines discriminate two classes")
    chans = qubit_channels(train, spec.lpf_len if spec is not None else None)
    ends = _baseline_ends(train, spec)
    fit = fit_matched_filter if kind == "mf" else fit_boxcar
    return [fit(chans[:, j, :ends[j]], train.qubit_labels(j)) for j in range(train.n_qubits)]


def baseline_predictions(filters, shotset: ShotSet, spec: FeatureSpec | None = None) -> np.ndarray:
    chans = qubit_channels(shotset, spec.lpf_len if spec is not None else None)
    ends = _baseline_ends(shotset, spec)
    return np.stack([f.predict(chans[:, j, :ends[j]]) for j, f in enumerate(filters)])


@dataclass
class TrainOutcome:
    sweep: SweepResult
    spec: FeatureSpec
    train: ShotSet
    test: ShotSet

    @property
    def models(self) -> list[Discriminator]:
        return self.sweep.models


def train_models(data: ShotSet, spec: FeatureSpec, opts: TrainOptions, seed: int) -> TrainOutcome:
    """Split, optionally prune terms on the training half, and sweep alpha.

    Term selection needs a single shared feature vector, so it runs on the
    first target (or the class one-hot block for multi-class data).
    """
    train, test = split_train_test(data, opts.split, seed)
    if opts.select_terms:
        if not spec.is_shared() and data.n_qubits > 1:
            raise ConfigError("term selection needs one shared feature vector (cross_qubit = true)")
        spec, _ = select_for_shotset(train, spec, max_terms=opts.max_terms)
    result = sweep(train, test, spec, opts.alphas, batch_size=opts.batch_size)
    return TrainOutcome(result, spec, train, test)


def model_predictions(models, shotset: ShotSet) -> np.ndarray:
    """``(n_models, M)`` class predictions, one row per target."""
    return np.stack([m.classify(shotset) for m in models])


def truths(shotset: ShotSet) -> np.ndarray:
    return np.stack([shotset.qubit_labels(j) for j in range(shotset.n_qubits)])


def run_result(name: str, preds: np.ndarray, shotset: ShotSet, models=None,
               baseline: bool = False) -> RunResult:
    """Score predictions and attach complexity and cross-fidelity where they apply."""
    fids = [fidelity(p, t) for p, t in zip(preds, truths(shotset))]
    cf = cross_fidelity_matrix(preds, shotset.labels, shotset.n_qubits) if shotset.n_qubits > 1 else None
    window = alpha = complexity = None
    if models:
        spec = models[0].spec
        window = spec.window
        alpha = [m.alpha for m in models]
        c = count_complexity(spec, len(models))
        complexity = {"parameters": c.parameters, "multiplications": c.multiplications}
    return RunResult(name, fids, window, alpha, complexity, cf, baseline)
