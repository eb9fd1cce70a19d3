"""Ridge-regression readout training.

Matrices follow the column convention: features are ``N_f x M`` (one
column per shot), targets ``d x M`` and weights ``d x N_f``, so
``W = Y O^T (O O^T + alpha I)^-1``. The sequential form accumulates
``Q = sum Y_l O_l^T`` and ``P = alpha I + sum O_l O_l^T`` batch by batch and
solves ``W = Q P^-1`` whenever needed.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .data import ShotSet
from .errors import DataError, LengthMismatchError, SingularSystemError
from .features import FeatureSpec, iter_feature_batches
from .io import read_record, write_record

THRESHOLD_GRID = np.round(np.arange(101) * 0.01, 2)
DISC_TAG = b"DISC"


def alpha_grid(kind: str = "single", per_decade: int = 2) -> np.ndarray:
    """``[0, 1e-7, ..., 1e-1]`` for single-qubit sets, up to ``1e3`` for multi-qubit sets."""
    top = {"single": -1, "multi": 3}[kind]
    n = (top + 7) * per_decade + 1
    return np.concatenate([[0.0], np.logspace(-7, top, n)])


def solve_spd(p: np.ndarray, rhs: np.ndarray, allow_pinv: bool = False) -> np.ndarray:
    """Solve ``p x = rhs`` for symmetric positive (semi)definite ``p``.

    Uses a Cholesky-based solve. Ill-conditioned or singular systems raise
    :class:`SingularSystemError` unless ``allow_pinv`` asks for a
    least-squares pseudo-solution instead.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            return scipy.linalg.solve(p, rhs, assume_a="pos", check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as exc:
        if allow_pinv:
            return scipy.linalg.lstsq(p, rhs, check_finite=False)[0]
        raise SingularSystemError(
            f"normal equations are singular or ill-conditioned ({exc}); use alpha > 0"
        ) from None


def ridge_fit(features, targets, alpha: float, allow_pinv: bool = False) -> np.ndarray:
    """Closed-form ridge weights ``(d, N_f)`` from ``(N_f, M)`` features and ``(d, M)`` targets."""
    o = np.asarray(features, dtype=np.float64)
    y = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if o.ndim != 2 or o.shape[1] != y.shape[1]:
        raise LengthMismatchError(f"features {o.shape} and targets {y.shape} disagree on M")
    if o.shape[1] < 1:
        raise DataError("need at least one shot")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    p = o @ o.T
    p[np.diag_indices_from(p)] += alpha
    return solve_spd(p, o @ y.T, allow_pinv).T


@dataclass(frozen=True, eq=False)
class RidgeAccumulator:
    q_acc: np.ndarray
    p_acc: np.ndarray
    alpha: float
    n_seen: int = 0

    @property
    def n_features(self) -> int:
        return self.p_acc.shape[0]


def seq_init(alpha: float, n_features: int, d: int = 1) -> RidgeAccumulator:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return RidgeAccumulator(np.zeros((d, n_features)), alpha * np.eye(n_features), float(alpha), 0)


def seq_update(acc: RidgeAccumulator, batch_features, batch_targets) -> RidgeAccumulator:
    o = np.asarray(batch_features, dtype=np.float64)
    y = np.asarray(batch_targets, dtype=np.float64)
    if y.ndim == 1:
        y = y[None, :]
    if o.ndim != 2 or o.shape[0] != acc.n_features:
        raise LengthMismatchError(f"batch features {o.shape} do not have {acc.n_features} rows")
    if y.shape != (acc.q_acc.shape[0], o.shape[1]):
        raise LengthMismatchError(f"batch targets {y.shape}, expected {(acc.q_acc.shape[0], o.shape[1])}")
    if o.shape[1] == 0:
        return acc
    return RidgeAccumulator(acc.q_acc + y @ o.T, acc.p_acc + o @ o.T, acc.alpha, acc.n_seen + o.shape[1])


def seq_solve(acc: RidgeAccumulator, allow_pinv: bool = False) -> np.ndarray:
    return solve_spd(acc.p_acc, acc.q_acc.T, allow_pinv).T


@dataclass(frozen=True, eq=False)
class Discriminator:
    """Trained weights plus the rule turning outputs into classes.

    ``decode`` is ``"threshold"`` (one output, class 1 iff output > threshold)
    or ``"argmax"`` (one output per class).
    """

    w_out: np.ndarray
    spec: FeatureSpec
    decode: str = "threshold"
    threshold: float = 0.5
    alpha: float = 0.0
    target_qubit: int | None = None

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w_out, dtype=np.float64))
        if self.decode not in ("threshold", "argmax"):
            raise ValueError(f"unknown decode rule {self.decode!r}")
        if self.decode == "threshold" and w.shape[0] != 1:
            raise ValueError("threshold decoding needs a single output row")
        if self.decode == "argmax" and w.shape[0] < 2:
            raise ValueError("argmax decoding needs one row per class")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w_out", w)

    @property
    def n_features(self) -> int:
        return self.w_out.shape[1]

    def classify(self, shotset: ShotSet, batch_size: int = 4096) -> np.ndarray:
        out = np.empty(shotset.n_shots, dtype=np.int64)
        for sel, (f,) in iter_feature_batches(shotset, self.spec, (self.target_qubit,), batch_size):
            out[sel] = decode(self, predict(self, f.T))
        return out

    def to_bytes(self) -> bytes:
        spec_txt = "".join(f"{k}={v}\n" for k, v in self.spec.to_mapping().items()).encode()
        d, n_f = self.w_out.shape
        head = struct.pack(
            "<I", len(spec_txt)) + spec_txt + struct.pack(
            "<dIdiQQ", self.alpha, 0 if self.decode == "threshold" else 1, self.threshold,
            -1 if self.target_qubit is None else self.target_qubit, d, n_f)
        return head + self.w_out.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, payload: bytes) -> "Discriminator":
        (n_txt,) = struct.unpack_from("<I", payload)
        txt = payload[4:4 + n_txt].decode()
        kv = dict(line.split("=", 1) for line in txt.splitlines() if line)
        off = 4 + n_txt
        alpha, dec, thr, tgt, d, n_f = struct.unpack_from("<dIdiQQ", payload, off)
        off += struct.calcsize("<dIdiQQ")
        if len(payload) - off != 8 * d * n_f:
            raise LengthMismatchError("weight block length mismatch")
        w = np.frombuffer(payload, dtype="<f8", offset=off).reshape(d, n_f).copy()
        return cls(w, FeatureSpec.from_mapping(kv), "threshold" if dec == 0 else "argmax",
                   thr, alpha, None if tgt < 0 else tgt)

    def save(self, path) -> None:
        write_record(path, DISC_TAG, self.to_bytes())

    @classmethod
    def load(cls, path) -> "Discriminator":
        _, payload = read_record(path, DISC_TAG)
        return cls.from_bytes(payload)


def predict(disc: Discriminator, features) -> np.ndarray:
    """Raw outputs ``W_out @ O`` for ``(N_f, M)`` features, shape ``(d, M)``."""
    o = np.asarray(features, dtype=np.float64)
    if o.ndim == 1:
        o = o[:, None]
    if o.shape[0] != disc.n_features:
        raise LengthMismatchError(f"features have {o.shape[0]} rows, model expects {disc.n_features}")
    return disc.w_out @ o


def decode(disc: Discriminator, outputs) -> np.ndarray:
    y = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    if disc.decode == "threshold":
        return (y[0] > disc.threshold).astype(np.int64)
    return np.argmax(y, axis=0).astype(np.int64)


def threshold_fidelities(outputs, labels, grid=THRESHOLD_GRID) -> np.ndarray:
    """Fidelity of the rule ``output > t`` for every ``t`` in ``grid``."""
    y = np.asarray(outputs, dtype=np.float64).ravel()
    lab = np.asarray(labels).ravel() == 1
    if y.size != lab.size:
        raise LengthMismatchError("outputs and labels differ in length")
    if y.size == 0:
        raise DataError("no outputs to score")
    order = np.argsort(y, kind="stable")
    ys, ls = y[order], lab[order]
    # number of outputs <= t for each t, then count correct on each side
    k = np.searchsorted(ys, np.asarray(grid), side="right")
    zeros_le = np.concatenate([[0], np.cumsum(~ls)])[k]
    ones_gt = lab.sum() - np.concatenate([[0], np.cumsum(ls)])[k]
    return (zeros_le + ones_gt) / y.size


def threshold_search(outputs, labels, grid=THRESHOLD_GRID) -> tuple[float, float]:
    """Best ``(threshold, fidelity)`` on the grid; ties go to the smallest threshold."""
    f = threshold_fidelities(outputs, labels, grid)
    i = int(np.argmax(f))
    return float(np.asarray(grid)[i]), float(f[i])


@dataclass
class SweepResult:
    """Selected models and the full (alpha, threshold) fidelity grid.

    ``grid`` rows are ``(target, alpha, threshold, fidelity)`` measured on the
    selection set, one row per threshold so the grid is always
    ``|alphas| x 101`` per target; threshold is NaN for argmax models and
    fidelity NaN for alphas whose system was singular.
    """

    models: list[Discriminator]
    grid: list[tuple]
    selection_fidelity: list[float]
    test_fidelity: list[float]
    test_predictions: np.ndarray
    alphas: np.ndarray
    failed_alphas: list[float] = field(default_factory=list)


def _targets_of(shotset: ShotSet):
    return list(range(shotset.n_qubits)) if shotset.n_qubits > 1 else [None]


def target_matrix(shotset: ShotSet, targets, index=None, decode_rule="threshold") -> np.ndarray:
    """Rows of regression targets: one bit row per target, or a one-hot block."""
    labels = shotset.labels if index is None else shotset.labels[index]
    if decode_rule == "argmax":
        return (labels[None, :] == np.arange(shotset.n_classes)[:, None]).astype(np.float64)
    if shotset.n_qubits == 1:
        return (labels[None, :] == 1).astype(np.float64)
    return np.stack([(labels >> t) & 1 for t in targets]).astype(np.float64)


def accumulate(shotset: ShotSet, spec: FeatureSpec, targets, decode_rule: str,
               batch_size: int) -> list[RidgeAccumulator]:
    """Unregularized accumulators per feature group (one if the spec is shared)."""
    groups = [targets] if spec.is_shared() else [[t] for t in targets]
    accs = []
    for group in groups:
        t0 = group[0]
        n_f = spec.n_features(t0)
        d = len(group) if decode_rule == "threshold" else shotset.n_classes
        acc = seq_init(0.0, n_f, d)
        for sel, (f,) in iter_feature_batches(shotset, spec, (t0,), batch_size):
            acc = seq_update(acc, f.T, target_matrix(shotset, group, sel, decode_rule))
        accs.append(acc)
    return accs


def _outputs(shotset, spec, groups, weights, batch_size):
    """Raw outputs per feature group, each shaped ``(n_alpha, d, M)``."""
    outs = []
    for per_alpha in weights:
        d = next((w.shape[0] for w in per_alpha if w is not None), 1)
        outs.append(np.full((len(per_alpha), d, shotset.n_shots), np.nan))
    for sel, feats in iter_feature_batches(shotset, spec, [grp[0] for grp in groups], batch_size):
        for g, f in enumerate(feats):
            good = [a for a, w in enumerate(weights[g]) if w is not None]
            if not good:
                continue
            d = outs[g].shape[1]
            y = f @ np.concatenate([weights[g][a] for a in good]).T
            for i, a in enumerate(good):
                outs[g][a][:, sel] = y[:, i * d:(i + 1) * d].T
    return outs


def sweep(train: ShotSet, test: ShotSet, spec: FeatureSpec, alphas: Sequence[float] | None = None,
          select: ShotSet | None = None, batch_size: int = 4096,
          allow_pinv: bool = False) -> SweepResult:
    """Train one model per target for every alpha and keep the best.

    The unregularized sums ``P(0)`` and ``Q`` are accumulated once; each alpha
    only adds ``alpha * I`` and solves. ``(alpha, threshold)`` is chosen on
    ``select`` (the test set when omitted) and fidelity reported on ``test``.
    """
    if alphas is None:
        alphas = alpha_grid("multi" if train.n_qubits > 1 else "single")
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.size == 0:
        raise ValueError("alpha grid is empty")
    select = test if select is None else select
    targets = _targets_of(train)
    rule = "argmax" if train.n_classes > 2 else "threshold"
    groups = [targets] if spec.is_shared() else [[t] for t in targets]
    accs = accumulate(train, spec, targets, rule, batch_size)
    weights: list[list] = []
    failed = set()
    for acc in accs:
        per_alpha = []
        for a in alphas:
            p = acc.p_acc.copy()
            p[np.diag_indices_from(p)] += a
            try:
                per_alpha.append(solve_spd(p, acc.q_acc.T, allow_pinv).T)
            except SingularSystemError:
                per_alpha.append(None)
                failed.add(float(a))
        weights.append(per_alpha)
    if all(w is None for per in weights for w in per):
        raise SingularSystemError("every alpha in the grid gave a singular system")

    sel_out = _outputs(select, spec, groups, weights, batch_size)
    test_out = sel_out if select is test else _outputs(test, spec, groups, weights, batch_size)

    models, grid, sel_fid, test_fid = [], [], [], []
    preds = np.zeros((len(targets), test.n_shots), dtype=np.int64)
    for g, group in enumerate(groups):
        for r, t in enumerate(group):
            truth = select.qubit_labels(0 if t is None else t)
            best = (-1.0, None, None)
            for a_i, a in enumerate(alphas):
                if weights[g][a_i] is None:
                    thrs = THRESHOLD_GRID if rule == "threshold" else [np.nan]
                    grid.extend((t, float(a), float(thr), np.nan) for thr in thrs)
                    continue
                if rule == "threshold":
                    f = threshold_fidelities(sel_out[g][a_i, r], truth)
                    for thr, fid in zip(THRESHOLD_GRID, f):
                        grid.append((t, float(a), float(thr), float(fid)))
                    i = int(np.argmax(f))
                    cand = (float(f[i]), a_i, float(THRESHOLD_GRID[i]))
                else:
                    fid = float(np.mean(np.argmax(sel_out[g][a_i], axis=0) == truth))
                    grid.append((t, float(a), np.nan, fid))
                    cand = (fid, a_i, np.nan)
                if cand[0] > best[0]:
                    best = cand
            fid, a_i, thr = best
            w = weights[g][a_i]
            if rule == "threshold":
                disc = Discriminator(w[r:r + 1], spec, "threshold", thr, float(alphas[a_i]), t)
                pred = (test_out[g][a_i, r] > thr).astype(np.int64)
            else:
                disc = Discriminator(w, spec, "argmax", np.nan, float(alphas[a_i]), t)
                pred = np.argmax(test_out[g][a_i], axis=0)
            models.append(disc)
            sel_fid.append(fid)
            k = targets.index(t)
            preds[k] = pred
            test_fid.append(float(np.mean(pred == test.qubit_labels(0 if t is None else t))))
    order = [targets.index(m.target_qubit) for m in models]
    models = [m for _, m in sorted(zip(order, models), key=lambda p: p[0])]
    sel_fid = [f for _, f in sorted(zip(order, sel_fid), key=lambda p: p[0])]
    test_fid = [f for _, f in sorted(zip(order, test_fid), key=lambda p: p[0])]
    return SweepResult(models, grid, sel_fid, test_fid, preds, alphas, sorted(failed))
