"""Boxcar and matched filters, and the 1-D discriminator applied after them."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .data import IQTrace
from .errors import DataError, LengthMismatchError, NumericalError
from .io import read_record, write_record

MFW_TAG = b"MFW1"


def _as_complex(x) -> np.ndarray:
    if isinstance(x, IQTrace):
        return x.z
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], IQTrace):
        return np.stack([t.z for t in x])
    return np.asarray(x, dtype=np.complex128)


def boxcar_filter(trace, start: int = 0, end: int | None = None):
    """Unweighted complex sum of ``I + iQ`` over ``[start, end)``.

    Works on one trace or a batch with time on the last axis.
    """
    z = _as_complex(trace)
    n = z.shape[-1]
    end = n if end is None else end
    if not 0 <= start < end <= n:
        raise ValueError(f"empty or invalid range [{start}, {end}) for {n} samples")
    return z[..., start:end].sum(axis=-1)


@dataclass(frozen=True)
class MatchedFilterWeights:
    k: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=np.complex128)
        if k.ndim != 1 or not np.all(np.isfinite(k)):
            raise ValueError("matched-filter weights must be a finite 1-D array")
        object.__setattr__(self, "k", k)

    def __len__(self) -> int:
        return self.k.size

    def save(self, path) -> None:
        payload = struct.pack("<Q", self.k.size) + self.k.astype("<c16").tobytes()
        write_record(path, MFW_TAG, payload)

    @classmethod
    def load(cls, path) -> "MatchedFilterWeights":
        _, payload = read_record(path, MFW_TAG)
        (n,) = struct.unpack_from("<Q", payload)
        if len(payload) != 8 + 16 * n:
            raise LengthMismatchError("matched-filter record length mismatch")
        return cls(np.frombuffer(payload, dtype="<c16", offset=8).copy())


def matched_filter_weights(ground_shots, excited_shots) -> MatchedFilterWeights:
    """Per-step weights ``<S0 - S1> / (var S0 + var S1)``.

    The variance of a complex sample is ``var(I) + var(Q)`` with population
    (1/M) normalization.
    """
    s0 = _as_complex(ground_shots)
    s1 = _as_complex(excited_shots)
    if s0.ndim != 2 or s1.ndim != 2:
        raise ValueError("expected (shots, samples) arrays for each class")
    if s0.shape[0] < 2 or s1.shape[0] < 2:
        raise DataError("need at least two shots per class")
    if s0.shape[1] != s1.shape[1]:
        raise LengthMismatchError("class traces differ in length")
    num = s0.mean(axis=0) - s1.mean(axis=0)
    den = s0.real.var(axis=0) + s0.imag.var(axis=0) + s1.real.var(axis=0) + s1.imag.var(axis=0)
    zero = np.flatnonzero(den == 0)
    if zero.size:
        raise NumericalError(f"zero variance at time step {int(zero[0])}")
    return MatchedFilterWeights(num / den)


def matched_filter_apply(trace, weights: MatchedFilterWeights):
    z = _as_complex(trace)
    if z.shape[-1] != weights.k.size:
        raise LengthMismatchError(f"trace has {z.shape[-1]} samples, weights {weights.k.size}")
    # same reduction as boxcar_filter, so unit weights reproduce it bit for bit
    return (z * weights.k).sum(axis=-1)


@dataclass(frozen=True)
class ComplexDiscriminator:
    """Threshold on the projection ``Re((z - center) * conj(axis))``; class 1 above."""

    center: complex
    axis: complex
    threshold: float

    def project(self, values) -> np.ndarray:
        z = np.asarray(values, dtype=np.complex128)
        return ((z - self.center) * np.conj(self.axis)).real

    def predict(self, values) -> np.ndarray:
        return (self.project(values) > self.threshold).astype(np.int64)


def best_threshold(proj: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Exhaustive threshold search over midpoints of the sorted projections.

    Returns ``(threshold, training fidelity)``; ties go to the threshold
    closest to zero, then to the smaller one.
    """
    order = np.argsort(proj, kind="stable")
    p = proj[order]
    y = labels[order]
    # cut i: the i smallest values go to class 0
    zeros_below = np.concatenate([[0], np.cumsum(y == 0)])
    ones_above = np.concatenate([np.cumsum((y == 1)[::-1])[::-1], [0]])
    correct = zeros_below + ones_above
    n = p.size
    cuts = np.empty(n + 1)
    cuts[0] = p[0] - 1.0
    cuts[-1] = p[-1] + 1.0
    cuts[1:-1] = 0.5 * (p[:-1] + p[1:])
    # a cut between equal values cannot separate them
    valid = np.ones(n + 1, dtype=bool)
    valid[1:-1] = p[:-1] < p[1:]
    best = correct[valid].max()
    cand = cuts[valid & (correct == best)]
    key = np.lexsort((cand, np.abs(cand)))
    return float(cand[key[0]]), best / n


def fit_complex_discriminator(filtered_values, labels, method: str = "means") -> ComplexDiscriminator:
    """Project onto the line through the class means (or the Fisher axis) and
    pick the threshold with the highest training fidelity."""
    z = np.asarray(filtered_values, dtype=np.complex128)
    y = np.asarray(labels, dtype=np.int64)
    if z.shape != y.shape:
        raise LengthMismatchError("values and labels differ in length")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise DataError("both classes must be present")
    m0, m1 = z[y == 0].mean(), z[y == 1].mean()
    diff = m1 - m0
    if diff == 0:
        raise NumericalError("class means coincide; no discrimination axis")
    if method == "means":
        axis = diff / abs(diff)
    elif method == "fisher":
        def cov(v):
            return np.cov(np.stack([v.real, v.imag]), bias=True)
        sw = cov(z[y == 0]) + cov(z[y == 1])
        d = np.linalg.solve(sw, [diff.real, diff.imag])
        axis = complex(d[0], d[1])
        axis /= abs(axis)
    else:
        raise ValueError(f"unknown method {method!r}")
    center = 0.5 * (m0 + m1)
    disc = ComplexDiscriminator(complex(center), complex(axis), 0.0)
    t, _ = best_threshold(disc.project(z), y)
    return ComplexDiscriminator(complex(center), complex(axis), t)


@dataclass(frozen=True)
class FilterDiscriminator:
    """A filter (matched or boxcar) followed by a complex-plane discriminator."""

    kind: str
    disc: ComplexDiscriminator
    weights: MatchedFilterWeights | None = None
    start: int = 0
    end: int | None = None

    def filter(self, traces) -> np.ndarray:
        if self.kind == "mf":
            return matched_filter_apply(traces, self.weights)
        return boxcar_filter(traces, self.start, self.end)

    def predict(self, traces) -> np.ndarray:
        return self.disc.predict(self.filter(traces))


def fit_matched_filter(traces, labels, method: str = "means") -> FilterDiscriminator:
    z = _as_complex(traces)
    y = np.asarray(labels)
    w = matched_filter_weights(z[y == 0], z[y == 1])
    return FilterDiscriminator("mf", fit_complex_discriminator(matched_filter_apply(z, w), y, method), w)


def fit_boxcar(traces, labels, start: int = 0, end: int | None = None,
               method: str = "means") -> FilterDiscriminator:
    z = _as_complex(traces)
    y = np.asarray(labels)
    values = boxcar_filter(z, start, end)
    return FilterDiscriminator("boxcar", fit_complex_discriminator(values, y, method), None, start, end)
