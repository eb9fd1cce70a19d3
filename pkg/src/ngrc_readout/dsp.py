"""DSP front end: digital demodulation, boxcar masking, window averaging.

Every function accepts either an :class:`IQTrace` (and returns one) or a
complex ndarray whose last axis is time (and returns an ndarray), so the
same code serves single traces and whole ``(shots, channels, samples)``
batches.
"""

from __future__ import annotations

import math

import numpy as np

from .data import IQTrace, Layout, ShotSet
from .errors import DataError, LayoutMismatchError

DEFAULT_LPF_LEN = 4


def _unwrap(x):
    if isinstance(x, IQTrace):
        return x.z, True
    return np.asarray(x, dtype=np.complex128), False


def _wrap(z, as_trace):
    return IQTrace.from_complex(z) if as_trace else z


def moving_average(x, length: int = DEFAULT_LPF_LEN):
    """Causal length-``length`` moving average; the first samples average
    over the truncated window ``[0, n]``."""
    z, as_trace = _unwrap(x)
    if length < 1:
        raise ValueError("moving-average length must be >= 1")
    if length == 1:
        return _wrap(z.copy(), as_trace)
    n = z.shape[-1]
    c = np.cumsum(z, axis=-1)
    out = c.copy()
    if n > length:
        out[..., length:] = c[..., length:] - c[..., :-length]
    counts = np.minimum(np.arange(1, n + 1), length)
    return _wrap(out / counts, as_trace)


def demodulate(raw, if_freq: float, lpf_len: int = DEFAULT_LPF_LEN):
    """Mix down by ``exp(-2*pi*i*if_freq*n)`` and low-pass with a moving average."""
    if not 0.0 <= if_freq < 0.5:
        raise ValueError(f"if_freq must lie in [0, 0.5), got {if_freq}")
    z, as_trace = _unwrap(raw)
    n = np.arange(z.shape[-1])
    lo = np.exp(-2j * np.pi * if_freq * n)
    return _wrap(moving_average(z * lo, lpf_len), as_trace)


def apply_boxcar_mask(trace, end_step: int):
    """Zero every sample at index >= ``end_step``."""
    z, as_trace = _unwrap(trace)
    n = z.shape[-1]
    if not 0 < end_step <= n:
        raise ValueError(f"end_step must lie in (0, {n}], got {end_step}")
    out = z.copy()
    out[..., end_step:] = 0.0
    return _wrap(out, as_trace)


def n_windows(n_samples: int, w: int) -> int:
    return math.ceil(n_samples / w)


def window_average(trace, w: int):
    """Average over non-overlapping windows of ``w`` samples.

    Window ``k`` covers ``[k*w, min((k+1)*w, N))`` and is divided by its own
    length, which is ``w`` except for a final window cut short by the end of
    the trace. Masked (zeroed) samples count toward the divisor.
    """
    if w < 1:
        raise ValueError("window size must be >= 1")
    z, as_trace = _unwrap(trace)
    n = z.shape[-1]
    if w == 1:
        return _wrap(z.copy(), as_trace)
    nw = n_windows(n, w)
    pad = nw * w - n
    if pad:
        z = np.concatenate([z, np.zeros(z.shape[:-1] + (pad,), dtype=z.dtype)], axis=-1)
    sums = z.reshape(z.shape[:-1] + (nw, w)).sum(axis=-1)
    lengths = np.full(nw, float(w))
    lengths[-1] = n - (nw - 1) * w
    return _wrap(sums / lengths, as_trace)


def demodulate_shotset(shotset: ShotSet, if_freqs, lpf_len: int = DEFAULT_LPF_LEN) -> ShotSet:
    """Turn a raw multiplexed set into a per-qubit demodulated one."""
    if shotset.layout is not Layout.RAW_MULTIPLEXED:
        raise LayoutMismatchError("demodulate_shotset expects a raw multiplexed set")
    if_freqs = [float(f) for f in if_freqs]
    if len(if_freqs) != shotset.n_qubits:
        raise DataError(f"{len(if_freqs)} IF frequencies for {shotset.n_qubits} qubits")
    raw = shotset.iq[:, 0, :]
    chans = np.stack([demodulate(raw, f, lpf_len) for f in if_freqs], axis=1)
    meta = dict(shotset.meta, demod_lpf_len=str(lpf_len))
    return shotset.replace(iq=chans, layout=Layout.PER_QUBIT_DEMODULATED, meta=meta)
