"""Core domain types: IQ traces, shots, and the ShotSet dataset container.

A ShotSet keeps its samples in one dense complex array of shape
``(n_shots, n_channels, n_samples)`` (real part = I, imaginary part = Q), so
every downstream stage can work on whole batches at once. ``IQTrace`` and
``Shot`` are thin views for per-shot work.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import DataError, LabelOutOfRangeError, LayoutMismatchError, LengthMismatchError


class Layout(enum.IntEnum):
    RAW_MULTIPLEXED = 0
    PER_QUBIT_DEMODULATED = 1

    @classmethod
    def parse(cls, value: "str | int | Layout") -> "Layout":
        if isinstance(value, Layout):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "raw": cls.RAW_MULTIPLEXED,
            "raw_multiplexed": cls.RAW_MULTIPLEXED,
            "rawmultiplexed": cls.RAW_MULTIPLEXED,
            "demod": cls.PER_QUBIT_DEMODULATED,
            "demodulated": cls.PER_QUBIT_DEMODULATED,
            "per_qubit_demodulated": cls.PER_QUBIT_DEMODULATED,
            "perqubitdemodulated": cls.PER_QUBIT_DEMODULATED,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown layout {value!r}") from None


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class IQTrace:
    """Digitized in-phase/quadrature samples of one channel for one shot."""

    i: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.float64)
        q = np.asarray(self.q, dtype=np.float64)
        if i.ndim != 1 or q.ndim != 1:
            raise DataError("IQTrace samples must be one-dimensional")
        if i.shape != q.shape:
            raise LengthMismatchError(f"len(i)={i.size} != len(q)={q.size}")
        if i.size == 0:
            raise DataError("IQTrace must hold at least one sample")
        if not (np.all(np.isfinite(i)) and np.all(np.isfinite(q))):
            raise DataError("IQTrace samples must be finite")
        object.__setattr__(self, "i", _readonly(i.copy()))
        object.__setattr__(self, "q", _readonly(q.copy()))

    @classmethod
    def from_complex(cls, z) -> "IQTrace":
        z = np.asarray(z, dtype=np.complex128)
        return cls(z.real, z.imag)

    @property
    def n_samples(self) -> int:
        return self.i.size

    @property
    def z(self) -> np.ndarray:
        """Samples as complex ``I + iQ``."""
        return self.i + 1j * self.q

    def __len__(self) -> int:
        return self.n_samples

    def __eq__(self, other) -> bool:
        if not isinstance(other, IQTrace):
            return NotImplemented
        return np.array_equal(self.i, other.i) and np.array_equal(self.q, other.q)


@dataclass(frozen=True)
class Shot:
    channels: tuple[IQTrace, ...]
    label: int

    def __post_init__(self):
        chans = tuple(self.channels)
        if not chans:
            raise DataError("a shot needs at least one channel")
        n = chans[0].n_samples
        if any(c.n_samples != n for c in chans):
            raise LengthMismatchError("all channels of a shot must share n_samples")
        if int(self.label) < 0:
            raise LabelOutOfRangeError(f"negative label {self.label}")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "label", int(self.label))

    @property
    def n_samples(self) -> int:
        return self.channels[0].n_samples

    def as_array(self) -> np.ndarray:
        """Complex array of shape ``(n_channels, n_samples)``."""
        return np.stack([c.z for c in self.channels])


def n_configurations(n_qubits: int, n_classes: int) -> int:
    return n_classes**n_qubits


def qubit_bits(labels, qubit: int) -> np.ndarray:
    """Prepared bit of ``qubit`` (0-based) from packed labels; LSB is qubit 0."""
    return (np.asarray(labels, dtype=np.int64) >> qubit) & 1


def bits_to_label(bits: "str | Sequence[int]") -> int:
    """Pack per-qubit bits, first entry = first qubit, into a label.

    >>> bits_to_label("01000")
    2
    """
    seq = [int(b) for b in bits]
    if any(b not in (0, 1) for b in seq):
        raise ValueError(f"bits must be 0/1, got {bits!r}")
    return sum(b << k for k, b in enumerate(seq))


def label_to_bits(label: int, n_qubits: int) -> str:
    return "".join(str((int(label) >> k) & 1) for k in range(n_qubits))


@dataclass(frozen=True, eq=False)
class ShotSet:
    """Labeled shots plus channel/layout metadata.

    ``iq`` has shape ``(n_shots, n_channels, n_samples)``. Labels are packed
    per-qubit bits (LSB = first qubit) for multi-qubit sets, or class indices
    for single-qubit sets.
    """

    iq: np.ndarray
    labels: np.ndarray
    n_qubits: int = 1
    n_classes: int = 2
    layout: Layout = Layout.PER_QUBIT_DEMODULATED
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        iq = np.asarray(self.iq, dtype=np.complex128)
        labels = np.asarray(self.labels, dtype=np.int64)
        if iq.ndim != 3:
            raise DataError(f"iq must have shape (shots, channels, samples), got {iq.shape}")
        if labels.shape != (iq.shape[0],):
            raise LengthMismatchError(f"{labels.size} labels for {iq.shape[0]} shots")
        if self.n_qubits < 1:
            raise DataError("n_qubits must be positive")
        if self.n_classes < 2:
            raise DataError("n_classes must be at least 2")
        if self.n_qubits > 1 and self.n_classes != 2:
            raise DataError("multi-qubit sets use packed binary labels (n_classes=2)")
        layout = Layout.parse(self.layout)
        if iq.shape[1] < 1 or iq.shape[2] < 1:
            raise DataError("need at least one channel and one sample")
        if layout is Layout.RAW_MULTIPLEXED and iq.shape[1] != 1:
            raise LayoutMismatchError("raw multiplexed sets carry exactly one channel")
        if layout is Layout.PER_QUBIT_DEMODULATED and iq.shape[1] != self.n_qubits:
            raise LayoutMismatchError(
                f"demodulated set needs one channel per qubit ({self.n_qubits}), got {iq.shape[1]}"
            )
        if not np.all(np.isfinite(iq)):
            raise DataError("samples must be finite")
        n_conf = n_configurations(self.n_qubits, self.n_classes)
        if labels.size and (labels.min() < 0 or labels.max() >= n_conf):
            bad = labels[(labels < 0) | (labels >= n_conf)][0]
            raise LabelOutOfRangeError(f"label {bad} outside [0, {n_conf})")
        meta = {str(k): str(v) for k, v in dict(self.meta).items()}
        if "shots_per_config" in meta:
            want = int(meta["shots_per_config"])
            counts = np.bincount(labels, minlength=n_conf)
            if np.any(counts != want):
                raise DataError(
                    f"meta declares {want} shots per configuration, counts are {counts.tolist()}"
                )
        object.__setattr__(self, "iq", _readonly(iq))
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "meta", meta)

    @classmethod
    def from_shots(cls, shots: Sequence[Shot], n_channels: int | None = None,
                   n_samples: int | None = None, **kwargs) -> "ShotSet":
        if shots:
            n_ch = len(shots[0].channels)
            n_s = shots[0].n_samples
            for s in shots:
                if len(s.channels) != n_ch or s.n_samples != n_s:
                    raise LengthMismatchError("shots must share channel count and n_samples")
            iq = np.stack([s.as_array() for s in shots])
        else:
            iq = np.zeros((0, n_channels or 1, n_samples or 1), dtype=np.complex128)
        return cls(iq=iq, labels=[s.label for s in shots], **kwargs)

    @property
    def n_shots(self) -> int:
        return self.iq.shape[0]

    @property
    def n_channels(self) -> int:
        return self.iq.shape[1]

    @property
    def n_samples(self) -> int:
        return self.iq.shape[2]

    def __len__(self) -> int:
        return self.n_shots

    def shot(self, m: int) -> Shot:
        return Shot(tuple(IQTrace.from_complex(c) for c in self.iq[m]), int(self.labels[m]))

    @property
    def shots(self) -> Iterator[Shot]:
        return (self.shot(m) for m in range(self.n_shots))

    def qubit_labels(self, qubit: int) -> np.ndarray:
        """Per-shot class of one qubit (the label itself for single-qubit sets)."""
        if self.n_qubits == 1:
            return self.labels.copy()
        return qubit_bits(self.labels, qubit)

    def subset(self, index, meta: Mapping[str, str] | None = None) -> "ShotSet":
        new_meta = dict(self.meta if meta is None else meta)
        new_meta.pop("shots_per_config", None)
        return ShotSet(self.iq[index], self.labels[index], self.n_qubits, self.n_classes,
                       self.layout, new_meta)

    def replace(self, **changes) -> "ShotSet":
        fields = dict(iq=self.iq, labels=self.labels, n_qubits=self.n_qubits,
                      n_classes=self.n_classes, layout=self.layout, meta=self.meta)
        fields.update(changes)
        return ShotSet(**fields)

    def same_as(self, other: "ShotSet") -> bool:
        """Bit-exact equality of samples, labels and header fields."""
        return (
            self.n_qubits == other.n_qubits
            and self.n_classes == other.n_classes
            and self.layout == other.layout
            and self.iq.shape == other.iq.shape
            and np.array_equal(self.labels, other.labels)
            and self.iq.tobytes() == other.iq.tobytes()
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShotSet):
            return NotImplemented
        return self.same_as(other) and dict(self.meta) == dict(other.meta)

    __hash__ = None


def philox(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based Philox4x64 generator keyed by ``(seed, *stream)``.

    Keying by stream index (for example a shot index) makes every stream
    independent of how work is scheduled.
    """
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    if stream:
        mixed = 0
        for s in stream:
            mixed = (mixed * 0x9E3779B97F4A7C15 + int(s) + 1) & 0xFFFFFFFFFFFFFFFF
        words.append(mixed)
    else:
        words.append(0)
    return np.random.Generator(np.random.Philox(key=np.array(words, dtype=np.uint64)))


def split_train_test(shotset: ShotSet, train_fraction: float, seed: int) -> tuple[ShotSet, ShotSet]:
    """Stratified, seeded split into (train, test).

    Each prepared configuration is split on its own, ``round(fraction * count)``
    shots going to train. Both halves keep the original shot order.
    """
    if not 0.0 < float(train_fraction) < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if shotset.n_shots < 2:
        raise DataError("need at least two shots to split")
    rng = philox(seed)
    train_mask = np.zeros(shotset.n_shots, dtype=bool)
    for label in np.unique(shotset.labels):
        idx = np.flatnonzero(shotset.labels == label)
        n_train = int(np.floor(train_fraction * idx.size + 0.5))
        chosen = rng.permutation(idx)[:n_train]
        train_mask[chosen] = True
    meta = dict(shotset.meta)
    meta["split_seed"] = str(int(seed))
    meta["split_fraction"] = repr(float(train_fraction))
    train = shotset.subset(np.flatnonzero(train_mask), {**meta, "split_part": "train"})
    test = shotset.subset(np.flatnonzero(~train_mask), {**meta, "split_part": "test"})
    return train, test
