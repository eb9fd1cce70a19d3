"""NG-RC feature vectors and their evaluation cost.

A feature vector is ``[1, linear..., quadratic..., cubic...]``. Linear
features are the window-averaged ``(I, Q)`` pairs of every visible channel,
interleaved per window and concatenated channel by channel. Nonlinear
features are monomials over the linear features, with repetition, in
graded-lexicographic order. Each cubic value is a cached quadratic times one
linear value, so a cubic costs a single extra multiplication.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Mapping

import numpy as np

from . import dsp
from .data import Layout, Shot, ShotSet
from .errors import ConfigError, LayoutMismatchError

MAX_DEGREE = 3


def enumerate_monomials(n_lin: int, degree: int) -> list[tuple[int, ...]]:
    """Nonlinear monomials of total degree 2..``degree`` over ``n_lin`` inputs.

    Index tuples are non-decreasing (multisets); quadratics come first, then
    cubics, each block in lexicographic order.
    """
    if n_lin < 1:
        raise ValueError("n_lin must be >= 1")
    if degree not in (1, 2, 3):
        raise ValueError("degree must be 1, 2 or 3")
    out: list[tuple[int, ...]] = []
    for d in range(2, degree + 1):
        out.extend(itertools.combinations_with_replacement(range(n_lin), d))
    return out


@dataclass(frozen=True)
class FeatureSpec:
    """What a feature vector contains.

    ``masks`` holds one boxcar end step per channel (``None`` keeps whole
    traces). With ``cross_qubit`` every model sees all channels and monomials
    may mix them (optionally only between channels at most
    ``neighbor_radius`` apart); without it model ``j`` sees channel ``j`` only.
    ``term_subset`` lists retained canonical feature indices.
    """

    degree: int = 1
    window: int = 1
    n_samples: int = 200
    n_channels: int = 1
    include_constant: bool = True
    masks: tuple[int, ...] | None = None
    cross_qubit: bool = True
    neighbor_radius: int | None = None
    term_subset: tuple[int, ...] | None = None
    layout: Layout = Layout.PER_QUBIT_DEMODULATED
    if_freqs: tuple[float, ...] | None = None
    lpf_len: int = dsp.DEFAULT_LPF_LEN
    count_demod: bool = True

    def __post_init__(self):
        if self.degree not in (1, 2, 3):
            raise ConfigError(f"degree must be 1, 2 or 3, got {self.degree}")
        if self.window < 1 or self.n_samples < 1 or self.n_channels < 1:
            raise ConfigError("window, n_samples and n_channels must be positive")
        object.__setattr__(self, "layout", Layout.parse(self.layout))
        if self.masks is not None:
            masks = tuple(int(e) for e in self.masks)
            if len(masks) != self.n_channels:
                raise ConfigError(f"{len(masks)} masks for {self.n_channels} channels")
            if any(not 0 < e <= self.n_samples for e in masks):
                raise ConfigError(f"mask ends must lie in (0, {self.n_samples}]: {masks}")
            object.__setattr__(self, "masks", masks)
        if self.if_freqs is not None:
            object.__setattr__(self, "if_freqs", tuple(float(f) for f in self.if_freqs))
        if self.neighbor_radius is not None and self.neighbor_radius < 0:
            raise ConfigError("neighbor_radius must be >= 0")
        if self.term_subset is not None:
            sub = tuple(int(i) for i in self.term_subset)
            if len(set(sub)) != len(sub):
                raise ConfigError("term_subset indices must be unique")
            if any(i < 0 for i in sub):
                raise ConfigError("term_subset indices must be non-negative")
            object.__setattr__(self, "term_subset", sub)

    # -- geometry -----------------------------------------------------------

    @property
    def ends(self) -> tuple[int, ...]:
        return self.masks if self.masks is not None else (self.n_samples,) * self.n_channels

    def windows_per_channel(self) -> tuple[int, ...]:
        return tuple(math.ceil(e / self.window) for e in self.ends)

    @property
    def n_lin_total(self) -> int:
        return 2 * sum(self.windows_per_channel())

    def channel_offsets(self) -> list[int]:
        return [0] + list(itertools.accumulate(2 * k for k in self.windows_per_channel()))

    def visible_channels(self, target: int | None = None) -> tuple[int, ...]:
        if self.cross_qubit or self.n_channels == 1:
            return tuple(range(self.n_channels))
        if target is None:
            raise ValueError("per-qubit features need a target channel")
        if not 0 <= target < self.n_channels:
            raise ValueError(f"target {target} outside [0, {self.n_channels})")
        return (target,)

    def is_shared(self) -> bool:
        """True when every per-qubit model uses the same feature vector."""
        return self.cross_qubit or self.n_channels == 1

    def plan(self, target: int | None = None) -> "FeaturePlan":
        return _plan_cache(self, None if self.is_shared() else target)

    def n_features(self, target: int | None = None) -> int:
        return self.plan(target).n_features

    def with_subset(self, subset) -> "FeatureSpec":
        return replace(self, term_subset=None if subset is None else tuple(subset))

    # -- key/value serialization -------------------------------------------

    def to_mapping(self) -> dict[str, str]:
        out = {
            "degree": str(self.degree),
            "window": str(self.window),
            "n_samples": str(self.n_samples),
            "n_channels": str(self.n_channels),
            "include_constant": str(self.include_constant).lower(),
            "cross_qubit": str(self.cross_qubit).lower(),
            "layout": self.layout.name.lower(),
            "lpf_len": str(self.lpf_len),
            "count_demod": str(self.count_demod).lower(),
        }
        if self.masks is not None:
            out["masks"] = ",".join(map(str, self.masks))
        if self.neighbor_radius is not None:
            out["neighbor_radius"] = str(self.neighbor_radius)
        if self.term_subset is not None:
            out["term_subset"] = ",".join(map(str, self.term_subset))
        if self.if_freqs is not None:
            out["if_freqs"] = ",".join(repr(f) for f in self.if_freqs)
        return out

    @classmethod
    def from_mapping(cls, kv: Mapping[str, str]) -> "FeatureSpec":
        known = {
            "degree", "window", "n_samples", "n_channels", "include_constant", "masks",
            "cross_qubit", "neighbor_radius", "term_subset", "layout", "if_freqs", "lpf_len",
            "count_demod",
        }
        unknown = set(kv) - known
        if unknown:
            raise ConfigError(f"unknown feature spec keys: {', '.join(sorted(unknown))}")

        def get(key, conv, default=None):
            if key not in kv or str(kv[key]).strip() == "":
                return default
            try:
                return conv(str(kv[key]).strip())
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc

        def ints(s):
            return tuple(int(x) for x in s.split(",") if x.strip())

        def floats(s):
            return tuple(float(x) for x in s.split(",") if x.strip())

        return cls(
            degree=get("degree", int, 1),
            window=get("window", int, 1),
            n_samples=get("n_samples", int, 200),
            n_channels=get("n_channels", int, 1),
            include_constant=get("include_constant", _parse_bool, True),
            masks=get("masks", ints),
            cross_qubit=get("cross_qubit", _parse_bool, True),
            neighbor_radius=get("neighbor_radius", int),
            term_subset=get("term_subset", ints),
            layout=get("layout", Layout.parse, Layout.PER_QUBIT_DEMODULATED),
            if_freqs=get("if_freqs", floats),
            lpf_len=get("lpf_len", int, dsp.DEFAULT_LPF_LEN),
            count_demod=get("count_demod", _parse_bool, True),
        )


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


@dataclass(frozen=True, eq=False)
class FeaturePlan:
    """Index bookkeeping for one (spec, target) pair.

    ``lin_idx`` maps local linear positions to columns of the full linear
    block (all channels). Quadratics and cubics are stored as local index
    tuples. ``keep`` selects retained entries of the canonical vector.
    """

    spec: FeatureSpec
    lin_idx: np.ndarray
    lin_channel: np.ndarray
    quads: list
    cubics: list
    keep: np.ndarray | None = None
    _extra: dict = field(default_factory=dict)

    @property
    def n_lin(self) -> int:
        return self.lin_idx.size

    @property
    def n_canonical(self) -> int:
        return int(self.spec.include_constant) + self.n_lin + len(self.quads) + len(self.cubics)

    @property
    def n_features(self) -> int:
        return self.n_canonical if self.keep is None else self.keep.size

    def describe(self, index: int) -> tuple:
        """Canonical index -> ``()`` for the constant or a tuple of local linear indices."""
        c = int(self.spec.include_constant)
        if index < c:
            return ()
        index -= c
        if index < self.n_lin:
            return (index,)
        index -= self.n_lin
        if index < len(self.quads):
            return self.quads[index]
        index -= len(self.quads)
        return self.cubics[index]

    @cached_property
    def retained(self) -> list[tuple]:
        idx = range(self.n_canonical) if self.keep is None else self.keep.tolist()
        return [self.describe(i) for i in idx]

    @cached_property
    def _eval_tables(self):
        terms = self.retained
        quad_needed = sorted({t for t in terms if len(t) == 2} | {t[:2] for t in terms if len(t) == 3})
        qpos = {t: k for k, t in enumerate(quad_needed)}
        qa = np.array([t[0] for t in quad_needed], dtype=np.intp)
        qb = np.array([t[1] for t in quad_needed], dtype=np.intp)
        cubic_needed = [t for t in terms if len(t) == 3]
        cq = np.array([qpos[t[:2]] for t in cubic_needed], dtype=np.intp)
        cc = np.array([t[2] for t in cubic_needed], dtype=np.intp)
        cpos = {t: k for k, t in enumerate(cubic_needed)}
        # columns of the stacked block [1 | linear | needed quads | needed cubics]
        q0 = 1 + self.n_lin
        c0 = q0 + len(quad_needed)
        cols = []
        for t in terms:
            if len(t) == 0:
                cols.append(0)
            elif len(t) == 1:
                cols.append(1 + t[0])
            elif len(t) == 2:
                cols.append(q0 + qpos[t])
            else:
                cols.append(c0 + cpos[t])
        return qa, qb, cq, cc, np.array(cols, dtype=np.intp)

    def evaluate(self, lin_full: np.ndarray) -> np.ndarray:
        """Feature rows for a batch: ``(B, n_lin_total) -> (B, n_features)``."""
        x = lin_full[:, self.lin_idx]
        b = x.shape[0]
        if self.keep is None:
            blocks = []
            if self.spec.include_constant:
                blocks.append(np.ones((b, 1)))
            blocks.append(x)
            q = self._full_quads(x)
            if q is not None:
                blocks.append(q)
                if self.cubics:
                    blocks.append(q[:, self._extra["cubic_q"]] * x[:, self._extra["cubic_c"]])
            return np.concatenate(blocks, axis=1)
        qa, qb, cq, cc, cols = self._eval_tables
        quad = x[:, qa] * x[:, qb]
        stacked = np.concatenate([np.ones((b, 1)), x, quad, quad[:, cq] * x[:, cc]], axis=1)
        return stacked[:, cols]

    def _full_quads(self, x):
        if not self.quads:
            return None
        if "qa" not in self._extra:
            q = np.array(self.quads, dtype=np.intp).reshape(-1, 2)
            self._extra["qa"], self._extra["qb"] = q[:, 0], q[:, 1]
            if self.cubics:
                qpos = {t: k for k, t in enumerate(self.quads)}
                self._extra["cubic_q"] = np.array([qpos[t[:2]] for t in self.cubics], dtype=np.intp)
                self._extra["cubic_c"] = np.array([t[2] for t in self.cubics], dtype=np.intp)
        return x[:, self._extra["qa"]] * x[:, self._extra["qb"]]

    def global_term(self, term: tuple) -> tuple:
        """Local index tuple -> tuple of full-linear-block column indices."""
        return tuple(int(self.lin_idx[i]) for i in term)


_PLANS: dict = {}


def _plan_cache(spec: FeatureSpec, target: int | None) -> FeaturePlan:
    key = (spec, target)
    plan = _PLANS.get(key)
    if plan is None:
        if len(_PLANS) > 64:
            _PLANS.clear()
        plan = _build_plan(spec, target)
        _PLANS[key] = plan
    return plan


def _build_plan(spec: FeatureSpec, target: int | None) -> FeaturePlan:
    offsets = spec.channel_offsets()
    chans = spec.visible_channels(target)
    lin_idx = np.concatenate([np.arange(offsets[c], offsets[c + 1]) for c in chans])
    lin_channel = np.concatenate([np.full(offsets[c + 1] - offsets[c], c) for c in chans])
    monos = enumerate_monomials(lin_idx.size, spec.degree) if spec.degree > 1 else []
    r = spec.neighbor_radius
    if r is not None and spec.cross_qubit and len(chans) > 1:
        monos = [t for t in monos if np.ptp(lin_channel[list(t)]) <= r]
    quads = [t for t in monos if len(t) == 2]
    cubics = [t for t in monos if len(t) == 3]
    plan = FeaturePlan(spec, lin_idx, lin_channel, quads, cubics)
    if spec.term_subset is not None:
        if any(i >= plan.n_canonical for i in spec.term_subset):
            raise ConfigError(f"term_subset index out of range (N_f={plan.n_canonical})")
        plan = FeaturePlan(spec, lin_idx, lin_channel, quads, cubics,
                           keep=np.array(spec.term_subset, dtype=np.intp))
    return plan


# -- evaluation --------------------------------------------------------------


def linear_block(iq: np.ndarray, spec: FeatureSpec, layout: Layout, meta=None) -> np.ndarray:
    """Window-averaged linear features of every channel for a batch of shots.

    ``iq`` is ``(B, channels, samples)`` in the data's ``layout``. Raw
    multiplexed input is demodulated here when the spec asks for
    per-qubit channels.
    """
    iq = np.asarray(iq)
    if iq.shape[-1] != spec.n_samples:
        raise LayoutMismatchError(f"spec expects {spec.n_samples} samples, data has {iq.shape[-1]}")
    if spec.layout is Layout.PER_QUBIT_DEMODULATED and layout is Layout.RAW_MULTIPLEXED:
        freqs = spec.if_freqs
        if freqs is None and meta and "if_freqs" in meta:
            freqs = tuple(float(f) for f in meta["if_freqs"].split(","))
        if freqs is None or len(freqs) != spec.n_channels:
            raise LayoutMismatchError("demodulating raw data needs one if_freq per channel")
        raw = iq[:, 0, :]
        chans = [dsp.demodulate(raw, f, spec.lpf_len) for f in freqs]
    elif spec.layout is Layout.RAW_MULTIPLEXED and layout is not Layout.RAW_MULTIPLEXED:
        raise LayoutMismatchError("raw-sample features need raw multiplexed data")
    else:
        if iq.shape[1] != spec.n_channels:
            raise LayoutMismatchError(f"spec expects {spec.n_channels} channels, data has {iq.shape[1]}")
        chans = [iq[:, c, :] for c in range(spec.n_channels)]
    blocks = []
    for z, end, nw in zip(chans, spec.ends, spec.windows_per_channel()):
        if end < spec.n_samples:
            z = dsp.apply_boxcar_mask(z, end)
        win = dsp.window_average(z, spec.window)[:, :nw]
        pair = np.empty((z.shape[0], nw, 2))
        pair[..., 0] = win.real
        pair[..., 1] = win.imag
        blocks.append(pair.reshape(z.shape[0], 2 * nw))
    return np.concatenate(blocks, axis=1)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    spec: FeatureSpec
    target: int | None = None

    def __len__(self) -> int:
        return self.values.size


def build_features(shot: Shot, spec: FeatureSpec, target: int | None = None,
                   layout: Layout | None = None, meta=None) -> FeatureVector:
    iq = shot.as_array()[None]
    if layout is None:
        # a single channel feeding a multi-channel spec can only be a raw trace
        multi = spec.n_channels > 1 and iq.shape[1] == 1
        layout = Layout.RAW_MULTIPLEXED if multi else spec.layout
    lin = linear_block(iq, spec, layout, meta)
    return FeatureVector(spec.plan(target).evaluate(lin)[0], spec, target)


def iter_feature_batches(shotset: ShotSet, spec: FeatureSpec, targets=(None,),
                         batch_size: int = 2048, index=None) -> Iterator[tuple[np.ndarray, list[np.ndarray]]]:
    """Yield ``(shot_indices, [features for each target])`` batch by batch.

    Features are ``(B, N_f)`` row matrices; shared specs evaluate once per batch.
    """
    idx = np.arange(shotset.n_shots) if index is None else np.asarray(index)
    for start in range(0, idx.size, batch_size):
        sel = idx[start:start + batch_size]
        lin = linear_block(shotset.iq[sel], spec, shotset.layout, shotset.meta)
        cache = {}
        feats = []
        for t in targets:
            key = None if spec.is_shared() else t
            if key not in cache:
                cache[key] = spec.plan(t).evaluate(lin)
            feats.append(cache[key])
        yield sel, feats


def feature_matrix(shotset: ShotSet, spec: FeatureSpec, target: int | None = None,
                   batch_size: int = 4096) -> np.ndarray:
    """All shots' features as an ``(M, N_f)`` array."""
    out = np.empty((shotset.n_shots, spec.n_features(target)))
    for sel, (f,) in iter_feature_batches(shotset, spec, (target,), batch_size):
        out[sel] = f
    return out


# -- cost accounting ----------------------------------------------------------


@dataclass(frozen=True)
class Complexity:
    parameters: int
    multiplications: int
    activations: int = 0
    demod_multiplications: int = 0
    product_multiplications: int = 0
    weight_multiplications: int = 0


DEMOD_MULTS_PER_SAMPLE = 4


def count_complexity(spec: FeatureSpec, n_models: int = 1) -> Complexity:
    """Parameters and real multiplications to evaluate ``n_models`` discriminators.

    Demodulation costs 4 multiplications per sample inside any window that
    a retained term reads; monomial products are shared between models;
    every retained feature (the constant included) costs one weight
    multiplication per model. Window-average divisions fold into weights.
    """
    if n_models < 1:
        raise ValueError("n_models must be >= 1")
    targets = [None] if spec.is_shared() else list(range(n_models))
    if not spec.is_shared() and n_models != spec.n_channels:
        raise ValueError("per-qubit features need one model per channel")
    quads: set = set()
    cubics: set = set()
    lin_used: set = set()
    params = 0
    for t in targets:
        plan = spec.plan(t)
        n_f = plan.n_features
        params += n_f * (n_models if t is None else 1)
        for term in plan.retained:
            g = plan.global_term(term)
            lin_used.update(g)
            if len(g) == 2:
                quads.add(g)
            elif len(g) == 3:
                cubics.add(g)
                quads.add(g[:2])
    products = len(quads) + len(cubics)
    demod = 0
    if spec.layout is Layout.PER_QUBIT_DEMODULATED and spec.count_demod:
        offsets = spec.channel_offsets()
        w = spec.window
        for c, end in enumerate(spec.ends):
            windows = {(j - offsets[c]) // 2 for j in lin_used if offsets[c] <= j < offsets[c + 1]}
            demod += sum(min((k + 1) * w, end) - k * w for k in windows)
        demod *= DEMOD_MULTS_PER_SAMPLE
    return Complexity(
        parameters=params,
        multiplications=demod + products + params,
        activations=0,
        demod_multiplications=demod,
        product_multiplications=products,
        weight_multiplications=params,
    )
