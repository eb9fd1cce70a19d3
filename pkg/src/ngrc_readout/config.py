"""Flat ``key = value`` configuration files and named presets.

A config file holds one assignment per line; ``#`` starts a comment.
``preset = <name>`` pulls in a preset's keys first, and any other key in the
file overrides it. The same format describes simulator runs (``task`` and
friends), feature specs (``degree``, ``window``, ...) and training options.

Simulator keys
    task              single | multiplexed
    n_samples         trace length in time steps
    shots_per_config  shots per prepared configuration
    state_means       single task: complex class responses, e.g. ``1,-1``
    n_qubits          multiplexed task: number of qubits
    amplitude         multiplexed: qubit j responds with -a e^{i phi_j} / +a e^{i phi_j}
    phases            multiplexed: phi_j in radians, one per qubit
    if_freqs          multiplexed: carrier per qubit, cycles per sample
    coupling          off-diagonal crosstalk strength
    coupling_kind     uniform | nearest
    mux_noise_sigma   raw-channel noise (default: root-sum-square of noise_sigma)
    lpf_len           demodulation low-pass length recorded for the data
    kappa, t1_steps, excitation_prob, noise_sigma, noise_kind, student_nu
                      scalars, or comma lists with one entry per qubit

Feature keys are those of :meth:`FeatureSpec.from_mapping` plus
``n_models`` (how many discriminators a cost count assumes).

Training keys: ``split``, ``alpha_grid`` (``single``, ``multi`` or a comma
list), ``batch_size``, ``select_terms`` and ``max_terms``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ConfigError
from .features import FeatureSpec
from .sim import CrosstalkModel, QubitSimParams, SimConfig
from .trainer import alpha_grid

READOUT_MASKS = "500,500,282,479,295"
FIVE_Q_FREQS = "0.05,0.15,0.25,0.35,0.45"

SIM_PRESETS: dict[str, dict[str, str]] = {
    "1q-demo": {
        "task": "single", "n_samples": "200", "shots_per_config": "100",
        "state_means": "1,-1", "kappa": "0.05", "noise_sigma": "10",
    },
    # Gaussian noise and no jumps: the matched filter is the optimal linear filter
    "1q-gaussian": {
        "task": "single", "n_samples": "200", "shots_per_config": "2000",
        "state_means": "1,-1", "kappa": "0.05", "noise_sigma": "6",
    },
    "1q-relaxation": {
        "task": "single", "n_samples": "200", "shots_per_config": "15000",
        "state_means": "1,-1", "kappa": "0.05", "noise_sigma": "3", "t1_steps": "100",
    },
    "1q-3state": {
        "task": "single", "n_samples": "200", "shots_per_config": "3000",
        "state_means": "0.5-0.8660254037844386j,1,0.5+0.8660254037844386j",
        "kappa": "0.05", "noise_sigma": "3", "t1_steps": "600", "excitation_prob": "0.001",
    },
    "5q-coupled": {
        "task": "multiplexed", "n_qubits": "5", "n_samples": "500", "shots_per_config": "500",
        "amplitude": "1", "phases": "0,0.15,0.3,0.45,0.6", "if_freqs": FIVE_Q_FREQS,
        "coupling": "0.1", "coupling_kind": "uniform", "lpf_len": "10",
        "kappa": "0.05", "noise_sigma": "3", "t1_steps": "20000",
    },
}

_FIVE_Q = {"n_samples": "500", "n_channels": "5", "masks": READOUT_MASKS,
           "if_freqs": FIVE_Q_FREQS, "lpf_len": "10", "n_models": "5"}

FEATURE_PRESETS: dict[str, dict[str, str]] = {
    # one linear model per qubit on the raw multiplexed trace, every sample kept
    "5q-linear-nodemod": {"degree": "1", "window": "1", "n_samples": "500", "n_channels": "1",
                          "layout": "raw_multiplexed", "n_models": "5"},
    "5q-linear-w10": {**_FIVE_Q, "degree": "1", "window": "10"},
    "5q-quadratic-w50": {**_FIVE_Q, "degree": "2", "window": "50"},
    "5q-cubic-w200": {**_FIVE_Q, "degree": "3", "window": "200"},
    "5q-quadratic-w100": {**_FIVE_Q, "degree": "2", "window": "100"},
    "5q-quadratic-w100-own": {**_FIVE_Q, "degree": "2", "window": "100", "cross_qubit": "false"},
    "1q-linear-w1": {"degree": "1", "window": "1", "n_samples": "200", "count_demod": "false"},
    "1q-linear-w10": {"degree": "1", "window": "10", "n_samples": "200", "count_demod": "false"},
    "1q-quadratic-w20": {"degree": "2", "window": "20", "n_samples": "200", "count_demod": "false"},
    "1q-quadratic-w50": {"degree": "2", "window": "50", "n_samples": "200", "count_demod": "false"},
    "1q-cubic-w50": {"degree": "3", "window": "50", "n_samples": "200", "count_demod": "false"},
}

TABLE_PRESETS = ("5q-linear-nodemod", "5q-linear-w10", "5q-quadratic-w50", "5q-cubic-w200")

SIM_KEYS = {
    "task", "n_samples", "shots_per_config", "state_means", "n_qubits", "amplitude", "phases",
    "if_freqs", "coupling", "coupling_kind", "mux_noise_sigma", "lpf_len", "kappa", "t1_steps",
    "excitation_prob", "noise_sigma", "noise_kind", "student_nu", "name",
}
FEATURE_KEYS = {
    "degree", "window", "n_samples", "n_channels", "include_constant", "masks", "cross_qubit",
    "neighbor_radius", "term_subset", "layout", "if_freqs", "lpf_len", "count_demod", "n_models",
}
TRAIN_KEYS = {"split", "alpha_grid", "batch_size", "select_terms", "max_terms"}


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines. Duplicate keys and lines without ``=`` are errors."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def expand_preset(kv: Mapping[str, str]) -> dict[str, str]:
    """Merge a ``preset`` key's values under the explicit ones."""
    kv = dict(kv)
    name = kv.pop("preset", None)
    if name is None:
        return kv
    base = SIM_PRESETS.get(name) or FEATURE_PRESETS.get(name)
    if base is None:
        raise ConfigError(f"preset: unknown preset {name!r}; known: {', '.join(all_presets())}")
    merged = {**base, **kv}
    if name in SIM_PRESETS:
        merged.setdefault("name", name)
    return merged


def all_presets() -> list[str]:
    return sorted(SIM_PRESETS) + sorted(FEATURE_PRESETS)


def load_config(source) -> dict[str, str]:
    """Read a config file, or expand a bare preset name."""
    s = str(source)
    if s in SIM_PRESETS or s in FEATURE_PRESETS:
        return expand_preset({"preset": s})
    path = Path(s)
    if not path.is_file():
        raise ConfigError(f"config {s!r} is neither a file nor a preset name")
    return expand_preset(parse_kv(path.read_text(), str(path)))


def _check_keys(kv: Mapping[str, str], allowed: set[str], what: str) -> None:
    unknown = sorted(set(kv) - allowed)
    if unknown:
        raise ConfigError(f"unknown {what} keys: {', '.join(unknown)}")


def _conv(kv, key, conv, default=None):
    if key not in kv:
        return default
    try:
        return conv(kv[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}: cannot parse {kv[key]!r} ({exc})") from None


def _list(conv):
    def parse(s: str):
        items = [x.strip() for x in s.split(",") if x.strip()]
        if not items:
            raise ValueError("empty list")
        return [conv(x) for x in items]
    return parse


def _complex(s: str) -> complex:
    return complex(s.replace(" ", ""))


def _per_qubit(kv, key, conv, n, default):
    vals = _conv(kv, key, _list(conv), [default])
    if len(vals) == 1:
        return vals * n
    if len(vals) != n:
        raise ConfigError(f"{key}: need 1 or {n} values, got {len(vals)}")
    return vals


def sim_config(kv: Mapping[str, str]) -> SimConfig:
    """Build a :class:`SimConfig` from simulator keys."""
    kv = dict(kv)
    _check_keys(kv, SIM_KEYS, "simulator")
    task = kv.get("task", "single")
    if task not in ("single", "multiplexed"):
        raise ConfigError(f"task: expected single or multiplexed, got {task!r}")
    n_samples = _conv(kv, "n_samples", int, 200)
    spc = _conv(kv, "shots_per_config", int, 100)
    nq = _conv(kv, "n_qubits", int, 1) if task == "multiplexed" else 1
    if nq < 1:
        raise ConfigError("n_qubits: must be >= 1")

    kappa = _per_qubit(kv, "kappa", float, nq, 0.05)
    t1 = _per_qubit(kv, "t1_steps", float, nq, math.inf)
    pex = _per_qubit(kv, "excitation_prob", float, nq, 0.0)
    sigma = _per_qubit(kv, "noise_sigma", float, nq, 1.0)
    nu = _per_qubit(kv, "student_nu", float, nq, 5.0)
    kind = kv.get("noise_kind", "gaussian")
    if task == "single":
        for key in ("amplitude", "phases", "if_freqs", "coupling", "coupling_kind", "mux_noise_sigma"):
            if key in kv:
                raise ConfigError(f"{key}: only valid for task = multiplexed")
        means = [tuple(_conv(kv, "state_means", _list(_complex), [1 + 0j, -1 + 0j]))]
        freqs = [0.0]
    else:
        if "state_means" in kv:
            raise ConfigError("state_means: use amplitude and phases for task = multiplexed")
        amp = _conv(kv, "amplitude", float, 1.0)
        phases = _per_qubit(kv, "phases", float, nq, 0.0)
        means = [(-amp * cmath.exp(1j * p), amp * cmath.exp(1j * p)) for p in phases]
        if "if_freqs" not in kv:
            raise ConfigError("if_freqs: required for task = multiplexed")
        freqs = _per_qubit(kv, "if_freqs", float, nq, 0.0)
    try:
        qubits = tuple(
            QubitSimParams(state_means=means[j], kappa=kappa[j], t1_steps=t1[j],
                           excitation_prob_per_step=pex[j], noise_sigma=sigma[j],
                           if_freq=freqs[j], noise_kind=kind, student_nu=nu[j])
            for j in range(nq))
        crosstalk = None
        if task == "multiplexed":
            strength = _conv(kv, "coupling", float, 0.0)
            ck = kv.get("coupling_kind", "uniform")
            if ck == "uniform":
                crosstalk = CrosstalkModel.uniform(nq, strength)
            elif ck == "nearest":
                crosstalk = CrosstalkModel.nearest_neighbor(nq, strength)
            else:
                raise ConfigError(f"coupling_kind: expected uniform or nearest, got {ck!r}")
        return SimConfig(qubits, task=task, n_samples=n_samples, shots_per_config=spc,
                         crosstalk=crosstalk, mux_noise_sigma=_conv(kv, "mux_noise_sigma", float),
                         lpf_len=_conv(kv, "lpf_len", int, 4), name=kv.get("name", ""))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def feature_spec(kv: Mapping[str, str]) -> tuple[FeatureSpec, int | None]:
    """``(spec, n_models)`` from feature keys; ``n_models`` is ``None`` when unset."""
    kv = dict(kv)
    _check_keys(kv, FEATURE_KEYS, "feature")
    n_models = _conv(kv, "n_models", int)
    kv.pop("n_models", None)
    try:
        return FeatureSpec.from_mapping(kv), n_models
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class TrainOptions:
    split: float = 0.5
    alphas: tuple[float, ...] | None = None
    batch_size: int = 4096
    select_terms: bool = False
    max_terms: int | None = None


def parse_alpha_grid(value: str | None) -> tuple[float, ...] | None:
    if value is None or value == "auto":
        return None
    if value in ("single", "multi"):
        return tuple(alpha_grid(value))
    try:
        vals = tuple(float(x) for x in value.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"alpha_grid: cannot parse {value!r}") from None
    if not vals or any(not a >= 0 or not np.isfinite(a) for a in vals):
        raise ConfigError("alpha_grid: need finite values >= 0")
    return vals


def train_options(kv: Mapping[str, str]) -> TrainOptions:
    kv = {k: v for k, v in kv.items() if k in TRAIN_KEYS}
    split = _conv(kv, "split", float, 0.5)
    if not 0.0 < split < 1.0:
        raise ConfigError("split: training fraction must lie in (0, 1)")
    batch = _conv(kv, "batch_size", int, 4096)
    if batch < 1:
        raise ConfigError("batch_size: must be >= 1")
    return TrainOptions(split, parse_alpha_grid(kv.get("alpha_grid")), batch,
                        _conv(kv, "select_terms", lambda s: s.lower() in ("1", "true", "yes"), False),
                        _conv(kv, "max_terms", int))


def split_config(kv: Mapping[str, str]) -> tuple[dict, dict]:
    """Separate feature keys from training keys; anything else is an error."""
    _check_keys(kv, FEATURE_KEYS | TRAIN_KEYS, "feature/training")
    feats = {k: v for k, v in kv.items() if k in FEATURE_KEYS}
    train = {k: v for k, v in kv.items() if k in TRAIN_KEYS}
    return feats, train
