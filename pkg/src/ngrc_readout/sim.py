"""Synthetic dispersive-readout shots.

Each class has a complex steady-state response; the mean trajectory rings
up as ``s_c * (1 - exp(-kappa * n))``. A shot follows its prepared class's
trajectory until at most one stochastic jump (relaxation one level down,
or excitation one level up), then continues on the new class's trajectory.
Noise is i.i.d. per sample and quadrature, Gaussian or Student-t.

Randomness comes from Philox streams keyed by ``(seed, shot_index)`` so
any shot can be regenerated on its own and parallel generation gives the
same bytes as serial generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Layout, Shot, ShotSet, IQTrace, bits_to_label, n_configurations, philox


@dataclass(frozen=True)
class QubitSimParams:
    """Simulator knobs for one qubit, all in time-step units."""

    state_means: tuple[complex, ...] = (1.0 + 0j, -1.0 + 0j)
    kappa: float = 0.05
    t1_steps: float = math.inf
    excitation_prob_per_step: float = 0.0
    noise_sigma: float = 1.0
    if_freq: float = 0.0
    noise_kind: str = "gaussian"
    student_nu: float = 5.0

    def __post_init__(self):
        means = tuple(complex(s) for s in self.state_means)
        object.__setattr__(self, "state_means", means)
        if len(means) < 2:
            raise ValueError("need at least two class responses")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")
        if not 0.0 <= self.if_freq < 0.5:
            raise ValueError("if_freq must lie in [0, 0.5)")
        if not self.t1_steps > 0:
            raise ValueError("t1_steps must be > 0 (inf disables relaxation)")
        if not 0.0 <= self.excitation_prob_per_step <= 1.0:
            raise ValueError("excitation_prob_per_step must lie in [0, 1]")
        if self.noise_kind not in ("gaussian", "student_t"):
            raise ValueError(f"unknown noise_kind {self.noise_kind!r}")
        if self.noise_kind == "student_t" and not self.student_nu > 2:
            raise ValueError("student_nu must exceed 2 so the noise variance is finite")

    @property
    def n_classes(self) -> int:
        return len(self.state_means)


def mean_trajectory(params: QubitSimParams, cls: int, n_samples: int) -> np.ndarray:
    n = np.arange(n_samples)
    return params.state_means[cls] * (1.0 - np.exp(-params.kappa * n))


def draw_jump(params: QubitSimParams, prepared_class: int, n_samples: int,
              rng: np.random.Generator) -> tuple[int, int]:
    """Return ``(jump_index, final_class)``; ``jump_index == n_samples`` means no jump.

    Samples ``n >= jump_index`` follow ``final_class``.
    """
    jump, final = n_samples, prepared_class
    if prepared_class > 0 and math.isfinite(params.t1_steps):
        t = int(math.floor(rng.exponential(params.t1_steps)))
        if t < jump:
            jump, final = t, prepared_class - 1
    p = params.excitation_prob_per_step
    if p > 0 and prepared_class < params.n_classes - 1:
        t = int(rng.geometric(p)) - 1
        if t < jump:
            jump, final = t, prepared_class + 1
    return jump, final


def _noise(params: QubitSimParams, rng: np.random.Generator, n_samples: int, sigma=None) -> np.ndarray:
    sigma = params.noise_sigma if sigma is None else sigma
    if params.noise_kind == "gaussian":
        raw = rng.standard_normal(2 * n_samples)
    else:
        nu = params.student_nu
        raw = rng.standard_t(nu, 2 * n_samples) * math.sqrt((nu - 2) / nu)
    return sigma * (raw[:n_samples] + 1j * raw[n_samples:])


def _baseband(params, prepared_class, n_samples, rng):
    jump, final = draw_jump(params, prepared_class, n_samples, rng)
    z = mean_trajectory(params, prepared_class, n_samples)
    if jump < n_samples:
        z[jump:] = mean_trajectory(params, final, n_samples)[jump:]
    return z


def simulate_trace(params: QubitSimParams, prepared_class: int, n_samples: int,
                   rng: np.random.Generator) -> np.ndarray:
    if not 0 <= prepared_class < params.n_classes:
        raise ValueError(f"class {prepared_class} outside [0, {params.n_classes})")
    z = _baseband(params, prepared_class, n_samples, rng)
    if params.noise_sigma > 0:
        z = z + _noise(params, rng, n_samples)
    return z


def simulate_shot(params: QubitSimParams, prepared_class: int, rng_seed: int,
                  n_samples: int = 200, shot_index: int = 0) -> Shot:
    rng = philox(rng_seed, shot_index)
    z = simulate_trace(params, prepared_class, n_samples, rng)
    return Shot((IQTrace.from_complex(z),), prepared_class)


@dataclass(frozen=True)
class CrosstalkModel:
    """Entry ``(j, k)`` scales how qubit k's baseband leaks into channel j."""

    coupling: np.ndarray

    def __post_init__(self):
        c = np.array(self.coupling, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("coupling must be a square matrix")
        if not np.all(np.isfinite(c)):
            raise ValueError("coupling entries must be finite")
        if not np.all(np.diag(c) == 1.0):
            raise ValueError("coupling diagonal must be 1")
        c.setflags(write=False)
        object.__setattr__(self, "coupling", c)

    @classmethod
    def identity(cls, n: int) -> "CrosstalkModel":
        return cls(np.eye(n))

    @classmethod
    def uniform(cls, n: int, strength: float) -> "CrosstalkModel":
        return cls(np.eye(n) + strength * (1 - np.eye(n)))

    @classmethod
    def nearest_neighbor(cls, n: int, strength: float) -> "CrosstalkModel":
        idx = np.arange(n)
        return cls(np.eye(n) + strength * (np.abs(idx[:, None] - idx[None, :]) == 1))

    @property
    def n_qubits(self) -> int:
        return self.coupling.shape[0]


def _prepared_list(prepared_bits, n_qubits):
    if isinstance(prepared_bits, str):
        if len(prepared_bits) != n_qubits:
            raise ValueError(f"need {n_qubits} bits, got {prepared_bits!r}")
        label = bits_to_label(prepared_bits)
    elif isinstance(prepared_bits, (int, np.integer)):
        label = int(prepared_bits)
    else:
        label = bits_to_label(prepared_bits)
    if not 0 <= label < 2**n_qubits:
        raise ValueError(f"prepared label {label} out of range")
    return label, [(label >> j) & 1 for j in range(n_qubits)]


def simulate_multiplexed(params: Sequence[QubitSimParams], crosstalk: CrosstalkModel,
                         prepared_bits, n_samples: int, rng_seed: int, shot_index: int = 0,
                         noise_sigma: float | None = None) -> Shot:
    """One raw frequency-multiplexed shot (single channel).

    ``noise_sigma`` is the per-quadrature noise on the raw channel; it
    defaults to the root-sum-square of the qubits' ``noise_sigma``.
    """
    rng = philox(rng_seed, shot_index)
    z = multiplexed_trace(params, crosstalk, prepared_bits, n_samples, rng, noise_sigma)
    label, _ = _prepared_list(prepared_bits, len(params))
    return Shot((IQTrace.from_complex(z),), label)


def multiplexed_trace(params, crosstalk, prepared_bits, n_samples, rng, noise_sigma=None):
    nq = len(params)
    if crosstalk.n_qubits != nq:
        raise ValueError(f"crosstalk is {crosstalk.n_qubits}x{crosstalk.n_qubits} for {nq} qubits")
    freqs = [p.if_freq for p in params]
    if len(set(freqs)) != len(freqs):
        raise ValueError(f"duplicate if_freq entries: {freqs}")
    _, bits = _prepared_list(prepared_bits, nq)
    base = np.stack([_baseband(p, b, n_samples, rng) for p, b in zip(params, bits)])
    mixed = crosstalk.coupling @ base
    n = np.arange(n_samples)
    carriers = np.exp(2j * np.pi * np.outer(freqs, n))
    z = (carriers * mixed).sum(axis=0)
    if noise_sigma is None:
        noise_sigma = math.sqrt(sum(p.noise_sigma**2 for p in params))
    if noise_sigma > 0:
        z = z + _noise(params[0], rng, n_samples, sigma=noise_sigma)
    return z


@dataclass(frozen=True)
class SimConfig:
    """Dataset recipe. ``task`` is ``"single"`` (one demodulated channel,
    ``n_classes`` from the qubit's responses) or ``"multiplexed"`` (raw
    single-channel trace, packed binary labels)."""

    qubits: tuple[QubitSimParams, ...]
    task: str = "single"
    n_samples: int = 200
    shots_per_config: int = 100
    crosstalk: CrosstalkModel | None = None
    mux_noise_sigma: float | None = None
    lpf_len: int = 4
    name: str = ""
    extra_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if self.task not in ("single", "multiplexed"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.n_samples < 1 or self.shots_per_config < 0:
            raise ValueError("n_samples must be positive and shots_per_config non-negative")
        if self.task == "single" and len(self.qubits) != 1:
            raise ValueError("single task takes exactly one qubit")
        if self.task == "multiplexed":
            if any(q.n_classes != 2 for q in self.qubits):
                raise ValueError("multiplexed qubits must be two-level")
            if self.crosstalk is None:
                object.__setattr__(self, "crosstalk", CrosstalkModel.identity(len(self.qubits)))
            freqs = [q.if_freq for q in self.qubits]
            if len(set(freqs)) != len(freqs):
                raise ValueError(f"duplicate if_freq entries: {freqs}")

    @property
    def n_qubits(self) -> int:
        return len(self.qubits) if self.task == "multiplexed" else 1

    @property
    def n_classes(self) -> int:
        return 2 if self.task == "multiplexed" else self.qubits[0].n_classes


def generate_dataset(config: SimConfig, rng_seed: int, meta: dict | None = None) -> ShotSet:
    """All prepared configurations, ``shots_per_config`` each, configuration-major."""
    n_conf = n_configurations(config.n_qubits, config.n_classes)
    spc, n = config.shots_per_config, config.n_samples
    iq = np.empty((n_conf * spc, 1, n), dtype=np.complex128)
    labels = np.repeat(np.arange(n_conf), spc)
    for m, label in enumerate(labels):
        rng = philox(rng_seed, m)
        if config.task == "single":
            iq[m, 0] = simulate_trace(config.qubits[0], int(label), n, rng)
        else:
            iq[m, 0] = multiplexed_trace(config.qubits, config.crosstalk, int(label), n, rng,
                                         config.mux_noise_sigma)
    info = {
        "source": "ngrc_readout.sim",
        "seed": str(int(rng_seed)),
        "shots_per_config": str(spc),
        "task": config.task,
    }
    if config.name:
        info["preset"] = config.name
    if config.task == "multiplexed":
        info["if_freqs"] = ",".join(repr(q.if_freq) for q in config.qubits)
        info["lpf_len"] = str(config.lpf_len)
    info.update({str(k): str(v) for k, v in config.extra_meta.items()})
    info.update(meta or {})
    layout = Layout.RAW_MULTIPLEXED if config.task == "multiplexed" else Layout.PER_QUBIT_DEMODULATED
    return ShotSet(iq, labels, config.n_qubits, config.n_classes, layout, info)
