"""Greedy forward term selection with ridge shrinkage (FROLS style).

Candidates are orthogonalized (Gram-Schmidt) against the terms already
chosen. With orthogonal directions the ridge objective
``||y - sum theta_k q_k||^2 + lam * sum theta_k^2`` separates, and adding a
direction ``q`` lowers it by ``(q.r)^2 / (q.q + lam)``; each step adds the
candidate with the largest drop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ShotSet
from .errors import ConfigError
from .features import FeatureSpec, feature_matrix

N_INFO_VALUES_NONLINEAR = 30


@dataclass(frozen=True)
class Selection:
    indices: tuple[int, ...]
    info_values: tuple[float, ...]
    objective: tuple[float, ...]


def information_value(objective: float, n_obs: int, n_terms: int) -> float:
    """AIC-style criterion ``M ln(J / M) + 2 n``."""
    j = max(objective, np.finfo(float).tiny * n_obs)
    return n_obs * np.log(j / n_obs) + 2.0 * n_terms


def select_terms(features, targets, max_terms: int, ridge_param: float = 0.0,
                 rel_tol: float = 1e-12) -> Selection:
    """Forward selection over the rows of an ``(N_f, M)`` library.

    ``targets`` is ``(M,)`` or ``(d, M)``; multi-output objectives add up.
    Candidates that became numerically dependent on the chosen set
    (residual norm below ``rel_tol`` of their original norm) are skipped.
    Ties go to the lowest index.
    """
    if max_terms <= 0:
        raise ValueError("max_terms must be positive")
    x = np.array(features, dtype=np.float64).T
    m, n_f = x.shape
    if max_terms > n_f:
        raise ValueError(f"max_terms={max_terms} exceeds library size {n_f}")
    r = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if r.shape[1] != m:
        r = r.T
    r = r.T.copy()
    if r.shape[0] != m:
        raise ValueError("targets and features disagree on the number of shots")
    lam = float(ridge_param)
    if lam < 0:
        raise ValueError("ridge_param must be >= 0")
    norms0 = np.einsum("ij,ij->j", x, x)
    active = norms0 > 0
    objective = float(np.sum(r * r))
    chosen, info, objs = [], [], []
    for step in range(max_terms):
        nrm = np.einsum("ij,ij->j", x, x)
        g = x.T @ r
        gain = np.einsum("ij,ij->i", g, g) / (nrm + lam)
        ok = active & (nrm > rel_tol * norms0)
        if not ok.any():
            break
        gain = np.where(ok, gain, -np.inf)
        j = int(np.argmax(gain))
        q = x[:, j].copy()
        nq = nrm[j]
        theta = g[j] / (nq + lam)
        r -= np.outer(q, theta)
        objective -= float(gain[j])
        chosen.append(j)
        objs.append(max(objective, 0.0))
        info.append(information_value(objs[-1], m, step + 1))
        active[j] = False
        # deflate the remaining candidates
        coef = (q @ x) / nq
        coef[~active] = 0.0
        x -= np.outer(q, coef)
    return Selection(tuple(chosen), tuple(info), tuple(objs))


def truncate_terms(info_values) -> int:
    """Number of terms kept: the first ``n`` (1-based) where the next
    information value moves by less than 1% of the full range."""
    v = np.asarray(info_values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("need at least two information values")
    span = v.max() - v.min()
    if span == 0:
        return 1
    gaps = np.abs(np.diff(v))
    hit = np.flatnonzero(gaps < 0.01 * span)
    return int(hit[0]) + 1 if hit.size else int(v.size)


def reduced_spec(spec: FeatureSpec, selected, target: int | None = None) -> FeatureSpec:
    """Spec emitting only ``selected`` (indices into the spec's current vector)."""
    n_f = spec.n_features(target)
    sel = [int(i) for i in selected]
    if not sel or any(not 0 <= i < n_f for i in sel) or len(set(sel)) != len(sel):
        raise ConfigError(f"selected indices must be unique and within [0, {n_f})")
    base = spec.term_subset
    return spec.with_subset([base[i] for i in sel] if base is not None else sel)


def default_max_terms(spec: FeatureSpec, target: int | None = None) -> int:
    n_f = spec.n_features(target)
    return n_f if spec.degree == 1 else min(N_INFO_VALUES_NONLINEAR, n_f)


def select_for_shotset(train: ShotSet, spec: FeatureSpec, ridge_param: float = 0.0,
                       target: int | None = None, max_terms: int | None = None) -> tuple[FeatureSpec, Selection]:
    """Select terms on a training set and return the truncated, reduced spec."""
    o = feature_matrix(train, spec, target).T
    if train.n_classes > 2:
        y = (train.labels[None, :] == np.arange(train.n_classes)[:, None]).astype(float)
    else:
        y = train.qubit_labels(0 if target is None else target).astype(float)
    sel = select_terms(o, y, max_terms or default_max_terms(spec, target), ridge_param)
    n = truncate_terms(sel.info_values) if len(sel.info_values) >= 2 else len(sel.indices)
    return reduced_spec(spec, sel.indices[:n], target), sel
