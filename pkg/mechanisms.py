"""Weighted Laplace mechanisms for heterogeneous privacy, plus their privacy audits."""

from __future__ import annotations

import logging

import numpy as np

from core import RandomSource, clamp_unit, laplace_sample, ratio_norm, weighted_statistic
from models import (
    ArgumentError,
    Dataset,
    EmpiricalStatistic,
    MechanismOutput,
    PrivacyDemand,
    WeightVector,
)

logger = logging.getLogger(__name__)


def _check(data: Dataset, w: WeightVector, eps: PrivacyDemand):
    if not (data.n == w.n == eps.n):
        raise ArgumentError(f"size mismatch: {data.n} records, {w.n} weights, {eps.n} privacy levels")


# ================= HPF ================= #
def _hpf_raw(data: Dataset, w: WeightVector, eps: PrivacyDemand, rng: RandomSource):
    """Weighted histogram plus Laplace(2||w/eps||_inf) on every bin, before clamping."""
    if not data.is_categorical:
        raise ArgumentError("frequency estimation needs categorical data")
    _check(data, w, eps)
    scale = 2.0 * ratio_norm(w, eps)
    noise = laplace_sample(scale, rng, size=data.k)
    return weighted_statistic(data, w) + noise, scale


def hpf(data: Dataset, w: WeightVector, eps: PrivacyDemand, rng: RandomSource) -> MechanismOutput:
    """Private frequency estimate; each bin clamped to [0, 1], no renormalization."""
    raw, scale = _hpf_raw(data, w, eps, rng)
    return MechanismOutput(EmpiricalStatistic.frequency(clamp_unit(raw)), scale, w)


# ================= HPM ================= #
def _hpm_raw(data: Dataset, w: WeightVector, eps: PrivacyDemand, rng: RandomSource):
    if data.is_categorical:
        raise ArgumentError("mean estimation needs scalar data")
    _check(data, w, eps)
    scale = ratio_norm(w, eps)
    return float(weighted_statistic(data, w)[0]) + laplace_sample(scale, rng), scale


def hpm(data: Dataset, w: WeightVector, eps: PrivacyDemand, rng: RandomSource) -> MechanismOutput:
    """Private mean estimate clamped to [0, 1]."""
    raw, scale = _hpm_raw(data, w, eps, rng)
    return MechanismOutput(EmpiricalStatistic.mean(float(clamp_unit(raw))), scale, w)


def release(data: Dataset, w: WeightVector, eps: PrivacyDemand, rng: RandomSource) -> MechanismOutput:
    """HPF for categorical data, HPM for scalar data."""
    return hpf(data, w, eps, rng) if data.is_categorical else hpm(data, w, eps, rng)


# ================= PRIVACY AUDITS ================= #
def dp_ratio_audit(w: WeightVector, eps: PrivacyDemand, task="frequency") -> np.ndarray:
    """Per-user worst-case log density ratio: sensitivity_i / noise scale.

    Sensitivity is 2 w_i for the weighted histogram and w_i for the weighted
    mean; the matching noise scales are 2||w/eps||_inf and ||w/eps||_inf.
    Without noise, users with w_i > 0 are unprotected (inf).
    """
    if task not in ("frequency", "mean"):
        raise ArgumentError(f"unknown task {task!r}")
    factor = 2.0 if task == "frequency" else 1.0
    scale = factor * ratio_norm(w, eps)
    sensitivity = factor * w.w
    if scale == 0:
        return np.where(sensitivity > 0, np.inf, 0.0)
    return sensitivity / scale


def free_privacy_audit(w: WeightVector, eps: PrivacyDemand) -> np.ndarray:
    """Effective privacy level per user, w_i / ||w/eps||_inf (<= eps_i).

    When ||w/eps||_inf = 0 every weighted user is public and the levels are
    reported as 0.
    """
    norm = ratio_norm(w, eps)
    if norm == 0:
        return np.zeros(w.n)
    return w.w / norm


def privacy_slack(w: WeightVector, eps: PrivacyDemand) -> np.ndarray:
    """Free privacy: demanded level minus the level actually consumed."""
    return eps.eps - free_privacy_audit(w, eps)
