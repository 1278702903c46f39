"""Comparison mechanisms: uniform strictest privacy, sampling, and local-DP pipelines."""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import expit

from config import Config
from core import RandomSource, clamp_unit, laplace_sample
from mechanisms import release
from models import (
    ArgumentError,
    Dataset,
    EmpiricalStatistic,
    LdpClientReport,
    MechanismOutput,
    ObjectiveParams,
    PrivacyDemand,
    WeightVector,
)
from weights import ldp_weights

logger = logging.getLogger(__name__)


# ================= UNI ================= #
def uni_estimate(data: Dataset, eps: PrivacyDemand, rng: RandomSource) -> MechanismOutput:
    """Everyone gets the strictest demanded level; uniform weights."""
    strictest = PrivacyDemand.homogeneous(data.n, eps.min)
    return release(data, WeightVector.uniform(data.n), strictest, rng)


# ================= SAMPLING MECHANISM ================= #
def sm_inclusion_probabilities(eps: PrivacyDemand) -> np.ndarray:
    """(e^eps_i - 1) / (e^t - 1) with t = max eps, evaluated in log space.

    With t = inf the limit is 1 for public users and 0 for everyone else.
    """
    t = eps.max
    if np.isinf(t):
        return eps.public.astype(float)
    e = eps.eps
    return np.exp(e - t) * np.expm1(-e) / np.expm1(-t)


def sm_estimate(data: Dataset, eps: PrivacyDemand, rng: RandomSource) -> MechanismOutput:
    """Bernoulli-subsample users, then run the homogeneous t-DP estimator on the sample."""
    if data.n != eps.n:
        raise ArgumentError(f"{data.n} records for {eps.n} privacy levels")
    keep = rng.uniform(data.n) < sm_inclusion_probabilities(eps)
    m = int(np.count_nonzero(keep))
    if m == 0:
        logger.debug("sampling mechanism kept no users; returning the uninformative estimate")
        if data.is_categorical:
            return MechanismOutput(EmpiricalStatistic.frequency(np.full(data.k, 0.5)), 0.0, None)
        return MechanismOutput(EmpiricalStatistic.mean(0.5), 0.0, None)

    sample = data.with_records(data.records[keep])
    out = release(sample, WeightVector.uniform(m), PrivacyDemand.homogeneous(m, eps.max), rng)
    used = np.zeros(data.n)
    used[keep] = 1.0 / m
    return MechanismOutput(out.estimate, out.noise_scale, WeightVector(used))


# ================= LOCAL DP: FREQUENCY ================= #
def flip_probability(eps) -> np.ndarray:
    """1 / (1 + e^(eps/2)); 0 for public users."""
    return expit(-np.asarray(eps, dtype=float) / 2.0)


def _unbias_scale(eps) -> np.ndarray:
    """coth(eps/4); 1 for public users."""
    eps = np.asarray(eps, dtype=float)
    return 1.0 / np.tanh(eps / 4.0)


def ldp_freq_client(record, k, eps_i, rng: RandomSource) -> LdpClientReport:
    """k-RAPPOR: one-hot encode, then flip each bit independently."""
    if not 1 <= int(record) <= int(k):
        raise ArgumentError(f"record {record} outside 1..{k}")
    if not eps_i > 0:
        raise ArgumentError(f"privacy level must be positive, got {eps_i}")
    bits = np.zeros(int(k), dtype=np.int8)
    bits[int(record) - 1] = 1
    flips = rng.uniform(int(k)) < flip_probability(eps_i)
    return LdpClientReport("frequency", bits=bits ^ flips.astype(np.int8))


def ldp_freq_reports(data: Dataset, eps: PrivacyDemand, rng: RandomSource) -> np.ndarray:
    """Every user's k-RAPPOR bits as an n x k matrix; row i uses the i-th block of k draws."""
    if not data.is_categorical:
        raise ArgumentError("k-RAPPOR needs categorical data")
    if data.n != eps.n:
        raise ArgumentError(f"{data.n} records for {eps.n} privacy levels")
    onehot = np.zeros((data.n, data.k), dtype=np.int8)
    onehot[np.arange(data.n), data.records - 1] = 1
    flips = rng.uniform((data.n, data.k)) < flip_probability(eps.eps)[:, None]
    return onehot ^ flips.astype(np.int8)


def report_probability(bits, record, eps_i) -> float:
    """Probability that a user holding `record` sends exactly `bits`."""
    bits = np.asarray(bits, dtype=np.int8)
    onehot = np.zeros_like(bits)
    onehot[int(record) - 1] = 1
    q = float(flip_probability(eps_i))
    flipped = int(np.count_nonzero(bits != onehot))
    return q ** flipped * (1.0 - q) ** (bits.size - flipped)


def _ldp_freq_raw(reports, eps: PrivacyDemand, w: WeightVector) -> np.ndarray:
    bits = _stack_bits(reports)
    if not (bits.shape[0] == eps.n == w.n):
        raise ArgumentError(f"size mismatch: {bits.shape[0]} reports, {eps.n} levels, {w.n} weights")
    q = flip_probability(eps.eps)[:, None]
    scale = _unbias_scale(eps.eps)[:, None]
    return (w.w[:, None] * scale * (bits - q)).sum(axis=0)


def _stack_bits(reports):
    if isinstance(reports, np.ndarray):
        return reports.astype(float)
    return np.vstack([report.bits for report in reports]).astype(float)


def ldp_freq_aggregate(reports, eps: PrivacyDemand, w: WeightVector) -> MechanismOutput:
    """sum_i w_i coth(eps_i/4) (x_i - 1/(1+e^(eps_i/2))), clamped per coordinate.

    `noise_scale` is the standard deviation of each coordinate of the
    unclamped estimate.
    """
    raw = _ldp_freq_raw(reports, eps, w)
    q = flip_probability(eps.eps)
    spread = float(np.sqrt(np.sum(w.w ** 2 * _unbias_scale(eps.eps) ** 2 * q * (1.0 - q))))
    return MechanismOutput(EmpiricalStatistic.frequency(clamp_unit(raw)), spread, w)


def ldp_frequency(data: Dataset, eps: PrivacyDemand, w: WeightVector, rng: RandomSource) -> MechanismOutput:
    """Clients report through k-RAPPOR; the server aggregates with weights w."""
    return ldp_freq_aggregate(ldp_freq_reports(data, eps, rng), eps, w)


# ================= LOCAL DP: MEAN ================= #
def _ldp_mean_raw(data: Dataset, eps: PrivacyDemand, w: WeightVector, rng: RandomSource):
    if data.is_categorical:
        raise ArgumentError("local-DP mean needs scalar data")
    if not (data.n == eps.n == w.n):
        raise ArgumentError(f"size mismatch: {data.n} records, {eps.n} levels, {w.n} weights")
    inv_eps = 1.0 / eps.eps
    reports = data.records + inv_eps * laplace_sample(1.0, rng, size=data.n)
    spread = float(np.sqrt(2.0 * np.sum((w.w * inv_eps) ** 2)))
    return float(np.dot(w.w, reports)), spread


def ldp_mean(data: Dataset, eps: PrivacyDemand, rng: RandomSource, w: WeightVector = None) -> MechanismOutput:
    """Each user adds Laplace(1/eps_i) locally; the server returns the clamped weighted sum.

    Without explicit weights, the mean PAC weights at the configured beta are used.
    `noise_scale` is the standard deviation of the aggregated noise.
    """
    if w is None:
        w = ldp_weights("C", ObjectiveParams(1.0, Config.BETA, eps), task="mean").weights
    raw, spread = _ldp_mean_raw(data, eps, w, rng)
    return MechanismOutput(EmpiricalStatistic.mean(float(clamp_unit(raw))), spread, w)
