"""Exact statistics, error metrics and seeded randomness shared by every estimator."""

from __future__ import annotations

import logging

import numpy as np

from models import ArgumentError, Dataset, EmpiricalStatistic, PrivacyDemand, WeightVector

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1
# Largest |u - 1/2| fed to the inverse CDF; keeps log1p away from -1.
_HALF_OPEN = 0.5 - 2.0 ** -54


# ================= RANDOM SOURCE ================= #
class RandomSource:
    """Seeded stream with counter-derived substreams.

    A source is identified by (seed, key). `substream(i)` appends i to the key,
    so sibling substreams never share state and their draws do not depend on
    what the parent (or any sibling) has consumed.
    """

    def __init__(self, seed, key=()):
        self.seed = int(seed) & SEED_MASK
        self.key = tuple(int(part) for part in key)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._generator = np.random.Generator(np.random.Philox(sequence))

    def substream(self, index):
        return RandomSource(self.seed, self.key + (int(index),))

    @property
    def generator(self):
        return self._generator

    def uniform(self, size=None):
        """Draw from [0, 1)."""
        return self._generator.random(size)

    def permutation(self, n):
        return self._generator.permutation(int(n))

    def __repr__(self):
        return f"<RandomSource seed={self.seed} key={self.key}>"


# ================= EXACT STATISTICS ================= #
def exact_statistic(data: Dataset) -> EmpiricalStatistic:
    """Empirical frequency (categorical) or mean (scalar) of the records."""
    if data.n == 0:
        raise ArgumentError("cannot compute a statistic of an empty dataset")
    if data.is_categorical:
        counts = np.bincount(data.records - 1, minlength=data.k)
        return EmpiricalStatistic.frequency(counts / data.n)
    return EmpiricalStatistic.mean(float(np.mean(data.records)))


def linf_error(est: EmpiricalStatistic, truth: EmpiricalStatistic) -> float:
    """Largest absolute componentwise difference between two statistics."""
    if est.kind != truth.kind or est.values.size != truth.values.size:
        raise ArgumentError(
            f"cannot compare {est.kind}[{est.values.size}] with {truth.kind}[{truth.values.size}]"
        )
    return float(np.max(np.abs(est.values - truth.values)))


def weighted_statistic(data: Dataset, weights: WeightVector) -> np.ndarray:
    """Weighted histogram (categorical) or weighted mean (scalar), before any noise."""
    if weights.n != data.n:
        raise ArgumentError(f"{weights.n} weights for {data.n} records")
    if data.is_categorical:
        return np.bincount(data.records - 1, weights=weights.w, minlength=data.k).astype(float)
    return np.array([float(np.dot(weights.w, data.records))])


# ================= PRIVACY RATIOS ================= #
def ratio_norm(weights: WeightVector, eps: PrivacyDemand) -> float:
    """||w / eps||_inf, where any term with eps = inf counts as 0."""
    if weights.n != eps.n:
        raise ArgumentError(f"{weights.n} weights for {eps.n} privacy levels")
    return float(np.max(_ratios(weights.w, eps.eps)))


def _ratios(w, eps):
    finite = np.isfinite(eps)
    out = np.zeros_like(w, dtype=float)
    out[finite] = w[finite] / eps[finite]
    return out


# ================= LAPLACE NOISE ================= #
def laplace_sample(scale: float, rng: RandomSource, size=None):
    """Zero-mean Laplace draw(s) with scale b, one uniform per sample via the inverse CDF."""
    if scale < 0 or np.isnan(scale):
        raise ArgumentError(f"Laplace scale must be >= 0, got {scale}")
    u = rng.uniform(size) - 0.5
    if scale == 0:
        return 0.0 if size is None else np.zeros(size)
    u = np.clip(u, -_HALF_OPEN, _HALF_OPEN)
    draws = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return float(draws) if size is None else draws


# ================= PERMUTATION ================= #
def permute_uniform(data: Dataset, rng: RandomSource) -> Dataset:
    """Release the records through a uniformly random permutation."""
    if data.n <= 1:
        return data
    return data.with_records(data.records[rng.permutation(data.n)])


def clamp_unit(values):
    return np.clip(values, 0.0, 1.0)
