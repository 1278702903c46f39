import itertools
import math

import numpy as np
import pytest

from baselines import (
    _ldp_freq_raw,
    _ldp_mean_raw,
    _unbias_scale,
    flip_probability,
    ldp_freq_aggregate,
    ldp_freq_client,
    ldp_freq_reports,
    ldp_frequency,
    ldp_mean,
    report_probability,
    sm_estimate,
    sm_inclusion_probabilities,
    uni_estimate,
)
from core import RandomSource, exact_statistic
from mechanisms import hpf
from models import ArgumentError, Dataset, PrivacyDemand, WeightVector


# ================= UNI ================= #
def test_uni_homogeneous_matches_uniform_hpf():
    data = Dataset.categorical([1, 2, 2, 1, 3], k=3)
    eps = PrivacyDemand([0.7] * 5)
    a = uni_estimate(data, eps, RandomSource(3))
    b = hpf(data, WeightVector.uniform(5), eps, RandomSource(3))
    assert a.estimate.values.tolist() == b.estimate.values.tolist()


def test_uni_all_public_is_exact():
    data = Dataset.categorical([1, 2, 2, 2], k=2)
    out = uni_estimate(data, PrivacyDemand([np.inf] * 4), RandomSource(0))
    assert out.estimate.values.tolist() == exact_statistic(data).values.tolist()


def test_uni_noise_follows_the_strictest_user():
    eps = np.full(1000, np.inf)
    eps[0] = 0.001
    data = Dataset.categorical(np.arange(1000) % 2 + 1, k=2)
    assert uni_estimate(data, PrivacyDemand(eps), RandomSource(0)).noise_scale == pytest.approx(2.0)


# ================= SAMPLING ================= #
def test_sm_inclusion_probabilities():
    assert sm_inclusion_probabilities(PrivacyDemand([0.5, 0.5])) == pytest.approx([1.0, 1.0])
    probs = sm_inclusion_probabilities(PrivacyDemand([1.0, 2.0]))
    assert probs == pytest.approx([1 / (math.e + 1), 1.0])
    assert sm_inclusion_probabilities(PrivacyDemand([1.0, np.inf])).tolist() == [0.0, 1.0]


def test_sm_homogeneous_reduces_to_uni():
    data = Dataset.categorical([1, 2, 2, 1], k=2)
    out = sm_estimate(data, PrivacyDemand([np.inf] * 4), RandomSource(2))
    assert out.estimate.values.tolist() == [0.5, 0.5]
    assert out.weights_used.w == pytest.approx(np.full(4, 0.25))


@pytest.mark.slow
def test_sm_inclusion_frequency_matches_formula():
    eps = PrivacyDemand([1.0, 2.0])
    probs = sm_inclusion_probabilities(eps)
    data = Dataset.categorical([1, 2], k=2)
    root = RandomSource(5)
    trials = 100_000
    kept = np.zeros(2)
    for i in range(trials):
        used = sm_estimate(data, eps, root.substream(i)).weights_used
        if used is not None:
            kept += used.w > 0
    se = np.sqrt(probs[0] * (1 - probs[0]) / trials)
    assert abs(kept[0] / trials - probs[0]) < 3 * se
    assert kept[1] == trials


# ================= LOCAL DP: FREQUENCY ================= #
def test_flip_probability_limits():
    assert flip_probability(np.inf) == 0.0
    assert flip_probability(1e-4) == pytest.approx(0.5, abs=1e-4)
    assert _unbias_scale(1.0) == pytest.approx(4.0827, abs=1e-3)


def test_public_client_sends_exact_one_hot():
    report = ldp_freq_client(3, 4, np.inf, RandomSource(1))
    assert report.bits.tolist() == [0, 0, 1, 0]


def test_client_rejects_bad_record():
    with pytest.raises(ArgumentError):
        ldp_freq_client(0, 3, 1.0, RandomSource(1))


def test_public_aggregate_is_identity():
    data = Dataset.categorical([2], k=3)
    eps = PrivacyDemand([np.inf])
    out = ldp_frequency(data, eps, WeightVector.uniform(1), RandomSource(9))
    assert out.estimate.values.tolist() == [0.0, 1.0, 0.0]


def test_aggregate_accepts_client_reports():
    eps = PrivacyDemand([np.inf, np.inf])
    reports = [ldp_freq_client(1, 2, np.inf, RandomSource(0)), ldp_freq_client(2, 2, np.inf, RandomSource(1))]
    out = ldp_freq_aggregate(reports, eps, WeightVector([0.25, 0.75]))
    assert out.estimate.values == pytest.approx([0.25, 0.75])


@pytest.mark.parametrize("k", [2, 3, 4])
def test_client_satisfies_local_privacy(k):
    eps_i = 0.8
    for bits in itertools.product((0, 1), repeat=k):
        for a, b in itertools.permutations(range(1, k + 1), 2):
            ratio = report_probability(bits, a, eps_i) / report_probability(bits, b, eps_i)
            assert math.log(ratio) <= eps_i + 1e-12


@pytest.mark.slow
def test_flip_rate_matches_formula():
    data = Dataset.categorical(np.arange(20_000) % 5 + 1, k=5)
    eps = PrivacyDemand([2.0] * data.n)
    bits = ldp_freq_reports(data, eps, RandomSource(17))
    onehot = np.eye(5, dtype=np.int8)[data.records - 1]
    q = float(flip_probability(2.0))
    rate = np.mean(bits != onehot)
    assert abs(rate - q) < 3 * np.sqrt(q * (1 - q) / bits.size)


@pytest.mark.slow
def test_rappor_aggregate_is_unbiased():
    n = 100_000
    data = Dataset.categorical(np.full(n, 2), k=3)
    eps = PrivacyDemand(np.ones(n))
    raw = _ldp_freq_raw(ldp_freq_reports(data, eps, RandomSource(23)), eps, WeightVector.uniform(n))
    q = float(flip_probability(1.0))
    se = float(_unbias_scale(1.0)) * np.sqrt(q * (1 - q) / n)
    assert (np.abs(raw - np.array([0.0, 1.0, 0.0])) < 4 * se).all()


# ================= LOCAL DP: MEAN ================= #
def test_ldp_mean_public_is_exact():
    data = Dataset.scalar([0.2, 0.4, 0.9])
    out = ldp_mean(data, PrivacyDemand([np.inf] * 3), RandomSource(4))
    assert out.estimate.value == pytest.approx(0.5)


def test_ldp_mean_needs_scalar_data():
    with pytest.raises(ArgumentError):
        ldp_mean(Dataset.categorical([1, 2], k=2), PrivacyDemand([1.0, 1.0]), RandomSource(0))


@pytest.mark.slow
def test_ldp_mean_unbiased_with_expected_variance():
    n = 1_000_000
    data = Dataset.scalar(np.full(n, 0.3))
    eps = PrivacyDemand(np.ones(n))
    raw, spread = _ldp_mean_raw(data, eps, WeightVector.uniform(n), RandomSource(31))
    assert spread == pytest.approx(np.sqrt(2.0 / n))
    assert abs(raw - 0.3) < 4 * spread
