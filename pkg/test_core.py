import itertools

import numpy as np
import pytest
from scipy import stats

from core import (
    RandomSource,
    clamp_unit,
    exact_statistic,
    laplace_sample,
    linf_error,
    permute_uniform,
    ratio_norm,
    weighted_statistic,
)
from models import (
    ArgumentError,
    Dataset,
    EmpiricalStatistic,
    PrivacyDemand,
    ValidationError,
    WeightVector,
)


# ================= STATISTICS ================= #
def test_exact_frequency_symmetric():
    stat = exact_statistic(Dataset.categorical([1, 1, 2, 2], k=2))
    assert stat.values.tolist() == [0.5, 0.5]


def test_exact_frequency_with_empty_bin():
    stat = exact_statistic(Dataset.categorical([1, 1, 1, 2], k=3))
    assert stat.values == pytest.approx([0.75, 0.25, 0.0])


def test_exact_mean():
    assert exact_statistic(Dataset.scalar([0.0, 1.0])).value == 0.5


def test_dataset_rejects_out_of_range_rows():
    with pytest.raises(ValidationError, match="row 2"):
        Dataset.categorical([1, 0], k=2)
    with pytest.raises(ValidationError, match="row 1"):
        Dataset.scalar([1.5])


@pytest.mark.parametrize("est, truth, expected", [
    ([0.5, 0.5], [0.5, 0.5], 0.0),
    ([0.6, 0.4], [0.5, 0.5], 0.1),
    ([0.1, 0.2, 0.7], [0.3, 0.2, 0.5], 0.2),
])
def test_linf_error(est, truth, expected):
    err = linf_error(EmpiricalStatistic.frequency(est), EmpiricalStatistic.frequency(truth))
    assert err == pytest.approx(expected)


def test_linf_error_rejects_shape_mismatch():
    with pytest.raises(ArgumentError):
        linf_error(EmpiricalStatistic.frequency([1.0, 0.0]), EmpiricalStatistic.mean(0.5))


def test_weighted_histogram_and_mean():
    w = WeightVector([0.4, 0.4, 0.1, 0.1])
    hist = weighted_statistic(Dataset.categorical([1, 1, 2, 2], k=2), w)
    assert hist == pytest.approx([0.8, 0.2])
    mean = weighted_statistic(Dataset.scalar([0.0, 1.0]), WeightVector([0.3, 0.7]))
    assert mean[0] == pytest.approx(0.7)


def test_ratio_norm_ignores_public_users():
    w = WeightVector([0.25, 0.75])
    assert ratio_norm(w, PrivacyDemand([0.5, np.inf])) == pytest.approx(0.5)
    assert ratio_norm(w, PrivacyDemand([np.inf, np.inf])) == 0.0


def test_clamp_unit():
    assert clamp_unit(np.array([-0.2, 0.5, 1.3])).tolist() == [0.0, 0.5, 1.0]


# ================= RANDOMNESS ================= #
def test_substreams_are_reproducible_and_independent_of_parent_use():
    a = RandomSource(11)
    b = RandomSource(11)
    a.uniform(100)
    assert a.substream(3).uniform(5).tolist() == b.substream(3).uniform(5).tolist()
    assert a.substream(3).uniform(5).tolist() != a.substream(4).uniform(5).tolist()


def test_laplace_zero_scale():
    assert laplace_sample(0.0, RandomSource(1)) == 0.0
    assert laplace_sample(0.0, RandomSource(1), size=3).tolist() == [0.0, 0.0, 0.0]


def test_laplace_rejects_negative_scale():
    with pytest.raises(ArgumentError):
        laplace_sample(-1.0, RandomSource(1))


@pytest.mark.slow
def test_laplace_variance_and_tails():
    draws = laplace_sample(1.0, RandomSource(2024), size=10 ** 6)
    assert np.var(draws) == pytest.approx(2.0, rel=0.05)
    for t in (1.0, 2.0, 3.0):
        p = np.exp(-t)
        se = np.sqrt(p * (1 - p) / draws.size)
        assert abs(np.mean(np.abs(draws) > t) - p) < 3 * se


@pytest.mark.slow
def test_laplace_matches_reference_distribution():
    draws = laplace_sample(2.0, RandomSource(99), size=10 ** 5)
    assert stats.kstest(draws, "laplace", args=(0.0, 2.0)).pvalue > 1e-3


# ================= PERMUTATION ================= #
def test_permute_single_record_is_identity():
    data = Dataset.categorical([2], k=3)
    assert permute_uniform(data, RandomSource(5)) is data


def test_permutation_keeps_statistic():
    data = Dataset.categorical([1, 2, 2, 3, 3, 3], k=3)
    shuffled = permute_uniform(data, RandomSource(8))
    assert exact_statistic(shuffled).values.tolist() == exact_statistic(data).values.tolist()


@pytest.mark.slow
def test_permutation_is_uniform_over_orders():
    data = Dataset.categorical([1, 2, 3], k=3)
    root = RandomSource(314)
    trials = 60_000
    counts = dict.fromkeys(itertools.permutations((1, 2, 3)), 0)
    for i in range(trials):
        counts[tuple(permute_uniform(data, root.substream(i)).records.tolist())] += 1
    for count in counts.values():
        assert abs(count / trials - 1 / 6) < 0.01
