import numpy as np
import pytest

from core import RandomSource, exact_statistic, laplace_sample
from mechanisms import _hpf_raw, dp_ratio_audit, free_privacy_audit, hpf, hpm, privacy_slack, release
from models import ArgumentError, Dataset, PrivacyDemand, WeightVector


def test_hpf_public_users_get_exact_frequency():
    data = Dataset.categorical([1, 2, 2, 3], k=3)
    out = hpf(data, WeightVector.uniform(4), PrivacyDemand([np.inf] * 4), RandomSource(1))
    assert out.estimate.values.tolist() == exact_statistic(data).values.tolist()
    assert out.noise_scale == 0.0


def test_hpf_weighted_counts_without_noise():
    data = Dataset.categorical([1, 1, 2, 2], k=2)
    out = hpf(data, WeightVector([0.4, 0.4, 0.1, 0.1]), PrivacyDemand([np.inf] * 4), RandomSource(1))
    assert out.estimate.values == pytest.approx([0.8, 0.2])


def test_hpf_replays_seeded_noise():
    data = Dataset.categorical([1, 2], k=2)
    w = WeightVector([0.5, 0.5])
    out = hpf(data, w, PrivacyDemand([1.0, 1.0]), RandomSource(42))
    noise = laplace_sample(1.0, RandomSource(42), size=2)
    assert out.noise_scale == pytest.approx(1.0)
    assert out.estimate.values == pytest.approx(np.clip(np.array([0.5, 0.5]) + noise, 0.0, 1.0))


def test_hpm_exact_cases():
    data = Dataset.scalar([0.0, 1.0])
    public = PrivacyDemand([np.inf, np.inf])
    assert hpm(data, WeightVector([0.3, 0.7]), public, RandomSource(1)).estimate.value == pytest.approx(0.7)
    assert hpm(data, WeightVector.uniform(2), public, RandomSource(1)).estimate.value == pytest.approx(0.5)


def test_hpm_output_is_clamped():
    data = Dataset.scalar([0.9, 0.95, 1.0])
    eps = PrivacyDemand([0.01, 0.01, 0.01])
    root = RandomSource(6)
    for i in range(50):
        value = hpm(data, WeightVector.uniform(3), eps, root.substream(i)).estimate.value
        assert 0.0 <= value <= 1.0


def test_release_dispatches_on_data_kind():
    eps = PrivacyDemand([np.inf, np.inf])
    assert release(Dataset.scalar([0.2, 0.4]), WeightVector.uniform(2), eps, RandomSource(0)).estimate.kind == "mean"
    cat = release(Dataset.categorical([1, 2], k=2), WeightVector.uniform(2), eps, RandomSource(0))
    assert cat.estimate.kind == "frequency"


def test_mechanisms_check_kinds_and_sizes():
    eps = PrivacyDemand([1.0, 1.0])
    with pytest.raises(ArgumentError):
        hpf(Dataset.scalar([0.1, 0.2]), WeightVector.uniform(2), eps, RandomSource(0))
    with pytest.raises(ArgumentError):
        hpm(Dataset.categorical([1, 2], k=2), WeightVector.uniform(2), eps, RandomSource(0))
    with pytest.raises(ArgumentError):
        hpf(Dataset.categorical([1, 2, 1], k=2), WeightVector.uniform(2), eps, RandomSource(0))


@pytest.mark.slow
def test_weighted_histogram_noise_is_unbiased():
    data = Dataset.categorical([1, 2, 2, 3], k=3)
    w = WeightVector([0.1, 0.2, 0.3, 0.4])
    eps = PrivacyDemand([0.5, 1.0, 2.0, 4.0])
    root = RandomSource(77)
    trials = 100_000
    draws = np.array([_hpf_raw(data, w, eps, root.substream(i))[0] for i in range(trials)])
    truth = np.array([0.1, 0.5, 0.4])
    scale = 2 * 0.2
    se = np.sqrt(2) * scale / np.sqrt(trials)
    assert (np.abs(draws.mean(axis=0) - truth) < 4 * se).all()


# ================= AUDITS ================= #
def test_uniform_homogeneous_audit_equals_demand():
    eps = PrivacyDemand([0.5] * 4)
    w = WeightVector.uniform(4)
    assert dp_ratio_audit(w, eps, "frequency") == pytest.approx(eps.eps)
    assert dp_ratio_audit(w, eps, "mean") == pytest.approx(eps.eps)


def test_audit_zero_weight_user_has_zero_bound():
    bounds = dp_ratio_audit(WeightVector([0.0, 1.0]), PrivacyDemand([1.0, np.inf]))
    assert bounds[0] == 0.0


def test_proportional_weights_have_no_slack():
    eps = PrivacyDemand([0.2, 0.5, 3.0])
    w = WeightVector.normalized(eps.eps)
    assert free_privacy_audit(w, eps) == pytest.approx(eps.eps)
    assert np.abs(privacy_slack(w, eps)).max() < 1e-12


def test_audit_unknown_task():
    with pytest.raises(ArgumentError):
        dp_ratio_audit(WeightVector.uniform(2), PrivacyDemand([1.0, 1.0]), "median")
