"""Synthetic data, the correlated/uncorrelated trial protocol and error aggregation."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from baselines import ldp_frequency, ldp_mean, sm_estimate, uni_estimate
from config import Config
from core import RandomSource, exact_statistic, linf_error, permute_uniform
from mechanisms import release
from models import (
    FREQUENCY_ESTIMATORS,
    MEAN_ESTIMATORS,
    ArgumentError,
    Dataset,
    EstimatorSpec,
    PrivacyDemand,
    SolverError,
    SyntheticSpec,
    TrialReport,
)
from weights import resolve_weights

logger = logging.getLogger(__name__)


# ================= SYNTHETIC DATA ================= #
def _draw_records(spec: SyntheticSpec, rng: RandomSource):
    """Bins from the data law; scalar records are uniform inside their bin."""
    bins = rng.generator.choice(spec.k, size=spec.n, p=spec.bin_probabilities()) + 1
    if spec.scalar:
        values = (bins - 1 + rng.uniform(spec.n)) / spec.k
        return Dataset.scalar(values), bins
    return Dataset.categorical(bins, spec.k), bins


def gen_correlated(spec: SyntheticSpec, rng: RandomSource):
    """log eps ~ center(bin) + Uniform[-spread, spread], center(i) = -slope |i - (k+1)/2|."""
    if spec.correlation != "correlated":
        raise ArgumentError("gen_correlated needs a correlated spec")
    data, bins = _draw_records(spec, rng.substream(0))
    centers = np.array([spec.bin_center(i) for i in range(1, spec.k + 1)])[bins - 1]
    jitter = rng.substream(1).uniform(spec.n) * 2.0 - 1.0
    eps = PrivacyDemand(np.exp(centers + spec.spread * jitter))
    logger.debug("correlated synthetic data: n=%d k=%d eps_min=%.3g", spec.n, spec.k, eps.min)
    return data, eps


def gen_uncorrelated(spec: SyntheticSpec, rng: RandomSource):
    """log eps ~ Uniform[low, high], drawn independently of the records."""
    if spec.correlation != "uncorrelated":
        raise ArgumentError("gen_uncorrelated needs an uncorrelated spec")
    data, _ = _draw_records(spec, rng.substream(0))
    span = spec.log_eps_high - spec.log_eps_low
    log_eps = spec.log_eps_low + span * rng.substream(1).uniform(spec.n)
    return data, PrivacyDemand(np.exp(log_eps))


def generate(spec: SyntheticSpec, rng: RandomSource):
    if spec.correlation == "correlated":
        return gen_correlated(spec, rng)
    return gen_uncorrelated(spec, rng)


def one_tiny_eps(n=1000, tiny=1e-4, k=2):
    """One user with a tiny privacy level, everyone else public; bins cycle 1..k."""
    records = np.arange(n) % k + 1
    eps = np.full(n, np.inf)
    eps[0] = tiny
    return Dataset.categorical(records, k), PrivacyDemand(eps)


# ================= AGGREGATION ================= #
def pac_quantile(errors, beta) -> float:
    """The ceil((1 - beta) T)-th smallest error (1-indexed)."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ArgumentError("need at least one error to take a quantile")
    if not 0.0 < beta < 1.0:
        raise ArgumentError(f"beta must lie in (0, 1), got {beta}")
    # tolerance absorbs float noise in (1 - beta) * T, e.g. 0.95 * 1000
    rank = math.ceil((1.0 - beta) * errors.size - 1e-9)
    rank = min(max(rank, 1), errors.size)
    return float(np.sort(errors)[rank - 1])


def mse(errors) -> float:
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ArgumentError("need at least one error for the mean squared error")
    return float(np.mean(errors ** 2))


def default_trials(setting, n) -> int:
    """10 n ln n (rounded up) for uncorrelated runs, Config.CORRELATED_TRIALS otherwise."""
    if setting == "uncorrelated":
        return max(1, math.ceil(10 * n * math.log(n))) if n > 1 else 1
    return Config.CORRELATED_TRIALS


# ================= ESTIMATOR REGISTRY ================= #
def estimator_names(task):
    return FREQUENCY_ESTIMATORS if task == "frequency" else MEAN_ESTIMATORS


def prepare_estimator(spec: EstimatorSpec, task, eps: PrivacyDemand, k=None, method="breakpoint"):
    """Resolve weights once and return (solver report or None, per-trial release function)."""
    name = spec.estimator
    if name not in estimator_names(task):
        raise ArgumentError(f"unknown {task} estimator {name!r}")

    if name == "SM":
        return None, lambda data, rng: sm_estimate(data, eps, rng)
    if name == "UNI":
        report = resolve_weights("UNI", task, spec.setting, spec.metric, eps, k=k, beta=spec.beta)
        return report, lambda data, rng: uni_estimate(data, eps, rng)

    report = resolve_weights(name, task, spec.setting, spec.metric, eps, k=k, beta=spec.beta, method=method)
    w = report.weights
    if name == "LDP":
        if task == "frequency":
            return report, lambda data, rng: ldp_frequency(data, eps, w, rng)
        return report, lambda data, rng: ldp_mean(data, eps, rng, w)
    return report, lambda data, rng: release(data, w, eps, rng)


# ================= TRIALS ================= #
def run_trials(data: Dataset, eps: PrivacyDemand, spec: EstimatorSpec, trials, rng: RandomSource,
               workers=1, method="breakpoint") -> TrialReport:
    """Run one estimator `trials` times on fixed (data, eps).

    Weights are resolved once. Trial i draws from rng.substream(i), permutes the
    records first when the setting is uncorrelated, and is scored against the
    statistic of the unpermuted data.
    """
    if trials < 1:
        raise ArgumentError("need at least one trial")
    if data.n != eps.n:
        raise ArgumentError(f"{data.n} records for {eps.n} privacy levels")
    task = "frequency" if data.is_categorical else "mean"
    solver, fn = prepare_estimator(spec, task, eps, k=data.k, method=method)
    if solver is not None and not solver.converged:
        raise SolverError(f"{spec.estimator}: weight solver did not converge "
                          f"after {solver.iterations} iterations", solver)

    truth = exact_statistic(data)
    shuffle = spec.setting == "uncorrelated"

    def one(i):
        sub = rng.substream(i)
        released = permute_uniform(data, sub) if shuffle else data
        out = fn(released, sub)
        return linf_error(out.estimate, truth), out.noise_scale

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(trials)))
    else:
        results = [one(i) for i in range(trials)]

    errors = np.array([err for err, _ in results])
    scales = np.array([scale for _, scale in results])
    report = TrialReport(
        estimator=spec.estimator,
        errors=errors,
        beta=spec.beta,
        pac_quantile=pac_quantile(errors, spec.beta),
        mse=mse(errors),
        seed=rng.seed,
        trials=int(trials),
        noise_scale=float(scales.mean()),
        weights=solver.weights if solver is not None else None,
        solver=solver,
    )
    logger.info("%s: %d trials, pac=%.4g mse=%.4g", spec.estimator, trials, report.pac_quantile, report.mse)
    return report
