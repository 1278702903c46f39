"""Report assembly: JSON-safe conversion, comparison tables, CSV and Excel export."""

import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from config import Config
from mechanisms import free_privacy_audit, privacy_slack
from models import SolverReport, TrialReport, WeightVector

logger = logging.getLogger(__name__)


# ================= JSON SAFE CONVERTER ================= #
def make_json_safe(obj):
    """Convert numpy/pandas objects to JSON-serializable types; inf becomes "inf"."""
    if isinstance(obj, dict):
        return {str(k): make_json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [make_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [make_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, WeightVector):
        return make_json_safe(obj.w)
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        if pd.isna(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def dump_json(obj):
    """Stable text form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(make_json_safe(obj), indent=2, sort_keys=True) + "\n"


# ================= WEIGHT REPORT ================= #
def solver_diagnostics(report: SolverReport):
    return {
        "method": report.method,
        "branch": report.branch,
        "iterations": report.iterations,
        "converged": report.converged,
    }


def weight_report(estimator, report: SolverReport, eps, bound, echo):
    """Weights, objective, capped bound and what each user actually spends."""
    effective = free_privacy_audit(report.weights, eps)
    return {
        "schema_version": Config.SCHEMA_VERSION,
        "config": echo,
        "estimator": estimator,
        "weights": report.weights.w,
        "objective": report.objective_value,
        "bound": bound,
        "epsilon": eps.eps,
        "effective_epsilon": effective,
        "slack": privacy_slack(report.weights, eps),
        "solver": solver_diagnostics(report),
    }


# ================= BENCHMARK REPORT ================= #
def estimator_entry(report: TrialReport, metric):
    entry = {
        "noise_scale": report.noise_scale,
        "trials": report.trials,
        "seed": report.seed,
        "mse": report.mse,
    }
    if metric == "pac":
        entry["pac_quantile"] = report.pac_quantile
    if report.weights is not None:
        entry["weights"] = report.weights.w
    if report.solver is not None:
        entry["solver"] = solver_diagnostics(report.solver)
        entry["objective"] = report.solver.objective_value
    entry.update(report.extra)
    return entry


def bench_report(echo, rows, metric):
    """rows: (estimator, TrialReport or None, error message or None) in run order."""
    estimators = {}
    for name, report, error in rows:
        estimators[name] = {"error": error} if report is None else estimator_entry(report, metric)
    return {
        "schema_version": Config.SCHEMA_VERSION,
        "config": echo,
        "estimators": estimators,
    }


def comparison_frame(rows, metric):
    """One row per estimator: the headline error (PAC quantile or MSE) next to its bound.

    The bound column is filled for the exact-solver rows only; closed forms and
    surrogates leave it empty.
    """
    records = []
    for name, report, error in rows:
        if report is None:
            records.append({"estimator": name, metric: np.nan, "bound": np.nan, "noise_scale": np.nan, "error": error})
            continue
        value = report.pac_quantile if metric == "pac" else report.mse
        bound = np.nan
        # only the exact solvers report a true r_C / r_U minimum
        if report.solver is not None and name.endswith("-opt"):
            capped = min(1.0, report.solver.objective_value)
            bound = capped if metric == "pac" else capped ** 2
        records.append({"estimator": name, metric: value, "bound": bound,
                        "noise_scale": report.noise_scale, "error": ""})
    return pd.DataFrame(records, columns=["estimator", metric, "bound", "noise_scale", "error"])


def trials_frame(rows):
    """Long-form per-trial errors: trial,estimator,linf_error."""
    frames = [
        pd.DataFrame({
            "trial": np.arange(report.trials),
            "estimator": name,
            "linf_error": report.errors,
        })
        for name, report, _ in rows if report is not None
    ]
    if not frames:
        return pd.DataFrame(columns=["trial", "estimator", "linf_error"])
    return pd.concat(frames, ignore_index=True)


# ================= EXPORTS ================= #
def write_bench_outputs(out_dir, report, comparison, trials):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(dump_json(report), encoding="utf-8")
    comparison.to_csv(out_dir / "comparison.csv", index=False)
    trials.to_csv(out_dir / "trials.csv", index=False)
    logger.info("wrote report.json, comparison.csv and trials.csv to %s", out_dir)
    return out_dir


def export_excel(path, comparison, trials):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with pd.ExcelWriter(path, engine="openpyxl") as writer:
        comparison.to_excel(writer, sheet_name="Comparison", index=False)
        trials.to_excel(writer, sheet_name="Trials", index=False)
    return path


def dataset_frame(data, eps):
    """value,epsilon table in user order; infinite levels print as `inf`."""
    return pd.DataFrame({
        "value": data.records,
        "epsilon": ["inf" if math.isinf(e) else repr(float(e)) for e in eps.eps],
    })
