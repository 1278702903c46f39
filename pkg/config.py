import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import yaml
from dotenv import load_dotenv

from models import (
    FREQUENCY_ESTIMATORS,
    MEAN_ESTIMATORS,
    METRICS,
    SETTINGS,
    ConfigError,
    SyntheticSpec,
)

# Load environment variables
load_dotenv()


class Config:
    # Reproducibility
    SEED = int(os.getenv("HDP_SEED", "20240601"))
    WORKERS = int(os.getenv("HDP_WORKERS", "1"))

    # Logging / output
    LOG_LEVEL = os.getenv("HDP_LOG_LEVEL", "INFO").upper()
    OUTPUT_DIR = os.getenv("HDP_OUTPUT_DIR", "reports")

    # Estimation defaults
    BETA = float(os.getenv("HDP_BETA", "0.05"))
    CORRELATED_TRIALS = int(os.getenv("HDP_CORRELATED_TRIALS", "10000"))

    # Subgradient solver budget
    SOLVER_MAX_ITER = int(os.getenv("HDP_SOLVER_MAX_ITER", "50000"))
    SOLVER_PATIENCE = int(os.getenv("HDP_SOLVER_PATIENCE", "1000"))
    SOLVER_TOL = float(os.getenv("HDP_SOLVER_TOL", "1e-10"))

    # Report format
    SCHEMA_VERSION = 1


# ================= BENCHMARK MANIFEST ================= #
@dataclass(frozen=True)
class BenchmarkConfig:
    """One benchmark run: what to estimate, on which data, with which estimators."""

    task: str = "frequency"
    k: Optional[int] = 5
    setting: str = "correlated"
    metric: str = "pac"
    beta: float = Config.BETA
    estimators: tuple = FREQUENCY_ESTIMATORS
    synthetic: Optional[SyntheticSpec] = None
    data_path: Optional[Path] = None
    trials: Optional[int] = None
    seed: int = Config.SEED
    workers: int = Config.WORKERS
    method: str = "breakpoint"
    output_dir: Path = Path(Config.OUTPUT_DIR)
    excel_path: Optional[Path] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in ("frequency", "mean"):
            raise ConfigError(f"task must be 'frequency' or 'mean', got {self.task!r}")
        if self.task == "frequency" and (self.k is None or int(self.k) < 2):
            raise ConfigError("frequency benchmarks need k >= 2")
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        known = FREQUENCY_ESTIMATORS if self.task == "frequency" else MEAN_ESTIMATORS
        unknown = [name for name in self.estimators if name not in known]
        if unknown:
            raise ConfigError(f"unknown estimators {unknown}; choose from {list(known)}")
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        if (self.synthetic is None) == (self.data_path is None):
            raise ConfigError("give exactly one data source: a synthetic spec or a CSV file")
        if self.data_path is not None and not Path(self.data_path).is_file():
            raise ConfigError(f"data file not found: {self.data_path}")
        if self.trials is not None and self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_yaml(cls, path, **overrides):
        """Read a manifest; keyword overrides (from flags) win over file values."""
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read manifest {path}: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"manifest {path} must be a mapping")
        return cls.from_dict(raw, base_dir=path.parent, **overrides)

    @classmethod
    def from_dict(cls, raw, base_dir=Path("."), **overrides):
        task = raw.get("task") or {}
        data = raw.get("data") or {}
        run = raw.get("run") or {}
        output = raw.get("output") or {}
        overrides = {key: value for key, value in overrides.items() if value is not None}

        kind = overrides.get("task", task.get("kind", "frequency"))
        values = {
            "task": kind,
            "k": task.get("k", 5 if kind == "frequency" else None),
            "setting": task.get("setting", "correlated"),
            "metric": task.get("metric", "pac"),
            "beta": float(task.get("beta", Config.BETA)),
            "trials": run.get("trials"),
            "seed": int(run.get("seed", Config.SEED)),
            "workers": int(run.get("workers", Config.WORKERS)),
            "method": run.get("method", "breakpoint"),
            "output_dir": Path(output.get("dir", Config.OUTPUT_DIR)),
            "excel_path": Path(output["excel"]) if output.get("excel") else None,
            "estimators": tuple(raw["estimators"]) if "estimators" in raw
            else (FREQUENCY_ESTIMATORS if kind == "frequency" else MEAN_ESTIMATORS),
        }
        if "file" in data:
            values["data_path"] = (Path(base_dir) / data["file"]).resolve()
        elif "synthetic" in data:
            values["synthetic"] = dict(data["synthetic"])

        # a data source given as a flag replaces the manifest's
        if "data_path" in overrides:
            values.pop("synthetic", None)
        if "synthetic" in overrides:
            values.pop("data_path", None)
            # a partial synthetic override (e.g. --n) only replaces its own keys
            if isinstance(values.get("synthetic"), dict) and isinstance(overrides["synthetic"], dict):
                overrides = {**overrides, "synthetic": {**values["synthetic"], **overrides["synthetic"]}}
        values.update(overrides)
        if isinstance(values.get("synthetic"), dict):
            values["synthetic"] = _synthetic_from_dict(values["synthetic"], kind, values["k"], values["setting"])
        return cls(**values)

    def with_overrides(self, **overrides):
        return replace(self, **{key: value for key, value in overrides.items() if value is not None})

    def echo(self):
        """Plain-dict view of the run for the JSON report."""
        return {
            "task": self.task,
            "k": self.k,
            "setting": self.setting,
            "metric": self.metric,
            "beta": self.beta,
            "estimators": list(self.estimators),
            "data": (
                {"file": str(self.data_path)} if self.data_path is not None
                else {"synthetic": _synthetic_to_dict(self.synthetic)}
            ),
            "trials": self.trials,
            "seed": self.seed,
            "method": self.method,
        }


def _synthetic_from_dict(raw, task, k, setting):
    if not isinstance(raw, dict) or "n" not in raw:
        raise ConfigError("data.synthetic needs at least 'n'")
    params = dict(raw)
    params.setdefault("k", k if k is not None else 12)
    params.setdefault("scalar", task == "mean")
    params.setdefault("correlation", setting)
    if params.get("data_law") is not None:
        params["data_law"] = tuple(params["data_law"])
    try:
        return SyntheticSpec(**params)
    except TypeError as e:
        raise ConfigError(f"bad synthetic spec: {e}") from e


def _synthetic_to_dict(spec):
    return {
        "n": spec.n,
        "k": spec.k,
        "scalar": spec.scalar,
        "correlation": spec.correlation,
        "spread": spec.spread,
        "slope": spec.center_slope,
        "log_eps_low": spec.log_eps_low,
        "log_eps_high": spec.log_eps_high,
        "data_law": [float(x) for x in spec.bin_probabilities()],
    }
