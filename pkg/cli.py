"""Command-line front end: weight reports, benchmarks and synthetic datasets."""

import functools
import logging
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd

from analytics import (
    bench_report,
    comparison_frame,
    dataset_frame,
    dump_json,
    export_excel,
    trials_frame,
    weight_report,
    write_bench_outputs,
)
from config import BenchmarkConfig, Config
from core import RandomSource
from evaluation import default_trials, estimator_names, generate, run_trials
from models import (
    METRICS,
    SETTINGS,
    TASKS,
    ArgumentError,
    Dataset,
    EstimatorSpec,
    PrivacyDemand,
    SolverError,
    SyntheticSpec,
    ValidationError,
)
from weights import bound_value, objective_params, resolve_weights

logger = logging.getLogger(__name__)

# substream keys under the run seed
DATA_STREAM = 0
TRIAL_STREAM = 1


# ================= DATA I/O ================= #
def ingest_csv(path, task="frequency", k=None):
    """Read a `value,epsilon` CSV into (Dataset, PrivacyDemand); row order is user order.

    Frequency data holds bin indices 1..k (k defaults to the largest bin seen);
    mean data holds reals in [0, 1]. Epsilon is positive or the literal `inf`.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ValidationError(f"cannot read {path}: {e}") from e
    if [c.strip() for c in frame.columns] != ["value", "epsilon"]:
        raise ValidationError(f"{path}: header must be `value,epsilon`, got {','.join(frame.columns)}")
    if frame.empty:
        raise ValidationError(f"{path}: no data rows")
    frame.columns = ["value", "epsilon"]

    values = pd.to_numeric(frame["value"].str.strip(), errors="coerce").to_numpy(dtype=float)
    eps = pd.to_numeric(frame["epsilon"].str.strip().str.lower(), errors="coerce").to_numpy(dtype=float)
    for i in range(values.size):
        if not np.isfinite(values[i]):
            raise ValidationError(f"malformed value {frame['value'].iat[i]!r}", row=i + 1)
        if np.isnan(eps[i]) or not eps[i] > 0:
            raise ValidationError(f"epsilon must be positive or `inf`, got {frame['epsilon'].iat[i]!r}", row=i + 1)

    if task == "frequency":
        whole = np.equal(np.mod(values, 1), 0)
        if not whole.all():
            row = int(np.flatnonzero(~whole)[0])
            raise ValidationError(f"bin index must be a whole number, got {values[row]}", row=row + 1)
        if k is None:
            k = max(2, int(values.max()))
        data = Dataset.categorical(values, k)
    elif task == "mean":
        data = Dataset.scalar(values)
    else:
        raise ArgumentError(f"unknown task {task!r}")
    logger.info("read %d users from %s (%d public)", data.n, path, int(np.isinf(eps).sum()))
    return data, PrivacyDemand(eps)


def load_data(config: BenchmarkConfig):
    """Dataset and privacy demand, drawn once per run."""
    if config.data_path is not None:
        return ingest_csv(config.data_path, config.task, config.k if config.task == "frequency" else None)
    return generate(config.synthetic, RandomSource(config.seed, key=(DATA_STREAM,)))


# ================= COMMANDS ================= #
def cmd_weights(config: BenchmarkConfig, estimator):
    """Resolve one estimator's weights on the configured data and report them."""
    data, eps = load_data(config)
    k = data.k if data.is_categorical else None
    report = resolve_weights(estimator, config.task, config.setting, config.metric, eps,
                             k=k, beta=config.beta, method=config.method)
    params = objective_params(config.task, config.metric, eps, k=k, beta=config.beta)
    bound = bound_value(config.setting, params, method=config.method)
    return weight_report(estimator, report, eps, bound, config.echo()), report


def cmd_bench(config: BenchmarkConfig, echo=click.echo):
    """Run every configured estimator; failures are recorded per row."""
    data, eps = load_data(config)
    trials = config.trials or default_trials(config.setting, data.n)
    registry = estimator_names(config.task)
    rows = []
    for name in config.estimators:
        spec = EstimatorSpec(name, config.setting, config.metric, config.beta)
        rng = RandomSource(config.seed, key=(TRIAL_STREAM, registry.index(name)))
        try:
            report = run_trials(data, eps, spec, trials, rng, workers=config.workers, method=config.method)
        except (ArgumentError, SolverError) as e:
            logger.warning("%s failed: %s", name, e)
            echo(f"⚠️  {name}: {e}", err=True)
            rows.append((name, None, str(e)))
            continue
        headline = report.pac_quantile if config.metric == "pac" else report.mse
        echo(f"✅ {name}: {config.metric}={headline:.4g}")
        rows.append((name, report, None))

    report = bench_report(config.echo(), rows, config.metric)
    return report, comparison_frame(rows, config.metric), trials_frame(rows)


def cmd_gen(spec: SyntheticSpec, seed):
    data, eps = generate(spec, RandomSource(seed, key=(DATA_STREAM,)))
    return dataset_frame(data, eps)


# ================= CLICK SURFACE ================= #
def _fail(message, code=1):
    click.echo(f"❌ {message}", err=True)
    sys.exit(code)


def run_options(fn):
    """Flags shared by `weights` and `bench`; each overrides the manifest."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="YAML benchmark manifest."),
        click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
                     help="value,epsilon CSV."),
        click.option("--n", type=int, help="Synthetic dataset size."),
        click.option("--task", type=click.Choice(TASKS)),
        click.option("--k", type=int, help="Number of bins."),
        click.option("--setting", type=click.Choice(SETTINGS)),
        click.option("--metric", type=click.Choice(METRICS)),
        click.option("--beta", type=float),
        click.option("--seed", type=int, help=f"Run seed (default from HDP_SEED, {Config.SEED})."),
        click.option("--method", type=click.Choice(["breakpoint", "subgradient"])),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def build_config(config_path, data_path, n, task, **flags):
    overrides = dict(flags)
    overrides["task"] = task
    if data_path is not None:
        overrides["data_path"] = Path(data_path).resolve()
    if n is not None:
        overrides["synthetic"] = {"n": n}
    if config_path is not None:
        return BenchmarkConfig.from_yaml(config_path, **overrides)
    return BenchmarkConfig.from_dict({}, **overrides)


def guarded(fn):
    """Turn domain errors into a ❌ line and a non-zero exit."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ArgumentError, SolverError) as e:
            _fail(str(e))
    return wrapper


@click.group()
@click.option("--log-level", default=Config.LOG_LEVEL, show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def cli(log_level):
    """Mean and frequency estimation under per-user heterogeneous privacy."""
    logging.basicConfig(level=log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


@cli.command()
@run_options
@click.option("--estimator", default=None, help="Weighted estimator (default HPF-opt / HPM-opt).")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the JSON here instead of stdout.")
@guarded
def weights(config_path, data_path, n, task, estimator, out, **flags):
    """Print the weight report for one estimator."""
    config = build_config(config_path, data_path, n, task, **flags)
    estimator = estimator or ("HPF-opt" if config.task == "frequency" else "HPM-opt")
    report, solver = cmd_weights(config, estimator)
    text = dump_json(report)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"✅ Weights written to {out}")
    else:
        click.echo(text, nl=False)
    if not solver.converged:
        _fail(f"{estimator}: solver stopped after {solver.iterations} iterations without converging")


@cli.command()
@run_options
@click.option("--estimators", help="Comma-separated estimator names.")
@click.option("--trials", type=int)
@click.option("--workers", type=int, help="Trial parallelism (default from HDP_WORKERS).")
@click.option("--out", "output_dir", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--excel", "excel_path", type=click.Path(dir_okay=False), help="Also write an Excel workbook.")
@guarded
def bench(config_path, data_path, n, task, estimators, output_dir, excel_path, **flags):
    """Run the benchmark and write report.json, comparison.csv and trials.csv."""
    if estimators:
        flags["estimators"] = tuple(name.strip() for name in estimators.split(",") if name.strip())
    flags["output_dir"] = Path(output_dir) if output_dir else None
    flags["excel_path"] = Path(excel_path) if excel_path else None
    config = build_config(config_path, data_path, n, task, **flags)

    click.echo(f"🚀 Benchmark: {config.task}, {config.setting}, {config.metric}, {len(config.estimators)} estimators")
    report, comparison, trials = cmd_bench(config)
    out = write_bench_outputs(config.output_dir, report, comparison, trials)
    if config.excel_path is not None:
        export_excel(config.excel_path, comparison, trials)
        click.echo(f"✅ Excel workbook written to {config.excel_path}")
    click.echo(f"✅ Reports written to {out}")

    failed = [name for name, entry in report["estimators"].items() if "error" in entry]
    if failed:
        _fail(f"{len(failed)} estimator(s) failed: {', '.join(failed)}")


@cli.command()
@click.option("--n", type=int, required=True)
@click.option("--k", type=int, default=12, show_default=True)
@click.option("--scalar", is_flag=True, help="Scalar records in [0, 1] instead of bin indices.")
@click.option("--setting", type=click.Choice(SETTINGS), default="correlated", show_default=True)
@click.option("--spread", type=float, default=3.0, show_default=True)
@click.option("--seed", type=int, default=Config.SEED, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@guarded
def gen(n, k, scalar, setting, spread, seed, out):
    """Write a synthetic value,epsilon CSV."""
    spec = SyntheticSpec(n=n, k=k, scalar=scalar, correlation=setting, spread=spread)
    frame = cmd_gen(spec, seed)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False)
    public = int((frame["epsilon"] == "inf").sum())
    lowest = frame["epsilon"].astype(float).min()
    click.echo(f"✅ Wrote {len(frame)} users to {out} ({public} public, smallest epsilon {lowest:.3g})")


if __name__ == "__main__":
    cli()
