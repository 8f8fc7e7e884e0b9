"""Simulation and tabular benchmark harness.

Simulation protocol: draw a training design on the target's domain,
observe y = f(x + u) + eps with latent Gaussian input noise u and
observation noise eps, fit every configured model on the nominal design,
and score the predictive mean against the true f on a dense grid (MSE).
The loop repeats over independent replications and reports per-model
means with standard errors. A model failing one replication is recorded
as a failure for that replication only.

Tabular protocol: fit each model per output column on a training table,
score MAE per output on a test table, optionally adding a derived
root-sum-of-squares output computed from two predicted columns.

Seed splitting rule (echoed in every report): the data for replication r
comes from SeedSequence(master_seed, spawn_key=(r,)); the model at
position j in the roster gets integer seed
SeedSequence(master_seed, spawn_key=(r, 1 + j)).generate_state(1)[0].
Reports carry no timestamps, so byte-identical reruns are possible.
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, load_csv
from .errors import ConfigurationError, DataSchemaError
from .models import GPRegressor, _ADJUSTED_KINDS

TARGETS = ("zigzag", "near_square_wave", "custom")
DESIGNS = ("equispaced", "uniform")

SEED_RULE = (
    "data[r] = SeedSequence(master_seed, spawn_key=(r,)); "
    "model_seed[r, j] = SeedSequence(master_seed, spawn_key=(r, 1 + j)).generate_state(1)[0]"
)


@dataclass(frozen=True)
class TargetFunction:
    """Named scalar test function on a closed interval."""

    name: str
    domain: tuple
    fn: object = None

    def __post_init__(self):
        if self.name not in TARGETS:
            raise ValueError(f"unknown target {self.name!r}; expected one of {TARGETS}")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("domain must be a nondegenerate interval")
        if self.name == "custom" and not callable(self.fn):
            raise ValueError("custom target requires a callable fn")


def zigzag():
    """Triangle wave |x - 2 round(x/2)|: range [0, 1], period 2, kinks at integers."""
    return TargetFunction(name="zigzag", domain=(0.0, 4.0))


def near_square_wave():
    """tanh(10 sin x): smooth approximation of a square wave, period 2 pi."""
    return TargetFunction(name="near_square_wave", domain=(0.0, 4.0 * np.pi))


def eval_target(target, x):
    """Evaluate the target at x, clamping (with a warning) outside its domain."""
    x = np.asarray(x, dtype=float)
    lo, hi = target.domain
    if np.any(x < lo) or np.any(x > hi):
        warnings.warn(
            f"{target.name}: {int(np.sum((x < lo) | (x > hi)))} input(s) outside "
            f"[{lo:g}, {hi:g}] clamped to the boundary",
            stacklevel=2,
        )
        x = np.clip(x, lo, hi)
    if target.name == "zigzag":
        return np.abs(x - 2.0 * np.round(x / 2.0))
    if target.name == "near_square_wave":
        return np.tanh(10.0 * np.sin(x))
    return np.asarray(target.fn(x), dtype=float)


def total_deformation(dy, dz):
    """Root sum of squares of two deflection components."""
    return np.hypot(dy, dz)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to rerun a simulation study deterministically."""

    target: TargetFunction
    n_train: int
    design: str
    sigma_u_sq: float
    sigma_eps_sq: float
    models: tuple  # ((label, params-dict), ...)
    replications: int = 20
    eval_grid_size: int = 1000
    master_seed: int = 0

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; expected one of {DESIGNS}")
        if self.n_train < 2:
            raise ValueError("n_train must be at least 2")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.eval_grid_size < 2:
            raise ValueError("eval_grid_size must be at least 2")
        if self.sigma_u_sq < 0 or self.sigma_eps_sq < 0:
            raise ValueError("noise variances must be nonnegative")
        if not self.models:
            raise ValueError("need at least one model")
        object.__setattr__(self, "models", tuple((str(l), dict(p)) for l, p in self.models))


@dataclass(frozen=True)
class BenchmarkReport:
    """Per-replication metric values plus aggregates, with full provenance."""

    metric: str
    labels: tuple
    values: dict  # label -> tuple of float-or-None per replication
    failures: dict  # label -> tuple of (replication, message)
    mean: dict
    stderr: dict
    config_echo: dict = field(default_factory=dict)


def _data_rng(master_seed, replication):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(replication,)))


def model_seed(master_seed, replication, position):
    return int(
        np.random.SeedSequence(master_seed, spawn_key=(replication, 1 + position)).generate_state(1)[0]
    )


def generate_data(cfg, replication):
    """Noisy observations of the target at a nominal (noise-free) design."""
    rng = _data_rng(cfg.master_seed, replication)
    lo, hi = cfg.target.domain
    if cfg.design == "equispaced":
        x = np.linspace(lo, hi, cfg.n_train)
    else:
        x = np.sort(rng.uniform(lo, hi, size=cfg.n_train))
    shifts = rng.normal(0.0, np.sqrt(cfg.sigma_u_sq), size=cfg.n_train)
    eps = rng.normal(0.0, np.sqrt(cfg.sigma_eps_sq), size=cfg.n_train)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # latent shifts may leave the domain
        y = eval_target(cfg.target, x + shifts) + eps
    return Dataset(x=x[:, None], y=y[:, None], input_names=("x",), output_names=("y",))


def _inject_protocol(label, params, cfg):
    """Fill in the protocol's input-noise variance for the adjusted kinds."""
    params = dict(params)
    kind = params.get("model")
    if kind in _ADJUSTED_KINDS and "sigma_u_sq" not in params and "noise_variances" not in params:
        params["sigma_u_sq"] = cfg.sigma_u_sq
    return params


def _aggregate(labels, values):
    mean, stderr = {}, {}
    for label in labels:
        ok = np.array([v for v in values[label] if v is not None], dtype=float)
        if ok.size == 0:
            mean[label], stderr[label] = None, None
            continue
        mean[label] = float(ok.mean())
        stderr[label] = float(ok.std(ddof=1) / np.sqrt(ok.size)) if ok.size > 1 else 0.0
    return mean, stderr


def config_echo(cfg):
    return {
        "target": cfg.target.name,
        "domain": [float(v) for v in cfg.target.domain],
        "n_train": cfg.n_train,
        "design": cfg.design,
        "sigma_u_sq": cfg.sigma_u_sq,
        "sigma_eps_sq": cfg.sigma_eps_sq,
        "replications": cfg.replications,
        "eval_grid_size": cfg.eval_grid_size,
        "models": [[label, params] for label, params in cfg.models],
        "master_seed": cfg.master_seed,
        "seed_rule": SEED_RULE,
    }


def run_experiment(cfg, curve_store=None):
    """Run the replication loop and aggregate per-model grid MSE.

    ``curve_store``, when given, receives prediction curves of replication
    0 as ``{label: (mean, var)}`` plus the grid and truth under the keys
    ``"_grid"`` and ``"_truth"`` (plot-data emission).
    """
    if cfg.target.name == "custom" and cfg.target.fn is None:
        raise ConfigurationError("custom target requires fn")
    lo, hi = cfg.target.domain
    grid = np.linspace(lo, hi, cfg.eval_grid_size)
    truth = eval_target(cfg.target, grid)
    if curve_store is not None:
        curve_store["_grid"] = grid
        curve_store["_truth"] = truth

    labels = tuple(label for label, _ in cfg.models)
    if len(set(labels)) != len(labels):
        raise ConfigurationError("model labels must be unique")
    values = {label: [] for label in labels}
    failures = {label: [] for label in labels}

    for r in range(cfg.replications):
        dataset = generate_data(cfg, r)
        for j, (label, params) in enumerate(cfg.models):
            params = _inject_protocol(label, params, cfg)
            params["seed"] = model_seed(cfg.master_seed, r, j)
            try:
                estimator = GPRegressor(**params).fit(dataset.x, dataset.y[:, 0])
                mean, var = estimator.predict(grid[:, None], return_var=True)
                values[label].append(float(np.mean((mean - truth) ** 2)))
                if r == 0 and curve_store is not None:
                    curve_store[label] = (mean, var)
            except Exception as exc:  # isolate per-model failures
                values[label].append(None)
                failures[label].append((r, f"{type(exc).__name__}: {exc}"))

    mean, stderr = _aggregate(labels, values)
    return BenchmarkReport(
        metric="mse",
        labels=labels,
        values={k: tuple(v) for k, v in values.items()},
        failures={k: tuple(v) for k, v in failures.items()},
        mean=mean,
        stderr=stderr,
        config_echo=config_echo(cfg),
    )


def run_tabular(
    train_path,
    test_path,
    input_columns,
    output_columns,
    models,
    master_seed=0,
    derived_outputs=None,
):
    """Fit models on a training table and report per-output MAE on a test table.

    ``derived_outputs`` maps a new output name to a pair of existing
    output names combined by root sum of squares, both for predictions
    and for test-set truth.
    """
    train = load_csv(train_path, input_columns, output_columns)
    test = load_csv(test_path, input_columns, output_columns)
    if train.input_names != test.input_names or train.output_names != test.output_names:
        raise DataSchemaError("train and test tables disagree on column roles")
    derived_outputs = dict(derived_outputs or {})
    for name, (a, b) in derived_outputs.items():
        if a not in output_columns or b not in output_columns:
            raise ConfigurationError(
                f"derived output {name!r} references unknown output columns {a!r}, {b!r}"
            )

    models = tuple((str(label), dict(params)) for label, params in models)
    labels = tuple(label for label, _ in models)
    if len(set(labels)) != len(labels):
        raise ConfigurationError("model labels must be unique")
    out_names = tuple(output_columns) + tuple(derived_outputs)
    col = {name: i for i, name in enumerate(output_columns)}

    values = {label: [] for label in labels}  # one entry per output, ordered
    failures = {label: [] for label in labels}
    for j, (label, params) in enumerate(models):
        params = dict(params)
        params["seed"] = model_seed(master_seed, 0, j)
        try:
            estimator = GPRegressor(**params).fit(train.x, train.y)
            predicted = estimator.predict(test.x)
            predicted = predicted[:, None] if predicted.ndim == 1 else predicted
            per_output = [
                float(np.mean(np.abs(predicted[:, col[name]] - test.y[:, col[name]])))
                for name in output_columns
            ]
            for name, (a, b) in derived_outputs.items():
                derived_pred = total_deformation(predicted[:, col[a]], predicted[:, col[b]])
                derived_true = total_deformation(test.y[:, col[a]], test.y[:, col[b]])
                per_output.append(float(np.mean(np.abs(derived_pred - derived_true))))
            values[label] = per_output
        except Exception as exc:
            values[label] = [None] * len(out_names)
            failures[label].append((0, f"{type(exc).__name__}: {exc}"))

    mean, stderr = {}, {}
    for label in labels:
        ok = [v for v in values[label] if v is not None]
        mean[label] = float(np.mean(ok)) if ok else None
        stderr[label] = 0.0 if ok else None
    return BenchmarkReport(
        metric="mae",
        labels=labels,
        values={k: tuple(v) for k, v in values.items()},
        failures={k: tuple(v) for k, v in failures.items()},
        mean=mean,
        stderr=stderr,
        config_echo={
            "train": str(train_path),
            "test": str(test_path),
            "input_columns": list(input_columns),
            "output_columns": list(out_names),
            "models": [[label, params] for label, params in models],
            "master_seed": master_seed,
            "seed_rule": SEED_RULE,
        },
    )


def report_to_dict(report):
    return {
        "metric": report.metric,
        "labels": list(report.labels),
        "values": {k: list(v) for k, v in report.values.items()},
        "failures": {k: [[r, m] for r, m in v] for k, v in report.failures.items()},
        "mean": report.mean,
        "stderr": report.stderr,
        "config": report.config_echo,
    }


def write_metrics_csv(report, path):
    """Columnar per-replication metric table (replication x model)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["replication"] + list(report.labels))
        n = max(len(v) for v in report.values.values())
        for r in range(n):
            row = [r]
            for label in report.labels:
                v = report.values[label][r]
                row.append("" if v is None else repr(float(v)))
            writer.writerow(row)


def write_curves_csv(curve_store, path):
    """Plot data for prediction curves: grid, truth, per-model mean and variance."""
    labels = [k for k in curve_store if not k.startswith("_")]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        header = ["x", "truth"]
        for label in labels:
            header += [f"{label}_mean", f"{label}_var"]
        writer.writerow(header)
        grid, truth = curve_store["_grid"], curve_store["_truth"]
        for i in range(grid.shape[0]):
            row = [repr(float(grid[i])), repr(float(truth[i]))]
            for label in labels:
                mean, var = curve_store[label]
                row += [repr(float(mean[i])), repr(float(var[i]))]
            writer.writerow(row)
