"""Command-line front end: fit, predict, bench, eigen, rerun.

Every command reads one JSON config, writes its numeric outputs plus
exactly one manifest.json into --out, and exits with a coded status:
0 ok, 2 config, 3 data/schema, 4 numeric/training, 5 I/O. Timestamps
live only in the manifest, so the numeric outputs of a rerun are
byte-identical. ``rerun`` replays the resolved config embedded in an
earlier manifest into a fresh output directory.

Heavy numeric imports happen inside the command functions so that
--threads can cap BLAS pools via environment variables first.
"""

import argparse
import csv
import datetime
import hashlib
import json
import os
import sys

MANIFEST_NAME = "manifest.json"
_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _cap_threads(n):
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _sha256_bytes(blob):
    return hashlib.sha256(blob).hexdigest()


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_json(path, obj):
    with open(path, "w") as handle:
        json.dump(obj, handle, indent=1)
        handle.write("\n")


class _Run:
    """Collects outputs and provenance, then writes them in one pass."""

    def __init__(self, command, config_path, config_resolved, out_dir, seeds, data_path=None):
        self.command = command
        self.config_path = config_path
        self.config_resolved = config_resolved
        self.out_dir = out_dir
        self.seeds = seeds
        self.data_path = data_path
        self.started = _now()
        self.files = {}  # name -> writer(path)

    def add_json(self, name, obj):
        self.files[name] = lambda path: _write_json(path, obj)

    def add_writer(self, name, writer):
        self.files[name] = writer

    def flush(self):
        from . import __version__

        os.makedirs(self.out_dir, exist_ok=True)
        for name, writer in self.files.items():
            writer(os.path.join(self.out_dir, name))
        manifest = {
            "format_version": 1,
            "tool": "nngpiu",
            "tool_version": __version__,
            "command": self.command,
            "config_path": None if self.config_path is None else str(self.config_path),
            "config_sha256": _sha256_bytes(_canonical(self.config_resolved)),
            "config_resolved": self.config_resolved,
            "data_path": None if self.data_path is None else str(self.data_path),
            "data_sha256": None if self.data_path is None else _sha256_file(self.data_path),
            "seeds": self.seeds,
            "timestamps": {"started": self.started, "finished": _now()},
            "outputs": sorted(self.files),
        }
        _write_json(os.path.join(self.out_dir, MANIFEST_NAME), manifest)


def _apply_seed(command, raw, seed):
    """Return a copy of the raw config with the seed override applied."""
    if seed is None:
        return raw
    raw = json.loads(json.dumps(raw))
    if command == "fit":
        raw.setdefault("model", {})["seed"] = seed
    elif command == "bench":
        raw.setdefault("experiment", {})["master_seed"] = seed
    elif command == "eigen":
        raw.setdefault("spectrum", {})["master_seed"] = seed
    return raw  # predict has no randomness to reseed


def cmd_fit(raw, out_dir, config_path=None, data_override=None, verbose=False):
    from .config import parse_fit
    from .data import load_csv
    from .models import GPRegressor, save_model

    cfg = parse_fit(raw)
    data_path = data_override or cfg["data"]["path"]
    if data_path is None:
        from .errors import ConfigurationError

        raise ConfigurationError("no data file: set data.path in the config or pass --data")
    dataset = load_csv(data_path, cfg["data"]["input_columns"], cfg["data"]["output_columns"])
    if verbose:
        print(f"fit: {dataset.n} rows, {dataset.input_dim} inputs, "
              f"{dataset.n_outputs} outputs", file=sys.stderr)
    estimator = GPRegressor(**cfg["model"]).fit(dataset.x, dataset.y)
    run = _Run("fit", config_path, raw, out_dir,
               seeds={"model_seed": estimator.seed}, data_path=data_path)
    run.add_writer("model.json", lambda path: save_model(estimator, path))
    run.flush()
    if verbose:
        print(f"fit: wrote {os.path.join(out_dir, 'model.json')}", file=sys.stderr)


def cmd_predict(raw, out_dir, config_path=None, data_override=None, verbose=False):
    from .config import parse_predict
    from .data import load_inputs_csv
    from .models import load_model

    cfg = parse_predict(raw)
    inputs_path = data_override or cfg["inputs"]["path"]
    if inputs_path is None:
        from .errors import ConfigurationError

        raise ConfigurationError("no input file: set inputs.path in the config or pass --data")
    estimator = load_model(cfg["model_file"])
    x = load_inputs_csv(inputs_path, cfg["inputs"]["input_columns"])
    if x.shape[0] and x.shape[1] != estimator.n_features_in_:
        from .errors import DataSchemaError

        raise DataSchemaError(
            f"model expects {estimator.n_features_in_} input column(s), got {x.shape[1]}"
        )
    names = list(cfg["inputs"]["input_columns"])
    q = estimator.n_outputs_
    header = names + [f"mean_{j}" for j in range(q)]
    if cfg["return_var"]:
        header += [f"var_{j}" for j in range(q)]
    rows = []
    if x.shape[0]:
        import numpy as np

        if cfg["return_var"]:
            mean, var = estimator.predict(x, return_var=True)
        else:
            mean, var = estimator.predict(x), None
        mean = np.atleast_2d(np.asarray(mean, dtype=float).T).T.reshape(x.shape[0], q)
        if var is not None:
            var = np.atleast_2d(np.asarray(var, dtype=float).T).T.reshape(x.shape[0], q)
        for i in range(x.shape[0]):
            row = [repr(float(v)) for v in x[i]] + [repr(float(v)) for v in mean[i]]
            if var is not None:
                row += [repr(float(v)) for v in var[i]]
            rows.append(row)
    if verbose:
        print(f"predict: {len(rows)} row(s)", file=sys.stderr)

    def write_predictions(path):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)

    run = _Run("predict", config_path, raw, out_dir, seeds={}, data_path=inputs_path)
    run.add_writer("predictions.csv", write_predictions)
    run.flush()


def cmd_bench(raw, out_dir, config_path=None, verbose=False):
    from .benchmarks import report_to_dict, run_experiment, write_curves_csv, write_metrics_csv
    from .config import parse_bench

    cfg = parse_bench(raw)
    if verbose:
        print(f"bench: {cfg.target.name}, {cfg.replications} replication(s), "
              f"{len(cfg.models)} model(s)", file=sys.stderr)
    curve_store = {}
    report = run_experiment(cfg, curve_store=curve_store)
    if verbose:
        for label in report.labels:
            print(f"bench: {label}: mean {report.metric} = {report.mean[label]}", file=sys.stderr)
    run = _Run("bench", config_path, raw, out_dir, seeds={"master_seed": cfg.master_seed})
    run.add_json("report.json", report_to_dict(report))
    run.add_writer("metrics.csv", lambda path: write_metrics_csv(report, path))
    run.add_writer("curves.csv", lambda path: write_curves_csv(curve_store, path))
    run.flush()


def _spectrum_filename(label):
    safe = "".join(ch if ch.isalnum() else "-" for ch in label).strip("-")
    return f"spectrum_{safe}.csv"


def cmd_eigen(raw, out_dir, config_path=None, verbose=False):
    from .config import parse_eigen
    from .spectrum import eigenspectrum, write_spectrum_csv

    cfg = parse_eigen(raw)
    run = _Run("eigen", config_path, raw, out_dir, seeds={"master_seed": cfg["master_seed"]})
    summary = {}
    for label, kernel in cfg["kernels"]:
        report = eigenspectrum(
            kernel,
            n_inputs=cfg["n_inputs"],
            replications=cfg["replications"],
            seed=cfg["master_seed"],
            window=cfg["window"],
        )
        if verbose:
            print(f"eigen: {label}: decay slope {report.decay_fit.slope:.4f}, "
                  f"R^2 {report.decay_fit.r_squared:.4f}", file=sys.stderr)
        summary[label] = {
            "file": _spectrum_filename(label),
            "slope": report.decay_fit.slope,
            "intercept": report.decay_fit.intercept,
            "r_squared": report.decay_fit.r_squared,
            "window": list(report.decay_fit.window),
            "n_used": report.decay_fit.n_used,
        }
        run.add_writer(
            _spectrum_filename(label),
            lambda path, rep=report: write_spectrum_csv(rep, path),
        )
    run.add_json("report.json", {
        "n_inputs": cfg["n_inputs"],
        "replications": cfg["replications"],
        "master_seed": cfg["master_seed"],
        "decay_fits": summary,
    })
    run.flush()


def cmd_rerun(manifest_path, out_dir, verbose=False):
    from .config import load_json
    from .errors import ConfigurationError, DataSchemaError

    manifest = load_json(manifest_path)
    for key in ("command", "config_resolved", "config_sha256"):
        if key not in manifest:
            raise ConfigurationError(f"{manifest_path}: not a manifest (missing {key!r})")
    command = manifest["command"]
    raw = manifest["config_resolved"]
    if _sha256_bytes(_canonical(raw)) != manifest["config_sha256"]:
        raise ConfigurationError(f"{manifest_path}: embedded config does not match its hash")
    data_path = manifest.get("data_path")
    if data_path is not None:
        recorded = manifest.get("data_sha256")
        if recorded is not None and _sha256_file(data_path) != recorded:
            raise DataSchemaError(f"{data_path}: contents changed since the original run")
    if verbose:
        print(f"rerun: {command} from {manifest_path}", file=sys.stderr)
    if command == "fit":
        cmd_fit(raw, out_dir, config_path=manifest_path, data_override=data_path, verbose=verbose)
    elif command == "predict":
        cmd_predict(raw, out_dir, config_path=manifest_path, data_override=data_path, verbose=verbose)
    elif command == "bench":
        cmd_bench(raw, out_dir, config_path=manifest_path, verbose=verbose)
    elif command == "eigen":
        cmd_eigen(raw, out_dir, config_path=manifest_path, verbose=verbose)
    else:
        raise ConfigurationError(f"{manifest_path}: unknown command {command!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nngpiu",
        description="Gaussian-process regression with composite kernels and "
                    "input-noise-adjusted covariance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("fit", "train a model from a config and a CSV table"),
        ("predict", "predict mean and variance for new inputs"),
        ("bench", "run a replicated simulation benchmark"),
        ("eigen", "compute kernel eigenspectra"),
        ("rerun", "replay a command from a manifest.json"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True,
                       help="JSON config file (for rerun: a manifest.json)")
        p.add_argument("--data", default=None,
                       help="CSV path overriding the config's data/inputs path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="cap BLAS thread pools (default 1)")
        p.add_argument("--verbose", action="store_true", help="progress on stderr")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    _cap_threads(args.threads)

    from .config import load_json
    from .errors import ConfigurationError, DataSchemaError, NumericError, TrainingError

    try:
        if args.command == "rerun":
            if args.seed is not None or args.data is not None:
                raise ConfigurationError("rerun replays the manifest exactly; "
                                         "--seed and --data are not allowed")
            cmd_rerun(args.config, args.out, verbose=args.verbose)
        else:
            raw = _apply_seed(args.command, load_json(args.config), args.seed)
            if args.command == "fit":
                cmd_fit(raw, args.out, config_path=args.config,
                        data_override=args.data, verbose=args.verbose)
            elif args.command == "predict":
                cmd_predict(raw, args.out, config_path=args.config,
                            data_override=args.data, verbose=args.verbose)
            elif args.command == "bench":
                cmd_bench(raw, args.out, config_path=args.config, verbose=args.verbose)
            else:
                cmd_eigen(raw, args.out, config_path=args.config, verbose=args.verbose)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataSchemaError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, TrainingError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 5
    return 0


if __name__ == "__main__":
    sys.exit(main())
