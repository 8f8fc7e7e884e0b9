"""Strict JSON config parsing for the command-line front end.

One JSON document format drives all commands. Every object level rejects
unknown keys, so a typo fails loudly instead of silently falling back to
a default. The per-command schemas are documented in the README.
"""

import json
from importlib import resources

from .benchmarks import ExperimentConfig, near_square_wave, zigzag, TargetFunction
from .errors import ConfigurationError
from .kernels import FAMILIES, KernelSpec
from .models import GPRegressor
from .spectrum import DEFAULT_WINDOW, kernel_label

_ESTIMATOR_KEYS = frozenset(GPRegressor().get_params())


def load_json(path):
    try:
        with open(path) as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc


def _require_object(value, path):
    if not isinstance(value, dict):
        raise ConfigurationError(f"{path}: expected an object")
    return value


def _walk(obj, path, fields):
    """Check ``obj`` against ``fields`` = {key: (required, converter)}."""
    _require_object(obj, path)
    unknown = set(obj) - set(fields)
    if unknown:
        raise ConfigurationError(f"{path}: unknown key(s) {sorted(unknown)}")
    out = {}
    for key, (required, convert) in fields.items():
        if key not in obj:
            if required:
                raise ConfigurationError(f"{path}: missing required key {key!r}")
            continue
        out[key] = convert(obj[key], f"{path}.{key}")
    return out


def _string(value, path):
    if not isinstance(value, str) or not value:
        raise ConfigurationError(f"{path}: expected a nonempty string")
    return value


def _boolean(value, path):
    if not isinstance(value, bool):
        raise ConfigurationError(f"{path}: expected true or false")
    return value


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{path}: expected an integer")
    return value


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{path}: expected a number")
    return float(value)


def _string_list(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigurationError(f"{path}: expected a nonempty list of strings")
    return [_string(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _estimator_params(value, path):
    _require_object(value, path)
    unknown = set(value) - _ESTIMATOR_KEYS
    if unknown:
        raise ConfigurationError(
            f"{path}: unknown estimator parameter(s) {sorted(unknown)}; "
            f"known: {sorted(_ESTIMATOR_KEYS)}"
        )
    if "model" not in value:
        raise ConfigurationError(f"{path}: missing required key 'model'")
    params = dict(value)
    if isinstance(params.get("noise_variances"), list):
        params["noise_variances"] = tuple(params["noise_variances"])
    if isinstance(params.get("bounds"), dict):
        params["bounds"] = {k: tuple(v) for k, v in params["bounds"].items()}
    return params


def _model_entry(value, path):
    out = _walk(value, path, {
        "label": (True, _string),
        "params": (True, _estimator_params),
    })
    return out["label"], out["params"]


def _model_list(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigurationError(f"{path}: expected a nonempty list of model entries")
    return tuple(_model_entry(v, f"{path}[{i}]") for i, v in enumerate(value))


def _interval(value, path):
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigurationError(f"{path}: expected [low, high]")
    return (_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


def parse_fit(obj, path="config"):
    out = _walk(obj, path, {
        "model": (True, _estimator_params),
        "data": (True, lambda v, p: _walk(v, p, {
            "path": (False, _string),
            "input_columns": (True, _string_list),
            "output_columns": (True, _string_list),
        })),
    })
    out["data"].setdefault("path", None)
    return out


def parse_predict(obj, path="config"):
    out = _walk(obj, path, {
        "model_file": (True, _string),
        "inputs": (True, lambda v, p: _walk(v, p, {
            "path": (False, _string),
            "input_columns": (True, _string_list),
        })),
        "return_var": (False, _boolean),
    })
    out["inputs"].setdefault("path", None)
    out.setdefault("return_var", True)
    return out


_TARGETS = {"zigzag": zigzag, "near_square_wave": near_square_wave}


def parse_bench(obj, path="config"):
    exp = _walk(obj, path, {"experiment": (True, lambda v, p: _walk(v, p, {
        "target": (True, _string),
        "domain": (False, _interval),
        "n_train": (True, _integer),
        "design": (True, _string),
        "sigma_u_sq": (True, _number),
        "sigma_eps_sq": (True, _number),
        "replications": (False, _integer),
        "eval_grid_size": (False, _integer),
        "master_seed": (False, _integer),
        "models": (True, _model_list),
    }))})["experiment"]
    if exp["target"] not in _TARGETS:
        raise ConfigurationError(
            f"{path}.experiment.target: unknown target {exp['target']!r}; "
            f"expected one of {sorted(_TARGETS)}"
        )
    target = _TARGETS[exp.pop("target")]()
    if "domain" in exp:
        target = TargetFunction(name=target.name, domain=exp.pop("domain"))
    try:
        return ExperimentConfig(target=target, **exp)
    except ValueError as exc:
        raise ConfigurationError(f"{path}.experiment: {exc}") from exc


def _kernel_entry(value, path):
    out = _walk(value, path, {
        "label": (False, _string),
        "family": (True, _string),
        "input_dim": (False, _integer),
        "depth": (False, _integer),
        "sigma_b_sq": (False, _number),
        "sigma_w_sq": (False, _number),
        "length_scale": (False, _number),
        "signal_var": (False, _number),
    })
    if out["family"] not in FAMILIES:
        raise ConfigurationError(
            f"{path}.family: unknown family {out['family']!r}; expected one of {FAMILIES}"
        )
    label = out.pop("label", None)
    out.setdefault("input_dim", 1)
    try:
        kernel = KernelSpec(**out)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return (label or kernel_label(kernel)), kernel


def parse_eigen(obj, path="config"):
    out = _walk(obj, path, {"spectrum": (True, lambda v, p: _walk(v, p, {
        "n_inputs": (False, _integer),
        "replications": (False, _integer),
        "master_seed": (False, _integer),
        "window": (False, _interval),
        "kernels": (True, lambda vv, pp: [
            _kernel_entry(k, f"{pp}[{i}]") for i, k in enumerate(_as_list(vv, pp))
        ]),
    }))})["spectrum"]
    out.setdefault("n_inputs", 100)
    out.setdefault("replications", 10)
    out.setdefault("master_seed", 0)
    if "window" in out:
        lo, hi = out["window"]
        out["window"] = (int(lo), int(hi))
    else:
        out["window"] = DEFAULT_WINDOW
    labels = [label for label, _ in out["kernels"]]
    if len(set(labels)) != len(labels):
        raise ConfigurationError(f"{path}.spectrum.kernels: labels must be unique")
    return out


def _as_list(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigurationError(f"{path}: expected a nonempty list")
    return value


PARSERS = {"fit": parse_fit, "predict": parse_predict, "bench": parse_bench, "eigen": parse_eigen}


def bundled_config_path(name):
    """Filesystem path of a packaged example config (zigzag, near_square, eigen)."""
    path = resources.files("nngpiu").joinpath("configs", f"{name}.json")
    if not path.is_file():
        raise ConfigurationError(f"no bundled config named {name!r}")
    return str(path)
