"""Gaussian-process regression with deep composite kernels and input-noise-adjusted covariance.

Submodules are imported lazily so the command-line entry point can cap
BLAS thread pools through environment variables before numpy loads.
"""

import importlib
from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("nngpiu")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

_SUBMODULES = {
    "benchmarks",
    "cli",
    "config",
    "data",
    "engine",
    "errors",
    "kernels",
    "models",
    "noise",
    "spectrum",
}
_EXPORTS = {
    "GPRegressor": "models",
    "save_model": "models",
    "load_model": "models",
    "KernelSpec": "kernels",
    "NoiseSpec": "noise",
    "Dataset": "data",
    "ConfigurationError": "errors",
    "DataSchemaError": "errors",
    "NumericError": "errors",
    "TrainingError": "errors",
}


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    if name in _EXPORTS:
        return getattr(importlib.import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | _SUBMODULES | set(_EXPORTS))
