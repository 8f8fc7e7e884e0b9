"""Model zoo behind one sklearn-style estimator, plus JSON persistence.

Five model kinds share the facade:

* ``linear``      ordinary least squares on an intercept-plus-linear basis
* ``shallow_gp``  GP with a shallow kernel (rbf or matern12)
* ``nngp``        GP with a deep composite kernel (arccosine or arcsine)
* ``kale``        shallow kernel with the Monte-Carlo input-noise adjustment
* ``nngpiu``      composite kernel with the same adjustment

Multi-output targets are fit independently per column. Inputs and outputs
are z-scored by default; noise draws are rescaled into standardized units
and pinned observation-noise variances are converted per output.
"""

import hashlib
import json
from dataclasses import asdict

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import engine
from .data import Standardization
from .engine import OptConfig, TrainedModel
from .errors import ConfigurationError, DataSchemaError
from .kernels import COMPOSITE_FAMILIES, SHALLOW_FAMILIES, KernelSpec
from .noise import NoiseSample, NoiseSpec

MODEL_KINDS = ("linear", "shallow_gp", "nngp", "kale", "nngpiu")

_DEFAULT_FAMILY = {"shallow_gp": "rbf", "kale": "rbf", "nngp": "arcsine", "nngpiu": "arcsine"}
_ADJUSTED_KINDS = ("kale", "nngpiu")
_COMPOSITE_KINDS = ("nngp", "nngpiu")

FORMAT_VERSION = 1


class _LinearFit:
    """Least-squares coefficients with the classical estimation variance."""

    def __init__(self, basis, y):
        self.beta, *_ = np.linalg.lstsq(basis, y, rcond=None)
        residual = y - basis @ self.beta
        dof = max(basis.shape[0] - basis.shape[1], 1)
        self.sigma_sq = float(residual @ residual) / dof
        self.basis_gram_inv = np.linalg.pinv(basis.T @ basis)

    def predict(self, basis):
        mean = basis @ self.beta
        var = self.sigma_sq * np.einsum("ij,jk,ik->i", basis, self.basis_gram_inv, basis)
        return mean, var


class GPRegressor(BaseEstimator, RegressorMixin):
    """Gaussian-process regressor with optional deep kernels and input-noise adjustment.

    Parameters
    ----------
    model : str
        One of ``"linear"``, ``"shallow_gp"``, ``"nngp"``, ``"kale"``,
        ``"nngpiu"``.
    family : str, optional
        Kernel family; defaults to rbf for shallow kinds and arccosine for
        composite kinds. Must match the kind (shallow vs composite).
    depth : int
        Hidden layers of the composite kernel; composite kinds need >= 1.
    sigma_u_sq : float, optional
        Isotropic input-noise variance (original units). Required by the
        adjusted kinds (zero declares noise-free inputs) and rejected by
        the others. Mutually exclusive with ``noise_variances``.
    noise_variances : sequence, optional
        Per-coordinate input-noise variances for the adjusted kinds.
    mc_samples : int
        Monte-Carlo draws for the adjusted kernel estimators.
    sigma_eps_sq : float, optional
        Pin the observation-noise variance (original units) instead of
        estimating it.
    trend : bool, optional
        Linear trend with intercept, estimated by generalized least
        squares inside the likelihood. Defaults to True for ``linear``
        (which is nothing but the trend) and False for the GP kinds.
    two_stage_trend : bool
        Ablation: fix the trend by ordinary least squares first.
    strategy : str
        ``"multistart_gradient"`` or ``"grid_search"``.
    n_restarts, maxiter, ftol, grid_points : optimizer budgets.
    bounds : dict, optional
        Per-parameter (low, high) overrides for the search box.
    standardize : bool
        Z-score inputs and outputs before fitting.
    seed : int
        Drives both the optimizer restarts and the frozen noise draws.
    """

    def __init__(
        self,
        model="nngpiu",
        family=None,
        depth=2,
        sigma_u_sq=None,
        noise_variances=None,
        mc_samples=30,
        sigma_eps_sq=None,
        trend=None,
        two_stage_trend=False,
        strategy="multistart_gradient",
        n_restarts=10,
        maxiter=50,
        ftol=1e-9,
        grid_points=6,
        bounds=None,
        standardize=True,
        seed=0,
    ):
        self.model = model
        self.family = family
        self.depth = depth
        self.sigma_u_sq = sigma_u_sq
        self.noise_variances = noise_variances
        self.mc_samples = mc_samples
        self.sigma_eps_sq = sigma_eps_sq
        self.trend = trend
        self.two_stage_trend = two_stage_trend
        self.strategy = strategy
        self.n_restarts = n_restarts
        self.maxiter = maxiter
        self.ftol = ftol
        self.grid_points = grid_points
        self.bounds = bounds
        self.standardize = standardize
        self.seed = seed

    # -- configuration ----------------------------------------------------

    def _resolved_family(self):
        if self.model == "linear":
            if self.family is not None:
                raise ConfigurationError("linear model takes no kernel family")
            return None
        family = self.family or _DEFAULT_FAMILY[self.model]
        if self.model in _COMPOSITE_KINDS and family not in COMPOSITE_FAMILIES:
            raise ConfigurationError(
                f"{self.model} requires a composite family {COMPOSITE_FAMILIES}, got {family!r}"
            )
        if self.model in ("shallow_gp", "kale") and family not in SHALLOW_FAMILIES:
            raise ConfigurationError(
                f"{self.model} requires a shallow family {SHALLOW_FAMILIES}, got {family!r}"
            )
        return family

    def _resolved_trend(self):
        if self.model == "linear":
            if self.trend is False:
                raise ConfigurationError("linear model is trend-only; trend=False is contradictory")
            return True
        return bool(self.trend)

    def _noise_spec(self, input_dim):
        declared = self.sigma_u_sq is not None or self.noise_variances is not None
        if self.model not in _ADJUSTED_KINDS:
            if declared:
                raise ConfigurationError(
                    f"{self.model} does not use input noise; remove sigma_u_sq/noise_variances"
                )
            return None
        if self.sigma_u_sq is not None and self.noise_variances is not None:
            raise ConfigurationError("give either sigma_u_sq or noise_variances, not both")
        if not declared:
            raise ConfigurationError(
                f"{self.model} requires sigma_u_sq or noise_variances"
            )
        try:
            if self.sigma_u_sq is not None:
                return NoiseSpec(
                    sigma_u_sq=float(self.sigma_u_sq),
                    mc_samples=self.mc_samples,
                    seed=self.seed,
                )
            return NoiseSpec(
                distribution="gaussian_diagonal",
                variances=tuple(self.noise_variances),
                mc_samples=self.mc_samples,
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    def _kernel_template(self, input_dim, family):
        if self.model in _COMPOSITE_KINDS:
            if self.depth < 1:
                raise ConfigurationError(f"{self.model} needs depth >= 1")
            return KernelSpec(family=family, input_dim=input_dim, depth=self.depth)
        return KernelSpec(family=family, input_dim=input_dim)

    def _opt_config(self, y_scale):
        eps = self.sigma_eps_sq
        if eps is not None:
            eps = float(eps) / float(y_scale) ** 2  # pinning happens in original units
        try:
            return OptConfig(
                strategy=self.strategy,
                n_restarts=self.n_restarts,
                seed=self.seed,
                maxiter=self.maxiter,
                ftol=self.ftol,
                grid_points=self.grid_points,
                bounds=self.bounds,
                sigma_eps_sq=eps,
                trend=self._resolved_trend(),
                two_stage_trend=self.two_stage_trend,
            )
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    # -- estimator API ------------------------------------------------------

    def fit(self, X, y):
        if self.model not in MODEL_KINDS:
            raise ConfigurationError(
                f"unknown model {self.model!r}; expected one of {MODEL_KINDS}"
            )
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        self._y_was_1d_ = y.ndim == 1
        targets = y[:, None] if y.ndim == 1 else y
        family = self._resolved_family()
        noise_spec = self._noise_spec(X.shape[1])  # validates for every kind
        self._resolved_trend()

        if self.standardize:
            transform = Standardization.from_training(X, targets)
            x_fit = transform.apply_x(X)
            y_fit = transform.apply_y(targets)
        else:
            transform = None
            x_fit, y_fit = X, targets

        self.standardization_ = transform
        self.n_features_in_ = X.shape[1]
        self.n_outputs_ = targets.shape[1]

        fits = []
        for j in range(self.n_outputs_):
            if self.model == "linear":
                fits.append(_LinearFit(engine.trend_basis(x_fit), y_fit[:, j]))
                continue
            y_scale = transform.y_scale[j] if transform else 1.0
            fits.append(
                engine.fit(
                    x_fit,
                    y_fit[:, j],
                    self._kernel_template(X.shape[1], family),
                    self._opt_config(y_scale),
                    noise_spec=noise_spec,
                    noise_scale=transform.x_scale if transform else None,
                )
            )
        self.fits_ = fits
        return self

    def _transformed_query(self, X):
        check_is_fitted(self, "fits_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        if self.standardization_ is not None:
            return X, self.standardization_.apply_x(X)
        return X, X

    def predict(self, X, return_var=False):
        """Posterior mean (and variance) in original units at noise-free inputs."""
        _, x_query = self._transformed_query(X)
        means, variances = [], []
        for j, fitted in enumerate(self.fits_):
            if isinstance(fitted, _LinearFit):
                mean, var = fitted.predict(engine.trend_basis(x_query))
            else:
                mean, var = engine.predict(fitted, x_query, return_var=True)
            if self.standardization_ is not None:
                mean = self.standardization_.restore_y_mean(mean, j)
                var = self.standardization_.restore_y_var(var, j)
            means.append(mean)
            variances.append(var)
        mean = np.column_stack(means)
        var = np.column_stack(variances)
        if self._y_was_1d_:
            mean, var = mean[:, 0], var[:, 0]
        return (mean, var) if return_var else mean


def checksum_arrays(*arrays):
    digest = hashlib.sha256()
    for array in arrays:
        digest.update(np.ascontiguousarray(array, dtype=float).tobytes())
    return digest.hexdigest()


def _noise_to_dict(spec):
    if spec is None:
        return None
    if spec.distribution == "custom":
        raise ConfigurationError("models with a custom noise sampler cannot be saved")
    payload = asdict(spec)
    payload.pop("sampler")
    return payload


def _fit_to_dict(fitted):
    if isinstance(fitted, _LinearFit):
        return {
            "type": "linear",
            "beta": fitted.beta.tolist(),
            "sigma_sq": fitted.sigma_sq,
            "basis_gram_inv": fitted.basis_gram_inv.tolist(),
        }
    return {
        "type": "gp",
        "kernel": asdict(fitted.kernel),
        "noise": _noise_to_dict(fitted.noise),
        "draws": None if fitted.sample is None else fitted.sample.draws.tolist(),
        "sigma_eps_sq": fitted.sigma_eps_sq,
        "trend_coeffs": None if fitted.trend_coeffs is None else fitted.trend_coeffs.tolist(),
        "y_train": fitted.y_train.tolist(),
        "chol_lower": fitted.chol_lower.tolist(),
        "jitter": fitted.jitter,
        "alpha": fitted.alpha.tolist(),
        "log_likelihood": fitted.log_likelihood,
        "train_log": list(fitted.train_log),
    }


def _fit_from_dict(payload, x_train):
    if payload["type"] == "linear":
        fitted = _LinearFit.__new__(_LinearFit)
        fitted.beta = np.asarray(payload["beta"])
        fitted.sigma_sq = payload["sigma_sq"]
        fitted.basis_gram_inv = np.asarray(payload["basis_gram_inv"])
        return fitted
    noise_payload = payload["noise"]
    noise_spec = NoiseSpec(**noise_payload) if noise_payload else None
    sample = None
    if payload["draws"] is not None:
        sample = NoiseSample(draws=np.asarray(payload["draws"]))
    trend = payload["trend_coeffs"]
    return TrainedModel(
        kernel=KernelSpec(**payload["kernel"]),
        noise=noise_spec,
        sample=sample,
        sigma_eps_sq=payload["sigma_eps_sq"],
        trend_coeffs=None if trend is None else np.asarray(trend),
        x_train=x_train,
        y_train=np.asarray(payload["y_train"]),
        chol_lower=np.asarray(payload["chol_lower"]),
        jitter=payload["jitter"],
        alpha=np.asarray(payload["alpha"]),
        log_likelihood=payload["log_likelihood"],
        train_log=tuple(payload["train_log"]),
    )


def _standardization_to_dict(transform):
    if transform is None:
        return None
    return {
        "x_mean": transform.x_mean.tolist(),
        "x_scale": transform.x_scale.tolist(),
        "y_mean": transform.y_mean.tolist(),
        "y_scale": transform.y_scale.tolist(),
    }


def save_model(estimator, path):
    """Serialize a fitted GPRegressor to JSON with a training-data checksum.

    Floats survive exactly (JSON uses shortest round-trip repr), so a
    reloaded model predicts bit-for-bit identically.
    """
    check_is_fitted(estimator, "fits_")
    x_train = next(
        (f.x_train for f in estimator.fits_ if isinstance(f, TrainedModel)), None
    )
    if x_train is None:
        # linear-only models keep no design matrix; persist an empty one
        x_train = np.zeros((0, estimator.n_features_in_))
    payload = {
        "format_version": FORMAT_VERSION,
        "params": estimator.get_params(),
        "y_was_1d": estimator._y_was_1d_,
        "n_features_in": estimator.n_features_in_,
        "n_outputs": estimator.n_outputs_,
        "standardization": _standardization_to_dict(estimator.standardization_),
        "x_train": x_train.tolist(),
        "fits": [_fit_to_dict(f) for f in estimator.fits_],
        "checksum": checksum_arrays(x_train),
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=1)


def load_model(path):
    """Rebuild a fitted GPRegressor saved by save_model; verifies the checksum."""
    with open(path) as handle:
        payload = json.load(handle)
    if payload.get("format_version") != FORMAT_VERSION:
        raise DataSchemaError(
            f"{path}: unsupported model format {payload.get('format_version')!r}"
        )
    x_train = np.asarray(payload["x_train"], dtype=float).reshape(
        -1, payload["n_features_in"]
    )
    if checksum_arrays(x_train) != payload["checksum"]:
        raise DataSchemaError(f"{path}: training-data checksum mismatch")
    estimator = GPRegressor(**payload["params"])
    estimator._y_was_1d_ = payload["y_was_1d"]
    estimator.n_features_in_ = payload["n_features_in"]
    estimator.n_outputs_ = payload["n_outputs"]
    std = payload["standardization"]
    estimator.standardization_ = (
        None
        if std is None
        else Standardization(
            x_mean=np.asarray(std["x_mean"]),
            x_scale=np.asarray(std["x_scale"]),
            y_mean=np.asarray(std["y_mean"]),
            y_scale=np.asarray(std["y_scale"]),
        )
    )
    estimator.fits_ = [_fit_from_dict(f, x_train) for f in payload["fits"]]
    return estimator
