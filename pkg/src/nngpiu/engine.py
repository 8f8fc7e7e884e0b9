"""Pseudo-likelihood training, prediction, and linear-predictor weights.

Hyperparameters are selected by maximizing the Gaussian log pseudo
likelihood

    l(theta) = -1/2 r' (K + s_eps^2 I)^{-1} r - 1/2 log|K + s_eps^2 I|
               - n/2 log(2 pi),    r = y - F beta,

where K is the (possibly noise-adjusted) kernel matrix, F an optional
linear trend basis, and beta the generalized least-squares solution under
the current covariance. All solves go through a Cholesky factorization
with the escalating-jitter policy.

Optimization runs in log-parameter space: box bounds become a log box,
and L-BFGS-B uses central-difference gradients. Multistart draws extra
starting points uniformly from the log box under a fixed seed; a grid
strategy is available as a derivative-free alternative.

Noise-adjusted fits freeze one Monte-Carlo draw set up front and reuse it
for every likelihood evaluation and later for prediction, so the
objective is deterministic and smooth in the hyperparameters.
"""

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from . import kernels
from ._linalg import chol_with_jitter
from .errors import NumericError, TrainingError
from .kernels import GramMatrix, KernelSpec
from .noise import NoiseSample, NoiseSpec, adjusted_diag, adjusted_gram, draw_noise

OPT_STRATEGIES = ("multistart_gradient", "grid_search")

# log-box search ranges; variance-like parameters share one range
DEFAULT_BOUNDS = {
    "sigma_b_sq": (1e-3, 1e3),
    "sigma_w_sq": (1e-3, 1e3),
    "signal_var": (1e-3, 1e3),
    "length_scale": (1e-2, 1e2),
    "sigma_eps_sq": (1e-6, 1.0),
}

_PENALTY = 1e15  # objective value for numerically failed evaluations


@dataclass(frozen=True)
class OptConfig:
    """Training strategy, budgets, and structural switches.

    ``sigma_eps_sq`` pins the observation-noise variance when set;
    otherwise it is optimized jointly with the kernel parameters.
    ``trend`` adds an intercept-plus-linear mean estimated by generalized
    least squares inside every likelihood evaluation; ``two_stage_trend``
    is the ablation that fixes the trend by ordinary least squares first.
    """

    strategy: str = "multistart_gradient"
    n_restarts: int = 10
    seed: int = 0
    maxiter: int = 50
    ftol: float = 1e-9
    grid_points: int = 6
    bounds: dict | None = None
    sigma_eps_sq: float | None = None
    trend: bool = False
    two_stage_trend: bool = False

    def __post_init__(self):
        if self.strategy not in OPT_STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {OPT_STRATEGIES}"
            )
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be at least 1")
        if self.maxiter < 1:
            raise ValueError("maxiter must be at least 1")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        if self.sigma_eps_sq is not None and self.sigma_eps_sq < 0:
            raise ValueError("pinned sigma_eps_sq must be nonnegative")
        if self.two_stage_trend and not self.trend:
            raise ValueError("two_stage_trend requires trend")
        if self.bounds is not None:
            for name, (lo, hi) in self.bounds.items():
                if name not in DEFAULT_BOUNDS:
                    raise ValueError(f"unknown bound name {name!r}")
                if not 0 < lo < hi:
                    raise ValueError(f"bounds for {name} must satisfy 0 < lo < hi")

    def bound_for(self, name):
        if self.bounds and name in self.bounds:
            return self.bounds[name]
        return DEFAULT_BOUNDS[name]


@dataclass(frozen=True)
class TrainedModel:
    """Everything needed to predict: optimized kernel, frozen draws, factors."""

    kernel: KernelSpec
    noise: NoiseSpec | None
    sample: NoiseSample | None
    sigma_eps_sq: float
    trend_coeffs: np.ndarray | None
    x_train: np.ndarray
    y_train: np.ndarray
    chol_lower: np.ndarray
    jitter: float
    alpha: np.ndarray
    log_likelihood: float
    train_log: tuple = field(default_factory=tuple)

    @property
    def n_train(self):
        return self.x_train.shape[0]


def trend_basis(x):
    """Intercept column followed by the raw coordinates."""
    x = np.asarray(x, dtype=float)
    return np.hstack([np.ones((x.shape[0], 1)), x])


def _likelihood_parts(values, y, sigma_eps_sq, basis=None, beta=None):
    """Cholesky-based likelihood with GLS trend; returns value plus reusables."""
    n = y.shape[0]
    shifted = values + sigma_eps_sq * np.eye(n)
    chol_lower, jitter = chol_with_jitter(shifted)
    if basis is None:
        residual = y
        beta = None
    else:
        if beta is None:
            # generalized least squares under the current covariance
            sol_basis = scipy.linalg.cho_solve((chol_lower, True), basis)
            gram_small = basis.T @ sol_basis
            try:
                beta = np.linalg.solve(gram_small, sol_basis.T @ y)
            except np.linalg.LinAlgError as exc:
                raise NumericError(f"singular trend system: {exc}") from exc
        residual = y - basis @ beta
    alpha = scipy.linalg.cho_solve((chol_lower, True), residual)
    log_det = 2.0 * np.sum(np.log(np.diag(chol_lower)))
    value = -0.5 * float(residual @ alpha) - 0.5 * log_det - 0.5 * n * math.log(2.0 * math.pi)
    return value, beta, alpha, chol_lower, jitter


def log_pseudo_likelihood(gram_matrix, y, sigma_eps_sq, basis=None, beta=None):
    """Gaussian log pseudo likelihood of ``y`` under ``K + sigma_eps_sq I``.

    ``gram_matrix`` may be a GramMatrix or a plain symmetric array. With a
    ``basis`` the mean is ``basis @ beta``, where ``beta`` defaults to the
    generalized least-squares estimate under the same covariance.
    """
    values = gram_matrix.values if isinstance(gram_matrix, GramMatrix) else np.asarray(gram_matrix, dtype=float)
    y = np.asarray(y, dtype=float)
    value, _, _, _, _ = _likelihood_parts(values, y, float(sigma_eps_sq), basis, beta)
    return value


def _free_param_names(kernel, opt):
    if kernel.is_composite or kernel.family == "base":
        names = ["sigma_b_sq", "sigma_w_sq"]
    else:
        names = ["length_scale", "signal_var"]
    if opt.sigma_eps_sq is None:
        names.append("sigma_eps_sq")
    return names


def _train_gram(x, kernel, sample):
    if sample is None:
        return kernels.gram(x, kernel)
    return adjusted_gram(x, kernel, sample)


def fit(x, y, kernel, opt=None, noise_spec=None, noise_scale=None):
    """Select hyperparameters by pseudo-likelihood and return a TrainedModel.

    Parameters
    ----------
    x, y : arrays of shape (n, d) and (n,)
        Training inputs and responses.
    kernel : KernelSpec
        Template fixing family, depth, and input_dim; its hyperparameter
        values seed the first optimizer start.
    opt : OptConfig, optional
    noise_spec : NoiseSpec, optional
        When given, one draw set is frozen up front and the noise-adjusted
        Gram replaces the plain one in every evaluation.
    noise_scale : array, optional
        Per-coordinate standardization factors forwarded to the draws.
    """
    opt = opt or OptConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.ndim != 2 or x.shape[1] != kernel.input_dim:
        raise ValueError(f"x must have shape (n, {kernel.input_dim})")
    if y.shape[0] != x.shape[0]:
        raise ValueError("x and y disagree on the number of observations")
    if x.shape[0] < 2:
        raise ValueError("need at least two observations")

    sample = None
    if noise_spec is not None:
        sample = draw_noise(noise_spec, kernel.input_dim, scale=noise_scale)

    basis = trend_basis(x) if opt.trend else None
    fixed_beta = None
    if opt.two_stage_trend:
        fixed_beta, *_ = np.linalg.lstsq(basis, y, rcond=None)

    names = _free_param_names(kernel, opt)
    linear_bounds = [opt.bound_for(name) for name in names]
    log_bounds = [tuple(np.log(b)) for b in linear_bounds]

    def split(theta):
        # exp(log(hi)) can overshoot hi by an ulp; clip back to the box
        params = {
            name: float(np.clip(value, lo, hi))
            for name, value, (lo, hi) in zip(names, np.exp(theta), linear_bounds)
        }
        eps = params.pop("sigma_eps_sq", opt.sigma_eps_sq)
        return kernel.with_params(**params), float(eps)

    def objective(theta):
        candidate, eps = split(theta)
        try:
            gram_matrix = _train_gram(x, candidate, sample)
            value, *_ = _likelihood_parts(gram_matrix.values, y, eps, basis, fixed_beta)
        except NumericError:
            return _PENALTY
        if not np.isfinite(value):
            return _PENALTY
        return -value

    start = np.array(
        [np.clip(np.log(getattr(kernel, n, 0.1) if n != "sigma_eps_sq" else 0.1), lo, hi)
         for n, (lo, hi) in zip(names, log_bounds)]
    )

    log_entries = []
    best_theta, best_value = None, np.inf
    if opt.strategy == "grid_search":
        axes = [np.linspace(lo, hi, opt.grid_points) for lo, hi in log_bounds]
        for point in itertools.product(*axes):
            theta = np.asarray(point)
            value = objective(theta)
            if value < best_value:
                best_theta, best_value = theta, value
        log_entries.append(
            {"strategy": "grid_search", "evaluations": opt.grid_points ** len(names),
             "best_objective": float(best_value)}
        )
    else:
        rng = np.random.default_rng(opt.seed)
        starts = [start] + [
            np.array([rng.uniform(lo, hi) for lo, hi in log_bounds])
            for _ in range(opt.n_restarts - 1)
        ]
        for theta0 in starts:
            result = minimize(
                objective,
                theta0,
                method="L-BFGS-B",
                jac="3-point",
                bounds=log_bounds,
                options={"maxiter": opt.maxiter, "ftol": opt.ftol},
            )
            log_entries.append(
                {
                    "start": [float(v) for v in np.exp(theta0)],
                    "params": [float(v) for v in np.exp(result.x)],
                    "objective": float(result.fun),
                    "converged": bool(result.success),
                }
            )
            if result.fun < best_value:
                best_theta, best_value = result.x, result.fun

    if best_theta is None or best_value >= _PENALTY:
        raise TrainingError(
            "every optimizer start failed numerically", details=log_entries
        )

    fitted_kernel, fitted_eps = split(best_theta)
    gram_matrix = _train_gram(x, fitted_kernel, sample)
    value, beta, alpha, chol_lower, jitter = _likelihood_parts(
        gram_matrix.values, y, fitted_eps, basis, fixed_beta
    )
    return TrainedModel(
        kernel=fitted_kernel,
        noise=noise_spec,
        sample=sample,
        sigma_eps_sq=fitted_eps,
        trend_coeffs=beta,
        x_train=x,
        y_train=y,
        # canonical C order: LAPACK wrappers pick layout-dependent code paths,
        # and predictions must not change across a save/load round trip
        chol_lower=np.ascontiguousarray(chol_lower),
        jitter=jitter,
        alpha=alpha,
        log_likelihood=value,
        train_log=tuple(log_entries),
    )


def _cross_train(model, xstar):
    if model.sample is None:
        return kernels.cross_values(model.x_train, xstar, model.kernel)
    return adjusted_gram(model.x_train, model.kernel, model.sample, xstar=xstar)


def predict(model, xstar, return_var=False):
    """Posterior mean (and clamped variance) at noise-free query points."""
    xstar = np.asarray(xstar, dtype=float)
    if xstar.ndim != 2 or xstar.shape[1] != model.kernel.input_dim:
        raise ValueError(f"xstar must have shape (s, {model.kernel.input_dim})")
    cross = _cross_train(model, xstar)  # (n, s)
    # row-at-a-time solves on contiguous columns keep every prediction bitwise
    # independent of the batch it arrives in (numpy dot picks a different
    # summation path for strided views, so slices must be materialized)
    columns = [np.ascontiguousarray(cross[:, j]) for j in range(xstar.shape[0])]
    mean = np.array([float(col @ model.alpha) for col in columns])
    if model.trend_coeffs is not None:
        basis = trend_basis(xstar)
        mean = mean + np.array(
            [float(basis[j] @ model.trend_coeffs) for j in range(xstar.shape[0])]
        )
    if not return_var:
        return mean
    if model.sample is None:
        prior = kernels.diag_values(xstar, model.kernel)
    else:
        prior = adjusted_diag(xstar, model.kernel, model.sample)
    correction = np.empty(xstar.shape[0])
    for j, col in enumerate(columns):
        solved = scipy.linalg.solve_triangular(model.chol_lower, col, lower=True)
        correction[j] = float(solved @ solved)
    var = prior - correction
    if np.any(var < 0):
        warnings.warn(
            f"clamped {int(np.sum(var < 0))} negative predictive variance(s) to zero",
            stacklevel=2,
        )
        var = np.maximum(var, 0.0)
    return mean, var


def blup_weights(model, xstar):
    """Linear-predictor weights w(x*) with w = (K + sigma_eps^2 I)^{-1} k*."""
    xstar = np.asarray(xstar, dtype=float)
    if xstar.ndim != 2 or xstar.shape[1] != model.kernel.input_dim:
        raise ValueError(f"xstar must have shape (s, {model.kernel.input_dim})")
    cross = _cross_train(model, xstar)
    return scipy.linalg.cho_solve((model.chol_lower, True), cross).T
