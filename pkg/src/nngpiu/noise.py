"""Input-noise distributions and the noise-adjusted kernel.

The observation model is y(x) = f(x + u) + eps with latent perturbations
u drawn from a known distribution. The adjusted kernel is the expectation
of the noise-free kernel over those perturbations and is approximated by
Monte Carlo with one shared draw set:

* off-diagonal (train x train): (1/m^2) sum_{i,j} c(x + u_i, x2 + u_j)
* diagonal:                     (1/m)   sum_i   c(x + u_i, x + u_i)
* test x train:                 (1/m)   sum_i   c(x + u_i, x*)

Sharing a single draw set across all Gram entries keeps the estimated
matrix positive semidefinite. An all-zero draw set collapses every
estimator to the unadjusted kernel exactly, so the noise-free limit is
recovered without tolerance games.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from ._linalg import min_jitter
from .kernels import GramMatrix

DISTRIBUTIONS = ("gaussian_isotropic", "gaussian_diagonal", "custom")

# keep expanded-set kernel blocks below ~CHUNK_ROWS^2 entries
CHUNK_ROWS = 2048

CV_THRESHOLD = 0.025
MC_SAMPLES_DEFAULT = 30
MC_SAMPLES_MAX = 480


@dataclass(frozen=True)
class NoiseSpec:
    """Input-noise distribution plus the Monte-Carlo sample budget.

    ``sigma_u_sq`` (isotropic) or ``variances`` (per-coordinate) may be
    zero, which declares the degenerate noise-free distribution. A custom
    distribution supplies ``sampler(rng, m, d) -> (m, d) array``.
    """

    distribution: str = "gaussian_isotropic"
    sigma_u_sq: float | None = None
    variances: tuple | None = None
    sampler: object = None
    mc_samples: int = MC_SAMPLES_DEFAULT
    seed: int = 0
    standardization_adjusted: bool = True

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(
                f"unknown noise distribution {self.distribution!r}; expected one of {DISTRIBUTIONS}"
            )
        if self.mc_samples < 2:
            raise ValueError("mc_samples must be at least 2")
        if self.distribution == "gaussian_isotropic":
            if self.sigma_u_sq is None or self.sigma_u_sq < 0:
                raise ValueError("gaussian_isotropic requires sigma_u_sq >= 0")
        elif self.distribution == "gaussian_diagonal":
            if self.variances is None:
                raise ValueError("gaussian_diagonal requires a variances vector")
            object.__setattr__(self, "variances", tuple(float(v) for v in self.variances))
            if any(v < 0 for v in self.variances):
                raise ValueError("variances must be nonnegative")
        elif self.sampler is None or not callable(self.sampler):
            raise ValueError("custom distribution requires a callable sampler")


@dataclass(frozen=True)
class NoiseSample:
    """Frozen draw set shared across all kernel-entry estimates."""

    draws: np.ndarray
    cv_estimate: float = 0.0

    @property
    def size(self):
        return self.draws.shape[0]

    @property
    def is_zero(self):
        return not self.draws.any()


def _rng_for(spec, stream=0):
    return np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(stream,)))


def draw_noise(spec, input_dim, scale=None, _stream=0):
    """Draw ``spec.mc_samples`` i.i.d. perturbations, deterministically from the seed.

    ``scale`` carries per-coordinate standardization factors; when present
    (and the spec opts in) the draws are rescaled into standardized units
    so the noise distribution stays consistent with the transformed data.
    """
    rng = _rng_for(spec, _stream)
    m = spec.mc_samples
    if spec.distribution == "gaussian_isotropic":
        draws = rng.normal(0.0, np.sqrt(spec.sigma_u_sq), size=(m, input_dim))
    elif spec.distribution == "gaussian_diagonal":
        variances = np.asarray(spec.variances, dtype=float)
        if variances.shape != (input_dim,):
            raise ValueError(
                f"variances has length {variances.shape[0]}, expected {input_dim}"
            )
        draws = rng.normal(0.0, np.sqrt(variances), size=(m, input_dim))
    else:
        draws = np.asarray(spec.sampler(rng, m, input_dim), dtype=float)
        if draws.shape != (m, input_dim):
            raise ValueError(
                f"custom sampler returned shape {draws.shape}, expected {(m, input_dim)}"
            )
    if scale is not None and spec.standardization_adjusted:
        draws = draws / np.asarray(scale, dtype=float)
    return NoiseSample(draws=draws)


# ---------------------------------------------------------------------------
# adjusted kernel estimators
# ---------------------------------------------------------------------------

CASES = ("train_train", "diagonal", "test_train")


def adjusted_cov(x, x2, case, kernel, sample):
    """Scalar noise-adjusted covariance for one of the three estimator cases."""
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {CASES}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = None if x2 is None else np.atleast_1d(np.asarray(x2, dtype=float))
    if sample.is_zero:
        if case == "diagonal":
            return float(kernels.diag_values(x[None, :], kernel)[0])
        return kernels.cov(x, x2, kernel)
    shifted = x[None, :] + sample.draws
    if case == "diagonal":
        return float(np.mean(kernels.diag_values(shifted, kernel)))
    if case == "test_train":
        return float(np.mean(kernels.cross_values(shifted, x2[None, :], kernel)))
    return _pair_mean(shifted, x2[None, :] + sample.draws, kernel)


def _pair_mean(a, b, kernel, chunk=CHUNK_ROWS):
    """Mean of c(a_i, b_j) over all pairs, chunked to bound memory."""
    total = 0.0
    for ia in range(0, a.shape[0], chunk):
        block_a = a[ia : ia + chunk]
        for ib in range(0, b.shape[0], chunk):
            total += float(kernels.cross_values(block_a, b[ib : ib + chunk], kernel).sum())
    return total / (a.shape[0] * b.shape[0])


def _expanded(x, draws):
    # row order (k, i) -> x_i + u_k, so blocks reshape as (m, n, ...)
    m, d = draws.shape
    return (x[None, :, :] + draws[:, None, :]).reshape(m * x.shape[0], d)


def adjusted_diag(x, kernel, sample):
    """Same-input estimator (1/m) sum_i c(x + u_i, x + u_i) for each row of x."""
    x = np.asarray(x, dtype=float)
    if sample.is_zero:
        return kernels.diag_values(x, kernel)
    values = kernels.diag_values(_expanded(x, sample.draws), kernel)
    return values.reshape(sample.size, x.shape[0]).mean(axis=0)


def adjusted_gram(x, kernel, sample, xstar=None):
    """Noise-adjusted Gram of ``x`` (GramMatrix), or train-by-test cross matrix.

    The symmetric matrix uses the pairwise double-sum estimator off the
    diagonal and the cheaper single-sum, same-input estimator on it; the
    cross matrix treats columns (test inputs) as noise-free.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if xstar is not None:
        xstar = np.asarray(xstar, dtype=float)
        if sample.is_zero:
            return kernels.cross_values(x, xstar, kernel)
        expanded = _expanded(x, sample.draws)
        values = kernels.cross_values(expanded, xstar, kernel)
        return values.reshape(sample.size, n, xstar.shape[0]).mean(axis=0)

    if sample.is_zero:
        return kernels.gram(x, kernel)

    m = sample.size
    chunk = max(1, CHUNK_ROWS // max(n, 1))  # draws per chunk
    total = np.zeros((n, n))
    starts = range(0, m, chunk)
    for ia in starts:
        ea = _expanded(x, sample.draws[ia : ia + chunk])
        ma = ea.shape[0] // n
        for ib in starts:
            if ib < ia:
                continue
            eb = ea if ib == ia else _expanded(x, sample.draws[ib : ib + chunk])
            mb = eb.shape[0] // n
            block = kernels.cross_values(ea, eb, kernel)
            part = block.reshape(ma, n, mb, n).sum(axis=(0, 2))
            total += part
            if ib > ia:
                total += part.T
    values = total / (m * m)
    iu = np.triu_indices(n, 1)
    values[(iu[1], iu[0])] = values[iu]
    np.fill_diagonal(values, adjusted_diag(x, kernel, sample))
    return GramMatrix(values=values, jitter_applied=min_jitter(values))


# ---------------------------------------------------------------------------
# coefficient-of-variation rule for the sample budget
# ---------------------------------------------------------------------------

def check_cv(spec, kernel, probe_pairs, replicates=10):
    """Max coefficient of variation of the pairwise estimator over probe pairs.

    Draws ``replicates`` independent sample sets of size ``spec.mc_samples``
    and measures the spread of the resulting estimates; callers compare the
    result against the 2.5% threshold and raise the budget if needed.
    """
    if len(probe_pairs) < 1:
        raise ValueError("need at least one probe pair")
    if replicates < 2:
        raise ValueError("need at least two replicates to estimate a CV")
    samples = [draw_noise(spec, kernel.input_dim, _stream=r + 1) for r in range(replicates)]
    if all(sample.is_zero for sample in samples):
        return 0.0  # every replicate collapses to the same exact value
    estimates = np.empty((replicates, len(probe_pairs)))
    for r, sample in enumerate(samples):
        for p, (x, x2) in enumerate(probe_pairs):
            estimates[r, p] = adjusted_cov(x, x2, "train_train", kernel, sample)
    means = estimates.mean(axis=0)
    stds = estimates.std(axis=0, ddof=1)
    cvs = np.where(stds == 0.0, 0.0, stds / np.maximum(np.abs(means), 1e-300))
    return float(cvs.max())


def tune_mc_samples(
    spec,
    kernel,
    probe_pairs,
    threshold=CV_THRESHOLD,
    max_samples=MC_SAMPLES_MAX,
    replicates=10,
):
    """Double ``mc_samples`` until the max CV drops under ``threshold``.

    Returns ``(spec, cv)`` with the possibly-raised sample budget. The
    escalation stops at ``max_samples`` as a cost guard; a warning is
    emitted if the guard binds before the threshold is met.
    """
    current = spec
    while True:
        cv = check_cv(current, kernel, probe_pairs, replicates=replicates)
        if cv <= threshold or current.mc_samples >= max_samples:
            break
        current = replace(
            current, mc_samples=min(2 * current.mc_samples, max_samples)
        )
    if cv > threshold:
        warnings.warn(
            f"MC sample budget capped at {current.mc_samples} with CV {cv:.3%} "
            f"still above {threshold:.1%}",
            stacklevel=2,
        )
    return current, cv
