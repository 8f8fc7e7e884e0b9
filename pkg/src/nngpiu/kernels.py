"""Noise-free covariance functions.

Two kinds of kernels live here:

* composite kernels built by recursing an analytic layer map (arc-cosine
  for ReLU-type layers, arc-sine for error-function layers) on top of a
  linear base covariance — the infinite-width deep-network kernels;
* shallow baselines (RBF and Matern-1/2).

Scalar entry points (``base_cov``, ``arccos_layer``, ``arcsin_layer``,
``composite_cov``, ``shallow_cov``) evaluate one pair; ``gram`` assembles
full matrices through the same layer maps vectorized over entries.
Diagonal entries of composite Grams take a cheaper single-argument
recursion that never touches the angle computation.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

from ._linalg import min_jitter
from .errors import NumericError

COMPOSITE_FAMILIES = ("arccosine", "arcsine")
SHALLOW_FAMILIES = ("rbf", "matern12")
FAMILIES = ("base",) + COMPOSITE_FAMILIES + SHALLOW_FAMILIES

# rounding can push normalized ratios marginally past +-1; clip before
# arccos/arcsin so no finite input produces NaN
_RATIO_LIMIT = 1.0


@dataclass(frozen=True)
class KernelSpec:
    """Declarative description of a covariance function.

    Parameters
    ----------
    family : str
        One of ``"base"``, ``"arccosine"``, ``"arcsine"`` (composite) or
        ``"rbf"``, ``"matern12"`` (shallow).
    input_dim : int
        Number of input coordinates d.
    depth : int
        Layers applied above the base covariance; 0 means base only.
        Ignored by shallow families.
    sigma_b_sq : float
        Bias variance of the base/layer maps (>= 0).
    sigma_w_sq : float
        Weight variance of the base/layer maps (> 0).
    length_scale : float
        Length scale of the shallow families (> 0).
    signal_var : float
        Signal variance of the shallow families (> 0).
    """

    family: str
    input_dim: int
    depth: int = 0
    sigma_b_sq: float = 1.0
    sigma_w_sq: float = 1.0
    length_scale: float = 1.0
    signal_var: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if int(self.input_dim) != self.input_dim or self.input_dim < 1:
            raise ValueError("input_dim must be a positive integer")
        if int(self.depth) != self.depth or self.depth < 0:
            raise ValueError("depth must be a nonnegative integer")
        if self.sigma_b_sq < 0:
            raise ValueError("sigma_b_sq must be nonnegative")
        if self.sigma_w_sq <= 0:
            raise ValueError("sigma_w_sq must be positive")
        if self.length_scale <= 0:
            raise ValueError("length_scale must be positive")
        if self.signal_var <= 0:
            raise ValueError("signal_var must be positive")

    @property
    def is_composite(self):
        return self.family in COMPOSITE_FAMILIES

    @property
    def is_shallow(self):
        return self.family in SHALLOW_FAMILIES

    def with_params(self, **params):
        """Copy of the spec with hyperparameters replaced."""
        return replace(self, **params)


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric kernel matrix plus the diagonal jitter that makes it factorizable.

    ``values`` holds raw kernel evaluations (no jitter folded in);
    ``jitter_applied`` is the smallest delta from the escalation ladder
    such that Cholesky of ``values + delta*I`` succeeds.
    """

    values: np.ndarray
    jitter_applied: float

    @property
    def shape(self):
        return self.values.shape

    def regularized(self):
        """values + jitter_applied * I."""
        if self.jitter_applied == 0.0:
            return self.values
        return self.values + self.jitter_applied * np.eye(self.values.shape[0])


def _check_vector(x, spec, name="x"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != spec.input_dim:
        raise ValueError(
            f"{name} must be a length-{spec.input_dim} vector, got shape {np.shape(x)}"
        )
    return x


def _check_matrix(x, spec, name="X"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(
            f"{name} must have {spec.input_dim} columns, got shape {np.shape(x)}"
        )
    return x


# ---------------------------------------------------------------------------
# layer maps (elementwise; work on scalars and arrays alike)
# ---------------------------------------------------------------------------

def _arccos_map(c_aa, c_bb, c_ab, sigma_b_sq, sigma_w_sq):
    # sqrt/cos/sin passes over the full matrix are the hot path of deep Gram
    # assembly; take square roots of the (broadcast) diagonals instead of the
    # outer product and use cos(theta) = ratio, sin(theta) = sqrt(1 - ratio^2)
    norm = np.sqrt(c_aa) * np.sqrt(c_bb)
    ratio = np.clip(c_ab / norm, -_RATIO_LIMIT, _RATIO_LIMIT)
    theta = np.arccos(ratio)
    return sigma_b_sq + sigma_w_sq / (2.0 * np.pi) * norm * (
        np.sqrt(1.0 - ratio * ratio) + (np.pi - theta) * ratio
    )


def _arccos_diag_map(c_aa, sigma_b_sq, sigma_w_sq):
    # same-input shortcut: theta = 0, so the map collapses to sb + sw*c/2
    return sigma_b_sq + 0.5 * sigma_w_sq * c_aa


def _arcsin_map(c_aa, c_bb, c_ab, sigma_b_sq, sigma_w_sq):
    denom = np.sqrt(1.0 + 2.0 * c_aa) * np.sqrt(1.0 + 2.0 * c_bb)
    ratio = np.clip(2.0 * c_ab / denom, -_RATIO_LIMIT, _RATIO_LIMIT)
    return sigma_b_sq + 2.0 * sigma_w_sq / np.pi * np.arcsin(ratio)


def _arcsin_diag_map(c_aa, sigma_b_sq, sigma_w_sq):
    ratio = 2.0 * c_aa / (1.0 + 2.0 * c_aa)
    return sigma_b_sq + 2.0 * sigma_w_sq / np.pi * np.arcsin(np.clip(ratio, -1.0, 1.0))


_LAYER_MAPS = {"arccosine": _arccos_map, "arcsine": _arcsin_map}
_DIAG_MAPS = {"arccosine": _arccos_diag_map, "arcsine": _arcsin_diag_map}


# ---------------------------------------------------------------------------
# scalar operations
# ---------------------------------------------------------------------------

def base_cov(x, x2, spec):
    """Base covariance sigma_b^2 + (sigma_w^2 / d) x . x2."""
    x = _check_vector(x, spec, "x")
    x2 = _check_vector(x2, spec, "x2")
    return spec.sigma_b_sq + spec.sigma_w_sq / spec.input_dim * float(np.dot(x, x2))


def arccos_layer(c_xx, c_x2x2, c_xx2, spec):
    """One ReLU layer map applied to the previous-layer covariances."""
    if c_xx <= 0 or c_x2x2 <= 0:
        raise NumericError(
            f"arccos layer requires positive diagonal covariances, got {c_xx}, {c_x2x2}"
        )
    return float(_arccos_map(c_xx, c_x2x2, c_xx2, spec.sigma_b_sq, spec.sigma_w_sq))


def arcsin_layer(c_xx, c_x2x2, c_xx2, spec):
    """One error-function layer map applied to the previous-layer covariances."""
    if 1.0 + 2.0 * c_xx <= 0 or 1.0 + 2.0 * c_x2x2 <= 0:
        raise NumericError(
            f"arcsin layer requires positive denominator factors, got 1+2*{c_xx}, 1+2*{c_x2x2}"
        )
    return float(_arcsin_map(c_xx, c_x2x2, c_xx2, spec.sigma_b_sq, spec.sigma_w_sq))


def composite_cov(x, x2, spec):
    """Depth-L composite covariance c^L(x, x2).

    Threads the three base covariances (x,x), (x2,x2), (x,x2) through the
    family's layer map ``spec.depth`` times.
    """
    if not spec.is_composite:
        raise ValueError(f"composite_cov requires a composite family, got {spec.family!r}")
    if spec.depth < 1:
        raise ValueError("composite_cov requires depth >= 1")
    c_aa = base_cov(x, x, spec)
    c_bb = base_cov(x2, x2, spec)
    c_ab = base_cov(x, x2, spec)
    layer = arccos_layer if spec.family == "arccosine" else arcsin_layer
    diag_map = _DIAG_MAPS[spec.family]
    for _ in range(spec.depth):
        c_ab = layer(c_aa, c_bb, c_ab, spec)
        c_aa = float(diag_map(c_aa, spec.sigma_b_sq, spec.sigma_w_sq))
        c_bb = float(diag_map(c_bb, spec.sigma_b_sq, spec.sigma_w_sq))
    return c_ab


def shallow_cov(x, x2, spec):
    """RBF or Matern-1/2 covariance of a single pair."""
    if not spec.is_shallow:
        raise ValueError(f"shallow_cov requires a shallow family, got {spec.family!r}")
    x = _check_vector(x, spec, "x")
    x2 = _check_vector(x2, spec, "x2")
    r = float(np.linalg.norm(x - x2))
    if spec.family == "rbf":
        return spec.signal_var * float(np.exp(-(r * r) / (2.0 * spec.length_scale**2)))
    return spec.signal_var * float(np.exp(-r / spec.length_scale))


def cov(x, x2, spec):
    """Family dispatch for a single pair (depth-0 composites fall back to base)."""
    if spec.is_shallow:
        return shallow_cov(x, x2, spec)
    if spec.family == "base" or spec.depth == 0:
        return base_cov(x, x2, spec)
    return composite_cov(x, x2, spec)


# ---------------------------------------------------------------------------
# vectorized internals shared with the input-noise module
# ---------------------------------------------------------------------------

def _composite_recursion(c_aa, c_bb, c_ab, spec):
    """Run the layer recursion on arrays; c_aa/c_bb broadcast against c_ab."""
    layer = _LAYER_MAPS[spec.family]
    diag_map = _DIAG_MAPS[spec.family]
    if spec.family == "arccosine" and (np.any(c_aa <= 0) or np.any(c_bb <= 0)):
        raise NumericError("arccos recursion hit a nonpositive diagonal covariance")
    for _ in range(spec.depth):
        c_ab = layer(c_aa, c_bb, c_ab, spec.sigma_b_sq, spec.sigma_w_sq)
        c_aa = diag_map(c_aa, spec.sigma_b_sq, spec.sigma_w_sq)
        c_bb = diag_map(c_bb, spec.sigma_b_sq, spec.sigma_w_sq)
    return c_ab


def cross_values(a, b, spec):
    """Kernel matrix k(a_i, b_j) as a plain (n, m) array, any family."""
    a = _check_matrix(a, spec, "X")
    b = _check_matrix(b, spec, "X2")
    if spec.is_shallow:
        d = cdist(a, b)
        if spec.family == "rbf":
            return spec.signal_var * np.exp(-(d * d) / (2.0 * spec.length_scale**2))
        return spec.signal_var * np.exp(-d / spec.length_scale)
    c_ab = spec.sigma_b_sq + spec.sigma_w_sq / spec.input_dim * (a @ b.T)
    if spec.family == "base" or spec.depth == 0:
        return c_ab
    c_aa = spec.sigma_b_sq + spec.sigma_w_sq / spec.input_dim * np.einsum("ij,ij->i", a, a)
    c_bb = spec.sigma_b_sq + spec.sigma_w_sq / spec.input_dim * np.einsum("ij,ij->i", b, b)
    return _composite_recursion(c_aa[:, None], c_bb[None, :], c_ab, spec)


def diag_values(x, spec):
    """Single-argument diagonal k(x_i, x_i), using the shortcut recursion."""
    x = _check_matrix(x, spec, "X")
    if spec.is_shallow:
        return np.full(x.shape[0], spec.signal_var)
    c = spec.sigma_b_sq + spec.sigma_w_sq / spec.input_dim * np.einsum("ij,ij->i", x, x)
    if spec.family == "base" or spec.depth == 0:
        return c
    diag_map = _DIAG_MAPS[spec.family]
    if spec.family == "arccosine" and np.any(c <= 0):
        raise NumericError("arccos recursion hit a nonpositive diagonal covariance")
    for _ in range(spec.depth):
        c = diag_map(c, spec.sigma_b_sq, spec.sigma_w_sq)
    return c


def symmetric_values(x, spec):
    """Symmetric kernel matrix as a plain array.

    Only the upper triangle is computed independently; the lower triangle
    mirrors it exactly and the diagonal comes from the shortcut recursion.
    """
    k = cross_values(x, x, spec)
    iu = np.triu_indices_from(k, 1)
    k[(iu[1], iu[0])] = k[iu]
    np.fill_diagonal(k, diag_values(x, spec))
    return k


def gram(x, spec, x2=None):
    """Gram matrix of ``x`` (GramMatrix) or cross matrix against ``x2`` (ndarray).

    The symmetric case records the diagonal jitter needed for a Cholesky
    factorization; cross matrices are returned as plain arrays.
    """
    if x2 is not None:
        return cross_values(x, x2, spec)
    values = symmetric_values(x, spec)
    return GramMatrix(values=values, jitter_applied=min_jitter(values))
