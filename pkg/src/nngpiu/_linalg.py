"""Cholesky helpers with escalating diagonal jitter.

Covariance matrices assembled from kernel evaluations are PSD in exact
arithmetic but may have slightly negative eigenvalues in floating point.
The policy everywhere in this package: try a plain Cholesky first, then
add delta*I with delta escalating 1e-10 -> 1e-6 by factors of 10, and
report the delta that was actually needed.
"""

import numpy as np
import scipy.linalg

from .errors import NumericError

JITTER_START = 1e-10
JITTER_MAX = 1e-6


def chol_with_jitter(a, jitter_start=JITTER_START, jitter_max=JITTER_MAX):
    """Lower Cholesky factor of ``a`` (+ jitter*I if needed).

    Returns ``(L, jitter)`` where ``jitter`` is 0.0 when the plain
    factorization succeeded. Raises NumericError if ``jitter_max`` is
    not enough.
    """
    a = np.asarray(a, dtype=float)
    try:
        return scipy.linalg.cholesky(a, lower=True), 0.0
    except scipy.linalg.LinAlgError:
        pass
    jitter = jitter_start
    eye = np.eye(a.shape[0])
    while jitter <= jitter_max * (1 + 1e-12):
        try:
            return scipy.linalg.cholesky(a + jitter * eye, lower=True), jitter
        except scipy.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericError(
        f"Cholesky failed even with jitter {jitter_max:g}; "
        "matrix is too far from positive semidefinite"
    )


def chol_solve(chol_lower, b):
    """Solve A x = b given the lower Cholesky factor of A."""
    return scipy.linalg.cho_solve((chol_lower, True), b)


def min_jitter(a, jitter_start=JITTER_START, jitter_max=JITTER_MAX):
    """Smallest jitter from the escalation ladder that makes ``a`` factorizable."""
    _, jitter = chol_with_jitter(a, jitter_start, jitter_max)
    return jitter
