"""Robust dense linear-algebra entry points.

Matrices are plain float64 numpy arrays (row-major).  These wrappers add the
validation and retry behavior the rest of the package relies on; they accept
``Var`` nodes as well, in which case the result stays on the tape.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, NotPositiveDefinite, SingularTriangular
from . import ops
from .rng import RngStream
from .tape import Var

MAX_JITTER_RETRIES = 8


def _check_square_symmetric(a: np.ndarray, tol: float = 1e-10) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=tol, rtol=0.0):
        raise DimensionMismatch("matrix is not symmetric within 1e-10")


def cholesky_psd(a, jitter: float = 0.0):
    """Lower Cholesky factor of ``a + jitter*I`` with jitter escalation.

    If the factorization fails, the jitter is raised to 1e-6 * trace/n (when
    starting from zero) and multiplied by 10 on each retry, up to
    ``MAX_JITTER_RETRIES`` attempts, after which NotPositiveDefinite is
    raised.  Differentiable when ``a`` is a tape node.
    """
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    av = ops.value_of(a)
    _check_square_symmetric(av)
    n = av.shape[0]
    eye = np.eye(n)

    current = float(jitter)
    for attempt in range(MAX_JITTER_RETRIES + 1):
        try:
            np.linalg.cholesky(av + current * eye)
        except np.linalg.LinAlgError:
            if current == 0.0:
                current = 1e-6 * max(np.trace(av) / n, 1e-300)
            else:
                current *= 10.0
            continue
        if isinstance(a, Var):
            shifted = ops.add(a, a.tape.constant(current * eye)) if current else a
            return ops.cholesky(shifted)
        return np.linalg.cholesky(av + current * eye)
    raise NotPositiveDefinite(
        f"cholesky failed after {MAX_JITTER_RETRIES} jitter escalations "
        f"(final jitter {current:.3e})"
    )


def solve_lower(l, b):
    """Solve L x = b for lower-triangular L."""
    lv = ops.value_of(l)
    bv = ops.value_of(b)
    if lv.ndim != 2 or lv.shape[0] != lv.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {lv.shape}")
    if bv.shape[0] != lv.shape[0]:
        raise DimensionMismatch(f"shape mismatch: {lv.shape} vs {bv.shape}")
    if np.any(np.diagonal(lv) == 0.0):
        raise SingularTriangular("zero diagonal entry in triangular solve")
    return ops.solve_triangular(l, b, lower=True, trans=False)


def sample_mvn(mean, chol_cov, rng: RngStream):
    """Draw mean + L u with u standard normal; differentiable in mean and L."""
    mv = ops.value_of(mean)
    cv = ops.value_of(chol_cov)
    if cv.ndim != 2 or cv.shape[0] != cv.shape[1] or cv.shape[0] != mv.shape[-1]:
        raise DimensionMismatch(f"shape mismatch: mean {mv.shape}, chol {cv.shape}")
    u = rng.normal(mv.shape[-1])
    return ops.add(mean, ops.matmul(chol_cov, u))
