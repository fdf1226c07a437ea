"""Dense real-matrix helpers shared across the package."""

import numpy as np

DEFAULT_TOL = 1e-9


class DimensionError(ValueError):
    """Raised when array shapes do not agree."""


class NoRightInverseError(ValueError):
    """Raised when a matrix is not of full row rank."""


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float array (vectors become columns)."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(-1, 1)
    elif M.ndim != 2:
        raise DimensionError(f"{name} must be at most 2-D, got {M.ndim}-D")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def inf_norm(M):
    """Induced infinity norm: the largest absolute row sum.

    For a row or column vector this is the largest absolute entry.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        raise DimensionError("infinity norm of an empty matrix is undefined")
    if M.ndim <= 1 or min(M.shape) == 1:
        return float(np.max(np.abs(M)))
    return float(np.max(np.sum(np.abs(M), axis=1)))


def vec(M):
    """Stack the columns of ``M`` into one column vector (column-major order)."""
    M = np.asarray(M, dtype=float)
    if M.ndim < 2:
        return M.reshape(-1, 1)
    return M.reshape(-1, 1, order="F")


def unvec(v, shape):
    """Inverse of :func:`vec`."""
    return np.asarray(v, dtype=float).reshape(shape, order="F")


def numerical_rank(M, tol=DEFAULT_TOL):
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def row_rank_full(M, tol=DEFAULT_TOL):
    """True iff the numerical rank of ``M`` (singular values above ``tol``
    relative to the largest one) equals its row count."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return numerical_rank(M, tol) == M.shape[0]


def right_inverse(M, tol=DEFAULT_TOL):
    """Minimum-norm right inverse ``R`` with ``M @ R = I``.

    Computed from a QR factorization of ``M.T``: with ``M.T = Q R`` the
    minimum-norm right inverse is ``Q @ inv(R.T)``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not row_rank_full(M, tol):
        raise NoRightInverseError(f"matrix of shape {M.shape} does not have full row rank")
    Q, R = np.linalg.qr(M.T)
    return Q @ np.linalg.solve(R.T, np.eye(M.shape[0]))


def null_space(M, tol=DEFAULT_TOL):
    """Orthonormal basis (as columns) of the null space of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[1]
    if M.shape[0] == 0 or not np.any(M):
        return np.eye(n)
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * s[0]))
    return vt[rank:].T.copy()
