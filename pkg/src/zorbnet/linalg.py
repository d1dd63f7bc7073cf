"""Dense linear algebra used by the layer solves.

Matrices are plain ``numpy.ndarray`` objects of dtype float64, stored in
numpy's default row-major (C) order.  Data matrices follow the
column-per-sample convention: ``X`` has shape ``(d, n)``.
"""

from typing import NamedTuple

import numpy as np

from .errors import ContractViolation, NumericalError

#: numpy's historical ``pinv`` default; used for every feed-forward solve.
DEFAULT_RCOND = 1e-15


class SvdResult(NamedTuple):
    U: np.ndarray  # (m, k), orthonormal columns
    S: np.ndarray  # (k,), nonincreasing, >= 0
    V: np.ndarray  # (n, k), orthonormal columns


def as_matrix(A, name="matrix"):
    """Coerce ``A`` to a finite 2-D float64 array or raise."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ContractViolation(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise ContractViolation(f"{name} must be non-empty, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractViolation(f"{name} contains NaN or Inf")
    return A


def svd(A):
    """Thin singular value decomposition ``A = U @ diag(S) @ V.T``.

    Backed by LAPACK (``gesdd`` via numpy), which is deterministic for a
    fixed input on a fixed build.  Non-convergence is reported as
    :class:`NumericalError`.
    """
    A = as_matrix(A)
    try:
        U, S, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for {A.shape} matrix") from exc
    return SvdResult(U, S, Vt.T)


def pinv(A, rcond=DEFAULT_RCOND):
    """Truncated Moore-Penrose pseudoinverse.

    Singular values strictly below ``rcond * max(S)`` are treated as zero.
    """
    if rcond < 0:
        raise ContractViolation(f"rcond must be >= 0, got {rcond}")
    U, S, V = svd(A)
    if S.size == 0 or S[0] == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    keep = S >= rcond * S[0]
    inv = np.zeros_like(S)
    inv[keep] = 1.0 / S[keep]
    return (V * inv) @ U.T


def lstsq_solve(X, Y, rcond=DEFAULT_RCOND):
    """Minimum-norm least-squares ``W`` for ``W @ X ~= Y``, i.e. ``Y @ pinv(X)``.

    ``X`` is ``(d, n)`` and ``Y`` is ``(k, n)``; the result is ``(k, d)``.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ContractViolation(
            f"sample counts differ: X has {X.shape[1]} columns, Y has {Y.shape[1]}"
        )
    return Y @ pinv(X, rcond)


def matmul(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ContractViolation(f"cannot multiply {A.shape} by {B.shape}")
    return A @ B


def add(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ContractViolation(f"cannot add {A.shape} and {B.shape}")
    return A + B


def transpose(A):
    return np.asarray(A, dtype=np.float64).T.copy()


def hstack_ones(X):
    """Append a row of ones to a ``(d, n)`` matrix, giving ``(d + 1, n)``.

    This is how biases are folded into a single least-squares solve.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ContractViolation(f"expected a 2-D matrix, got shape {X.shape}")
    return np.vstack([X, np.ones((1, X.shape[1]))])
