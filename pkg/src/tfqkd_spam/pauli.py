"""Real Pauli-coefficient algebra for preparations and measurements.

Everything lives in the fixed (I, X, Y, Z) basis. A preparation is a length-4
vector, a set of four preparations is a 4x4 matrix whose *columns* are those
vectors, and a joint measurement is a 4x4 coefficient matrix ``x`` so that the
expectation value for the pair (a, b) is ``sum_kl x[k, l] a[k] b[l]``.

The inverse routines accept stacks of matrices with shape ``(..., 4, 4)`` so the
Monte-Carlo code can push thousands of perturbed preparation sets through one
call.
"""

from typing import NamedTuple

import numpy as np

from .errors import SingularMatrix

PAULI_LABELS = ("I", "X", "Y", "Z")
DIM = 4
DEFAULT_COND_LIMIT = 1e8


class Inversion(NamedTuple):
    inverse: np.ndarray
    condition: float | np.ndarray


def pair_expectation(a, b, x):
    """Expectation value for one (Alice, Bob) preparation pair.

    Args:
        a: Alice's preparation vector, length 4.
        b: Bob's preparation vector, length 4.
        x: 4x4 measurement coefficient matrix.

    Returns:
        ``sum_{k,l} x[k, l] * a[k] * b[l]`` as a float.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    total = 0.0
    for k in range(DIM):
        for l in range(DIM):
            total += x[k, l] * a[k] * b[l]
    return float(total)


def predict_expectations(A, x, B):
    """Matrix of expectation values ``A^T x B``, built entry by entry.

    Entry (i, j) is exactly ``pair_expectation(A[:, i], B[:, j], x)``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    S = np.empty((A.shape[1], B.shape[1]))
    for i in range(A.shape[1]):
        for j in range(B.shape[1]):
            S[i, j] = pair_expectation(A[:, i], B[:, j], x)
    return S


def _gauss_jordan(m):
    # Partial-pivot Gauss-Jordan on a (batch, n, n) stack. Zero pivots are
    # reported through the ``singular`` mask instead of raising.
    batch, n, _ = m.shape
    aug = np.concatenate([m, np.broadcast_to(np.eye(n), m.shape)], axis=2).copy()
    rows = np.arange(batch)
    singular = np.zeros(batch, dtype=bool)
    for col in range(n):
        piv = col + np.argmax(np.abs(aug[:, col:, col]), axis=1)
        top = aug[rows, col].copy()
        aug[rows, col] = aug[rows, piv]
        aug[rows, piv] = top
        p = aug[rows, col, col]
        zero = p == 0.0
        singular |= zero
        p = np.where(zero, 1.0, p)
        aug[:, col] /= p[:, None]
        factor = aug[:, :, col].copy()
        factor[:, col] = 0.0
        aug -= factor[:, :, None] * aug[:, col][:, None, :]
    return aug[:, :, n:], singular


def _inf_norm(m):
    return np.abs(m).sum(axis=-1).max(axis=-1)


def invert_transpose(A, cond_limit=DEFAULT_COND_LIMIT):
    """Return ``(A^T)^-1`` and the infinity-norm condition number of ``A^T``.

    ``A`` may be a single 4x4 matrix or a stack ``(..., 4, 4)``; the result has
    the same shape and ``condition`` is a float or an array accordingly.

    Raises:
        SingularMatrix: if any condition number exceeds ``cond_limit``, i.e.
            the four preparations are not linearly independent.
    """
    A = np.asarray(A, dtype=float)
    if A.shape[-2:] != (DIM, DIM):
        raise ValueError(f"expected (..., 4, 4) preparation matrix, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("preparation matrix has non-finite entries")
    lead = A.shape[:-2]
    At = np.swapaxes(A, -1, -2).reshape(-1, DIM, DIM)
    # near-singular inputs may overflow; they are caught by the condition check
    with np.errstate(over="ignore", invalid="ignore"):
        inv, singular = _gauss_jordan(At)
        cond = _inf_norm(At) * _inf_norm(inv)
    cond = np.where(singular | ~np.isfinite(cond), np.inf, cond)
    worst = float(cond.max())
    if worst > cond_limit:
        raise SingularMatrix(
            f"preparation matrix condition number {worst:.3g} exceeds {cond_limit:.3g}",
            condition=worst,
        )
    inv = inv.reshape(lead + (DIM, DIM))
    if not lead:
        return Inversion(inv, float(cond[0]))
    return Inversion(inv, cond.reshape(lead))


def deviation_matrix(A1, S1, A2, S2, cond_limit=DEFAULT_COND_LIMIT):
    """Discrepancy ``(A1^T)^-1 S1 - (A2^T)^-1 S2``.

    Zero (up to noise) means one measurement matrix explains both preparation
    sets. Broadcasts over leading stack dimensions.
    """
    inv1 = invert_transpose(A1, cond_limit).inverse
    inv2 = invert_transpose(A2, cond_limit).inverse
    return inv1 @ np.asarray(S1, dtype=float) - inv2 @ np.asarray(S2, dtype=float)
