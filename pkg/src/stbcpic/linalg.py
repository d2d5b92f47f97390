"""Dense complex-matrix kernel shared by the coding, detection and
certification modules.

Everything operates on 2-D ``numpy.ndarray`` with dtype ``complex128``
(referred to as ``CMat`` throughout the package).  The routines here are
thin, contract-checked wrappers around LAPACK via numpy: what they add is
a single, consistent tolerance convention for rank decisions, which every
projector and certification step in the package depends on.

Tolerances are relative: a singular value counts as nonzero when it
exceeds ``tol`` times the largest singular value.  The package-wide
default is ``DEFAULT_TOL = 1e-10``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DEFAULT_TOL",
    "as_cmat",
    "matmul",
    "pinv",
    "null_projector",
    "rank",
]

DEFAULT_TOL = 1e-10

CMat = np.ndarray


def as_cmat(a) -> CMat:
    """Coerce ``a`` to a finite 2-D complex128 matrix.

    Raises ``ValueError`` for non-2-D input or non-finite entries.
    """
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def matmul(a, b) -> CMat:
    """Complex matrix product with an explicit dimension check."""
    a = as_cmat(a)
    b = as_cmat(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch: ({a.shape[0]}x{a.shape[1]}) @ ({b.shape[0]}x{b.shape[1]})"
        )
    return a @ b


def pinv(a, tol: float = DEFAULT_TOL) -> CMat:
    """Moore-Penrose pseudo-inverse with relative singular-value cutoff.

    Singular values below ``tol * smax`` are treated as zero, so
    rank-deficient input is handled without error.
    """
    a = as_cmat(a)
    if a.size == 0:
        raise ValueError("pinv of an empty matrix")
    return np.linalg.pinv(a, rcond=tol)


def null_projector(a, tol: float = DEFAULT_TOL) -> CMat:
    """Orthogonal projector onto the complement of the column space of ``a``.

    Returns ``Q = I - U_r U_r^H`` where ``U_r`` is an orthonormal basis of
    the numerical column space of ``a`` (singular values above
    ``tol * smax``).  This equals ``I - A pinv(A)`` for any maximal
    linearly independent column subset ``A`` of ``a``; the SVD basis is
    used because it is the numerically stable way to get that projector.

    ``Q`` is Hermitian, idempotent and annihilates every column of ``a``.
    A zero (or empty-column) ``a`` yields the identity.
    """
    a = as_cmat(a)
    n = a.shape[0]
    if a.shape[1] == 0 or not a.any():
        return np.eye(n, dtype=np.complex128)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    keep = s > tol * s[0]
    ur = u[:, keep]
    q = np.eye(n, dtype=np.complex128) - ur @ ur.conj().T
    # enforce exact Hermitian symmetry against fp round-off
    return (q + q.conj().T) / 2.0


def rank(a, tol: float = DEFAULT_TOL) -> int:
    """Numerical rank: number of singular values above ``tol * smax``."""
    a = as_cmat(a)
    if a.size == 0 or not a.any():
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.count_nonzero(s > tol * s[0]))
