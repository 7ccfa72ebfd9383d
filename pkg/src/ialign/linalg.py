"""Dense complex linear algebra with explicit accuracy contracts.

Every routine in this module states what it guarantees and raises on
inputs that violate its preconditions.  The tolerances live in a single
:class:`Tolerances` record so tests and callers agree on one set of
constants.  Matrices here are small (beamforming dimensions, tens at
most), so clarity wins over blocking or workspace tricks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class Tolerances:
    """Numerical contract constants shared across the package.

    Attributes
    ----------
    hermitian_rtol : symmetry slack, relative to ``1 + max |A_ij|``.
    eig_residual_rtol : eigenpair residual bound, relative to
        ``max(1, ||A||_2)``.
    orthonormal_atol : max-entry bound on ``G^H G - I`` for outputs of
        :func:`orthonormalize`.
    rank_rcond : singular values below ``rank_rcond * s_max`` count as zero.
    solve_residual_rtol : residual bound for :func:`solve_pd`, relative to
        ``||y||_2``.
    logdet_rtol : relative accuracy of :func:`logdet_pd` for condition
        numbers up to 1e8.
    """

    hermitian_rtol: float = 1e-12
    eig_residual_rtol: float = 1e-9
    orthonormal_atol: float = 1e-12
    rank_rcond: float = 1e-12
    solve_residual_rtol: float = 1e-10
    logdet_rtol: float = 1e-9


TOL = Tolerances()


class EigenPair(NamedTuple):
    """Eigenvalues (real, ascending) paired with unit-norm column vectors."""

    values: np.ndarray
    vectors: np.ndarray


def hermitian_part(a, tol=TOL.hermitian_rtol):
    """Validate that ``a`` is Hermitian within ``tol`` and symmetrize it.

    Returns ``(a + a^H) / 2`` so downstream code can rely on exact
    symmetry.  Raises ``ValueError`` when the deviation exceeds
    ``tol * (1 + max |a_ij|)`` or when ``a`` is not square.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.size == 0:
        raise ValueError("empty matrix")
    scale = 1.0 + np.abs(a).max()
    deviation = np.abs(a - a.conj().T).max()
    if deviation > tol * scale:
        raise ValueError(
            f"matrix is not Hermitian: deviation {deviation:.3e} "
            f"exceeds {tol * scale:.3e}"
        )
    return 0.5 * (a + a.conj().T)


def fix_column_phases(vectors):
    """Rotate each column so its largest-magnitude entry is real positive.

    Resolves the arbitrary unit phase of eigenvectors and singular
    vectors; ties on magnitude break toward the lowest row index.  Zero
    columns pass through unchanged.
    """
    v = np.array(vectors, dtype=np.complex128)
    for i in range(v.shape[1]):
        j = int(np.argmax(np.abs(v[:, i])))
        pivot = v[j, i]
        mag = abs(pivot)
        if mag > 0.0:
            v[:, i] *= pivot.conj() / mag
    return v


def eigh_smallest(a, d, tol=TOL):
    """Eigenpairs for the ``d`` smallest eigenvalues of Hermitian ``a``.

    Parameters
    ----------
    a : array_like
        Hermitian matrix (validated within ``tol.hermitian_rtol``).
    d : int
        Number of eigenpairs, ``1 <= d <= a.shape[0]``.

    Returns
    -------
    EigenPair
        ``values`` ascending; ``vectors[:, i]`` unit norm with the
        residual ``||a v - lam v||_2 <= tol.eig_residual_rtol *
        max(1, ||a||_2)`` and the phase convention of
        :func:`fix_column_phases`.
    """
    a = hermitian_part(a, tol.hermitian_rtol)
    n = a.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"d={d} out of range for a {n}x{n} matrix")
    values, vectors = np.linalg.eigh(a)
    return EigenPair(values[:d].copy(), fix_column_phases(vectors[:, :d]))


def orthonormalize(g, tol=TOL):
    """Orthonormal basis for the column span of ``g``.

    Output ``q`` spans the same subspace, satisfies
    ``max |q^H q - I| <= tol.orthonormal_atol`` and is idempotent:
    feeding ``q`` back returns ``q`` up to the same tolerance.  Raises
    ``ValueError`` naming the number of deficient columns when the
    numerical rank (singular values above ``tol.rank_rcond * s_max``)
    falls short of the column count.
    """
    g = np.asarray(g, dtype=np.complex128)
    if g.ndim != 2 or g.shape[0] < g.shape[1] or g.shape[1] == 0:
        raise ValueError(f"expected a tall matrix, got shape {g.shape}")
    s = np.linalg.svd(g, compute_uv=False)
    rank = int(np.sum(s > tol.rank_rcond * s[0])) if s[0] > 0.0 else 0
    deficient = g.shape[1] - rank
    if deficient > 0:
        raise ValueError(
            f"rank-deficient input: {deficient} of {g.shape[1]} columns "
            "add no independent direction"
        )
    q, r = np.linalg.qr(g)
    # Pin the QR phase freedom (diag(r) real positive) so the map is
    # idempotent rather than merely subspace-preserving.
    diag = np.diag(r)
    q = q * (diag.conj() / np.abs(diag))
    return q


def solve_pd(b, y, tol=TOL):
    """Solve ``b x = y`` for Hermitian positive definite ``b``.

    Uses a Cholesky factorization; raises ``ValueError`` when ``b`` is
    not positive definite (or not Hermitian within tolerance).  The
    residual satisfies ``||b x - y||_2 <= tol.solve_residual_rtol *
    ||y||_2`` for condition numbers up to about 1e8.
    """
    b = hermitian_part(b, tol.hermitian_rtol)
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (b.shape[0],):
        raise ValueError(f"rhs shape {y.shape} does not match {b.shape}")
    try:
        factor = scipy.linalg.cho_factor(b, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("matrix is not positive definite") from exc
    return scipy.linalg.cho_solve(factor, y, check_finite=False)


def logdet_pd(a, tol=TOL):
    """Base-2 log determinant of a Hermitian positive definite matrix.

    Computed from the Cholesky factor, accurate to
    ``tol.logdet_rtol`` relative error for condition numbers up to 1e8.
    Raises ``ValueError`` on inputs that are not positive definite.
    """
    a = hermitian_part(a, tol.hermitian_rtol)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix is not positive definite") from exc
    return 2.0 * float(np.sum(np.log2(np.real(np.diag(chol)))))


def inv_sqrt_pd(a, tol=TOL):
    """Hermitian principal inverse square root of a positive definite matrix.

    Returns the unique Hermitian ``w`` with ``w a w = I``.  Raises
    ``ValueError`` when any eigenvalue is not strictly positive.
    """
    a = hermitian_part(a, tol.hermitian_rtol)
    values, vectors = np.linalg.eigh(a)
    if values[0] <= 0.0:
        raise ValueError("matrix is not positive definite")
    return (vectors * (1.0 / np.sqrt(values))) @ vectors.conj().T
