"""Dense complex and block-structured linear algebra helpers.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128`` (or
``float64`` where the value is real), stored in numpy's default row-major
order. A "block matrix" is an ordinary 2-D array together with a block size;
block ``(i, j)`` of a matrix with ``b x b`` blocks occupies rows
``i*b:(i+1)*b`` and columns ``j*b:(j+1)*b``. Indices are zero-based.

Hermitian inputs are symmetrized as ``(M + M^H) / 2`` before any
factorization.
"""

import numpy as np
import scipy.linalg as sla

__all__ = [
    "MatrixError",
    "NotPositiveDefiniteError",
    "kron",
    "hadamard",
    "block_trace",
    "block_at",
    "block_diagonal_part",
    "hermitize",
    "herm_sqrt_inv",
    "solve_hpd",
    "hpd_inverse",
    "chol_factor",
    "dominant_svd",
    "psd_check",
    "rel_err",
]

# smallest eigenvalue must exceed this fraction of the largest to count as PD
PD_RTOL = 1e-12


class MatrixError(ValueError):
    """Shape or structure problem with a matrix argument."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A matrix that must be Hermitian positive definite is not."""

    def __init__(self, msg, eigenvalue=None):
        super().__init__(msg)
        self.eigenvalue = eigenvalue


def _as2d(a):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise MatrixError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    return a


def kron(a, b):
    """Kronecker product; block (i, j) of the result is ``a[i, j] * b``."""
    return np.kron(_as2d(a), _as2d(b))


def hadamard(a, b):
    """Entrywise (Hadamard-Schur) product of two equally shaped matrices."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise MatrixError(f"hadamard: shape mismatch {a.shape} vs {b.shape}")
    return a * b


def _block_grid(p, m):
    p = _as2d(p)
    rows, cols = p.shape
    if m < 1 or rows % m or cols % m:
        raise MatrixError(f"block size {m} does not divide matrix of shape {p.shape}")
    return p, rows // m, cols // m


def block_trace(p, m):
    """Sum of the ``m x m`` diagonal blocks of a square block matrix."""
    p, nr, nc = _block_grid(p, m)
    if nr != nc:
        raise MatrixError(f"block_trace needs a square block grid, got {nr}x{nc}")
    return p.reshape(nr, m, nr, m).diagonal(axis1=0, axis2=2).sum(axis=-1)


def block_at(p, i, j, m, n=None):
    """Copy of block ``(i, j)`` of ``p`` with ``m x n`` blocks (``n`` defaults to ``m``)."""
    n = m if n is None else n
    p = _as2d(p)
    if m < 1 or n < 1 or p.shape[0] % m or p.shape[1] % n:
        raise MatrixError(f"block size ({m}, {n}) does not divide shape {p.shape}")
    nr, nc = p.shape[0] // m, p.shape[1] // n
    if not (0 <= i < nr and 0 <= j < nc):
        raise IndexError(f"block ({i}, {j}) outside a {nr}x{nc} block grid")
    return p[i * m:(i + 1) * m, j * n:(j + 1) * n].copy()


def block_diagonal_part(p, m):
    """Zero every off-diagonal ``m x m`` block of ``p``."""
    p, nr, nc = _block_grid(p, m)
    out = np.zeros_like(p)
    for i in range(min(nr, nc)):
        out[i * m:(i + 1) * m, i * m:(i + 1) * m] = p[i * m:(i + 1) * m, i * m:(i + 1) * m]
    return out


def hermitize(a):
    a = _as2d(a)
    return (a + a.conj().T) / 2


def _hpd_eigh(a, what):
    a = hermitize(a)
    if a.shape[0] != a.shape[1]:
        raise MatrixError(f"{what}: matrix must be square, got {a.shape}")
    w, v = np.linalg.eigh(a)
    top = max(abs(w[-1]), abs(w[0]))
    if not w[0] > PD_RTOL * top:
        raise NotPositiveDefiniteError(
            f"{what}: matrix is not positive definite "
            f"(smallest eigenvalue {w[0]:.3e}, largest {w[-1]:.3e})",
            eigenvalue=float(w[0]),
        )
    return w, v


def herm_sqrt_inv(a):
    """Hermitian inverse square root ``S`` with ``S a S = I``."""
    w, v = _hpd_eigh(a, "herm_sqrt_inv")
    s = (v / np.sqrt(w)) @ v.conj().T
    return hermitize(s)


def chol_factor(a):
    """Lower Cholesky factor ``F`` with ``a = F F^H``."""
    a = hermitize(a)
    try:
        return sla.cholesky(a, lower=True)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(a)
        raise NotPositiveDefiniteError(
            f"chol_factor: matrix is not positive definite (smallest eigenvalue {w[0]:.3e})",
            eigenvalue=float(w[0]),
        ) from None


def solve_hpd(a, b):
    """Solve ``a X = b`` for Hermitian positive definite ``a``."""
    a = hermitize(a)
    b = np.asarray(b)
    try:
        cf = sla.cho_factor(a, lower=True)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(a)
        raise NotPositiveDefiniteError(
            f"solve_hpd: matrix is not positive definite (smallest eigenvalue {w[0]:.3e})",
            eigenvalue=float(w[0]),
        ) from None
    return sla.cho_solve(cf, b)


def hpd_inverse(a):
    a = _as2d(a)
    return hermitize(solve_hpd(a, np.eye(a.shape[0], dtype=a.dtype)))


def dominant_svd(a, k):
    """Leading ``k`` singular triplets of ``a``.

    Returns ``(U, s, V)`` with ``U`` of shape (rows, k), ``s`` nonincreasing of
    length k and ``V`` of shape (cols, k), so that ``U @ diag(s) @ V^H`` is the
    best rank-k approximation of ``a``.
    """
    a = _as2d(a)
    if not 1 <= k <= min(a.shape):
        raise MatrixError(f"dominant_svd: k={k} outside 1..{min(a.shape)}")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return u[:, :k], s[:k], vh[:k].conj().T


def psd_check(a, tol):
    """True iff the Hermitian matrix ``a`` is positive semi-definite within ``tol``.

    The test is ``lambda_min >= -tol * max(1, lambda_max)``. Raises
    ``MatrixError`` when ``a`` is not Hermitian to ``max(tol, 1e-12)`` relative.
    """
    a = _as2d(a)
    if a.shape[0] != a.shape[1]:
        raise MatrixError(f"psd_check: matrix must be square, got {a.shape}")
    scale = np.max(np.abs(a))
    if np.max(np.abs(a - a.conj().T)) > max(tol, 1e-12) * max(scale, np.finfo(float).tiny):
        raise MatrixError("psd_check: matrix is not Hermitian within tolerance")
    w = np.linalg.eigvalsh(hermitize(a))
    return bool(w[0] >= -tol * max(1.0, w[-1]))


def rel_err(x, ref):
    """Max elementwise deviation of ``x`` from ``ref`` relative to ``max|ref|``."""
    x, ref = np.asarray(x), np.asarray(ref)
    scale = np.max(np.abs(ref))
    return float(np.max(np.abs(x - ref)) / scale) if scale > 0 else float(np.max(np.abs(x)))
