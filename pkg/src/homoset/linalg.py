"""Small dense linear algebra on 3x3 and 3xM matrices.

Everything here works on plain ``numpy`` arrays.  Indices are zero based.
"""

import numpy as np

INV_RTOL = 1e-12


def det3(m):
    """Determinant of a 3x3 matrix by cofactor expansion along the first row.

    Extended-precision input (``np.longdouble``) is kept; anything else is
    converted to ``float``.
    """
    m = np.asarray(m)
    if m.dtype != np.longdouble:
        m = m.astype(float)
    return (
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def cofactor3(m):
    """Cofactor matrix of a 3x3 matrix, i.e. the gradient of ``det3`` at ``m``."""
    m = np.asarray(m, dtype=float)
    c0, c1, c2 = m[:, 0], m[:, 1], m[:, 2]
    # column k of the cofactor matrix is the cross product of the other two columns
    return np.stack([np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)], axis=1)


def frob(m):
    """Frobenius norm."""
    return float(np.sqrt(np.sum(np.square(m))))


def is_invertible(m):
    """Scale-relative invertibility test ``|det m| > 1e-12 * frob(m)**3``."""
    scale = frob(m)
    return scale > 0.0 and abs(det3(m)) > INV_RTOL * scale**3


def minor2(m, a, b, c, d):
    """Determinant of the 2x2 submatrix of ``m`` on rows (a, b) and columns (c, d).

    Requires ``a < b`` within the row range and ``c, d`` distinct column
    indices; swapping ``c`` and ``d`` negates the value.
    """
    m = np.asarray(m, dtype=float)
    rows, cols = m.shape
    if not (0 <= a < b < rows):
        raise IndexError(f"row indices ({a}, {b}) invalid for {rows} rows")
    if not (0 <= c < cols and 0 <= d < cols) or c == d:
        raise IndexError(f"column indices ({c}, {d}) invalid for {cols} columns")
    return m[a, c] * m[b, d] - m[a, d] * m[b, c]


def rank_one_approx(m):
    """Best Frobenius-norm rank-one factorization ``m ~ outer(b, w)``.

    The leading left singular vector comes from the eigendecomposition of
    the 3x3 Gram matrix ``m @ m.T``; ``b`` is that unit vector and
    ``w = m.T @ b``.

    Returns
    -------
    b : (3,) ndarray
        Unit left factor.
    w : (M,) ndarray
        Right factor carrying the singular value.
    residual : float
        ``frob(m - outer(b, w))``.
    """
    m = np.asarray(m, dtype=float)
    if not np.any(m):
        raise ValueError("rank-one approximation of a zero matrix")
    gram = m @ m.T
    _, vecs = np.linalg.eigh(gram)
    b = vecs[:, -1]
    w = m.T @ b
    residual = frob(m - np.outer(b, w))
    return b, w, residual


def smallest_singular_vector(m, with_spectrum=False):
    """Unit vector ``x`` minimising ``||m @ x||`` for an ``N x 9`` design matrix.

    With ``with_spectrum=True`` the singular values (descending) are returned
    as well so callers can check the null-space dimension.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < 8:
        raise ValueError(f"need at least 8 rows, got shape {m.shape}")
    # full V so that an 8-row matrix still yields its null vector
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    x = vt[-1] / np.linalg.norm(vt[-1])
    if with_spectrum:
        return x, s
    return x


def vec(m):
    """Column-wise vectorisation."""
    return np.asarray(m, dtype=float).T.ravel()


def unvec(v, rows=3):
    """Inverse of :func:`vec` for a matrix with ``rows`` rows."""
    v = np.asarray(v, dtype=float)
    return v.reshape(-1, rows).T.copy()


def unit_normalize(m):
    """Scale to unit Frobenius norm."""
    m = np.asarray(m, dtype=float)
    return m / frob(m)


def canonical_sign(m):
    """Unit-normalise and flip sign so the largest-magnitude entry is positive."""
    m = unit_normalize(m)
    flat = m.ravel()
    if flat[np.argmax(np.abs(flat))] < 0:
        m = -m
    return m
