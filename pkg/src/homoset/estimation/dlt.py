"""Hartley normalisation and the normalised direct linear transform."""

import numpy as np

from ..errors import RankDeficient
from ..linalg import canonical_sign, smallest_singular_vector


def hartley_normalize(points):
    """Similarity taking ``points`` to zero centroid and mean radius sqrt(2).

    Returns ``(T, normalized)`` with ``T`` a 3x3 matrix acting on
    homogeneous coordinates.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    centroid = pts.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(pts - centroid, axis=1))
    if mean_dist <= 1e-300:
        raise ValueError("all points coincide")
    s = np.sqrt(2.0) / mean_dist
    t = np.array([[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]])
    return t, s * (pts - centroid)


def transform_points(t, points):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    y = np.column_stack([pts, np.ones(len(pts))]) @ np.asarray(t).T
    return y[:, :2] / y[:, 2:]


def design_matrix(x1, x2):
    """``2N x 9`` DLT matrix for ``x2 ~ H x1`` (rows act on row-major ``vec``)."""
    x, y = x1[:, 0], x1[:, 1]
    u, v = x2[:, 0], x2[:, 1]
    zero, one = np.zeros_like(x), np.ones_like(x)
    rows1 = np.column_stack([x, y, one, zero, zero, zero, -u * x, -u * y, -u])
    rows2 = np.column_stack([zero, zero, zero, x, y, one, -v * x, -v * y, -v])
    return np.vstack([rows1, rows2])


def dlt(x1, x2, rank_tol=1e-10):
    """Homography ``x2 ~ H x1`` from at least four pairs, unit Frobenius norm."""
    x1 = np.asarray(x1, dtype=float).reshape(-1, 2)
    x2 = np.asarray(x2, dtype=float).reshape(-1, 2)
    if len(x1) < 4 or len(x1) != len(x2):
        raise ValueError("need at least four matched pairs")
    t1, n1 = hartley_normalize(x1)
    t2, n2 = hartley_normalize(x2)
    h, s = smallest_singular_vector(design_matrix(n1, n2), with_spectrum=True)
    spectrum = np.zeros(9)
    spectrum[: len(s)] = s
    if spectrum[7] <= rank_tol * spectrum[0]:
        raise RankDeficient("DLT design matrix has a multi-dimensional null space")
    hn = h.reshape(3, 3)
    return canonical_sign(np.linalg.solve(t2, hn @ t1))
