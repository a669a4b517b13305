"""Characteristic polynomial of a 3x3 pencil and its non-degenerate double root.

For a pair ``(A, B)`` the characteristic polynomial is

    p(lam) = det(A - lam * B) = c0 - c1 lam + c2 lam**2 - c3 lam**3

where each ``c_n`` is a sum of determinants of matrices built by taking
``n`` columns from ``B`` and the rest from ``A``.  When ``p`` has a double
root that is not a triple root, that root has the closed form returned by
:func:`omega`.
"""

from typing import NamedTuple

import numpy as np

from .errors import DegenerateRoot, NonInvertibleResult
from .linalg import det3, frob, is_invertible

DEG_TOL = 1e-9


class PencilCoefficients(NamedTuple):
    c0: float
    c1: float
    c2: float
    c3: float

    def __call__(self, lam):
        return self.c0 - self.c1 * lam + self.c2 * lam**2 - self.c3 * lam**3

    def derivative(self, lam):
        return -self.c1 + 2.0 * self.c2 * lam - 3.0 * self.c3 * lam**2

    def cubic(self):
        """Coefficients ``(a, b, c, d)`` of ``a lam^3 + b lam^2 + c lam + d``."""
        return -self.c3, self.c2, -self.c1, self.c0


class DoubleRootResult(NamedTuple):
    mu: float
    mu_squared_check: float
    degeneracy_margin: float


def _mixed(a, b, cols_from_b):
    m = a.copy()
    m[:, cols_from_b] = b[:, cols_from_b]
    return det3(m)


def char_poly_coeffs(a, b, dtype=float):
    """Coefficients ``c0..c3`` of ``det(a - lam * b)`` from column-replacement determinants.

    ``dtype=np.longdouble`` evaluates them in extended precision where the
    platform provides it.
    """
    a = np.asarray(a, dtype=dtype)
    b = np.asarray(b, dtype=dtype)
    c0 = det3(a)
    c1 = _mixed(a, b, [0]) + _mixed(a, b, [1]) + _mixed(a, b, [2])
    c2 = _mixed(a, b, [1, 2]) + _mixed(a, b, [0, 2]) + _mixed(a, b, [0, 1])
    c3 = det3(b)
    return PencilCoefficients(c0, c1, c2, c3)


def double_root_cubic(a, b, c, d, tol=DEG_TOL):
    """Non-degenerate double root of ``a x^3 + b x^2 + c x + d``.

    Raises :class:`DegenerateRoot` when ``b^2 - 3ac`` vanishes relative to
    ``max(b^2, |3ac|)``, which is the triple-root case.
    """
    if a == 0:
        raise ValueError("leading coefficient must be non-zero")
    disc = b * b - 3.0 * a * c
    scale = max(b * b, abs(3.0 * a * c))
    margin = abs(disc) / scale if scale > 0 else 0.0
    if margin <= tol:
        raise DegenerateRoot(f"b^2 - 3ac vanishes (relative margin {margin:.3g})")
    mu = (9.0 * a * d - b * c) / (2.0 * disc)
    mu_sq = (c * c - 3.0 * b * d) / disc
    return DoubleRootResult(mu, mu_sq, margin)


def _omega_unit(hi, h1, tol):
    # b^2 - 3ac cancels as the pencil nears a triple root, so the
    # coefficients and the root are formed in extended precision
    co = char_poly_coeffs(hi, h1, dtype=np.longdouble)
    return double_root_cubic(*co.cubic(), tol=tol).mu


def omega(h_i, h_1, tol=DEG_TOL):
    """Double generalised eigenvalue of the pencil ``(h_i, h_1)``.

    Both inputs are scaled to unit Frobenius norm before the coefficients are
    formed and the result is scaled back, so
    ``omega(s * h_i, t * h_1) == (s / t) * omega(h_i, h_1)``.
    """
    h_i = np.asarray(h_i, dtype=float)
    h_1 = np.asarray(h_1, dtype=float)
    for name, h in (("h_i", h_i), ("h_1", h_1)):
        if not is_invertible(h):
            raise NonInvertibleResult(f"{name} is not invertible")
    ni, n1 = frob(h_i), frob(h_1)
    ext = np.longdouble
    hi_unit = np.asarray(h_i, dtype=ext) / ext(ni)
    h1_unit = np.asarray(h_1, dtype=ext) / ext(n1)
    return float(ext(ni) / ext(n1) * ext(_omega_unit(hi_unit, h1_unit, tol)))


def omega_nearest(h_i, h_1):
    """Best available double-root estimate where :func:`omega` is degenerate.

    Near a triple root the closed form loses accuracy like ``eps / margin``
    while the double root approaches the mean root ``c2 / (3 c3)`` like
    ``sqrt(margin)``; the closed form is kept until the two errors meet.
    Scales like :func:`omega`.
    """
    h_i = np.asarray(h_i, dtype=float)
    h_1 = np.asarray(h_1, dtype=float)
    ext = np.longdouble
    ni, n1 = frob(h_i), frob(h_1)
    co = char_poly_coeffs(np.asarray(h_i, dtype=ext) / ext(ni),
                          np.asarray(h_1, dtype=ext) / ext(n1), dtype=ext)
    if co.c3 == 0:
        raise NonInvertibleResult("h_1 is not invertible")
    try:
        mu = double_root_cubic(*co.cubic(), tol=float(np.finfo(ext).eps) ** (2 / 3)).mu
    except DegenerateRoot:
        mu = co.c2 / (3 * co.c3)
    return float(ext(ni) / ext(n1) * ext(mu))


def degeneracy_margins(hs, h_1):
    """Relative size of ``b^2 - 3ac`` for each pencil ``(hs[k], h_1)``.

    The closed form for ``omega`` is well conditioned only while this is far
    from zero; it vanishes at a triple root.
    """
    ext = np.longdouble
    a = np.asarray(hs, dtype=ext)
    b = np.asarray(h_1, dtype=ext)
    cof_b = _cof_stack(b)
    c1 = np.sum(b * _cof_stack(a), axis=(-2, -1))
    c2 = np.sum(a * cof_b, axis=(-2, -1))
    c3 = np.sum(b[:, 0] * cof_b[:, 0])
    scale = np.maximum(c2 * c2, np.abs(3 * c1 * c3))
    return np.asarray(np.abs(c2 * c2 - 3 * c1 * c3) / np.where(scale > 0, scale, 1), dtype=float)


def omega_grad(h_i, h_1, tol=DEG_TOL):
    """``omega`` with its gradients: returns ``(w, dw/dh_i, dw/dh_1)``.

    No normalisation is applied; callers pass matrices of moderate scale.
    """
    w, dwi, dw1, bad = omega_batch(np.asarray(h_i)[None], h_1, tol, grad=True)
    if bad[0]:
        raise DegenerateRoot("omega denominator vanishes")
    return w[0], dwi[0], dw1[0]


def _cross(u, v):
    return np.stack(
        [
            u[..., 1] * v[..., 2] - u[..., 2] * v[..., 1],
            u[..., 2] * v[..., 0] - u[..., 0] * v[..., 2],
            u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0],
        ],
        axis=-1,
    )


def _cof_stack(m):
    # columns as rows: cols[..., k, :] is column k
    cols = np.swapaxes(m, -1, -2)
    out = np.stack(
        [_cross(cols[..., 1, :], cols[..., 2, :]),
         _cross(cols[..., 2, :], cols[..., 0, :]),
         _cross(cols[..., 0, :], cols[..., 1, :])],
        axis=-2,
    )
    return np.swapaxes(out, -1, -2)


def omega_batch(hs, h_1, tol=DEG_TOL, grad=False):
    """Vectorised ``omega`` of each ``hs[k]`` against ``h_1`` (no normalisation).

    Uses ``c1 = sum(B * cof(A))`` and ``c2 = sum(A * cof(B))``, the Laplace
    expansions of the column-replacement sums.  Returns
    ``(w, dw/dhs, dw/dh_1, degenerate)``; gradients are ``None`` unless
    ``grad`` is set, and degenerate entries carry ``w = 0`` and zero gradient.
    """
    # values in extended precision (see _omega_unit), gradients in double
    ext = np.longdouble
    ae = np.asarray(hs, dtype=ext)
    be = np.asarray(h_1, dtype=ext)
    cof_ae = _cof_stack(ae)
    cof_be = _cof_stack(be)
    c0 = np.sum(ae[..., 0] * cof_ae[..., 0], axis=-1)
    c3 = np.sum(be[:, 0] * cof_be[:, 0])
    c1 = np.sum(be * cof_ae, axis=(-2, -1))
    c2 = np.sum(ae * cof_be, axis=(-2, -1))
    num = c1 * c2 - 9 * c0 * c3
    disc = c2 * c2 - 3 * c1 * c3
    scale = np.maximum(c2 * c2, np.abs(3 * c1 * c3))
    bad = ~(np.abs(disc) > tol * scale)
    w = np.where(bad, 0, num / np.where(bad, 1, 2 * disc)).astype(float)
    if not grad:
        return w, None, None, bad
    c0, c1, c2, c3 = (np.asarray(c, dtype=float) for c in (c0, c1, c2, c3))
    c3 = float(c3)
    den = np.where(bad, 1.0, 2.0 * disc.astype(float))
    a = np.asarray(hs, dtype=float)
    b = np.asarray(h_1, dtype=float)
    cof_a = _cof_stack(a)
    cof_b = _cof_stack(b)
    # cof(a - lam b) = q0 + q1 lam + q2 lam^2
    acols = np.swapaxes(a, -1, -2)
    bcols = b.T
    q1 = np.empty_like(a)
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        q1[..., :, k] = -(_cross(acols[..., i, :], bcols[j]) + _cross(bcols[i], acols[..., j, :]))
    q0, q2 = cof_a, np.broadcast_to(cof_b, a.shape)
    # dc/da = (q0, -q1, q2, 0), dc/db = (0, q0, -q1, q2)
    dnum = np.stack([-9.0 * c3 * np.ones_like(c0), c2, c1, -9.0 * c0], axis=-1)
    dden = 2.0 * np.stack([np.zeros_like(c0), -3.0 * c3 * np.ones_like(c0), 2.0 * c2, -3.0 * c1], axis=-1)
    dw_dc = (dnum - w[:, None] * dden) / den[:, None]
    dw_dc[bad] = 0.0
    dwa = (dw_dc[:, 0, None, None] * q0 - dw_dc[:, 1, None, None] * q1
           + dw_dc[:, 2, None, None] * q2)
    dwb = (dw_dc[:, 1, None, None] * q0 - dw_dc[:, 2, None, None] * q1
           + dw_dc[:, 3, None, None] * q2)
    return w, dwa, dwb, bad


def verify_double_eigenvalue(a, b, v1, v2, mu, tol=1e-9):
    """Check that ``mu`` is a double root of ``p_{a,b}`` given two eigenvectors.

    The pair is rescaled to unit Frobenius norms (``mu`` rescaled along) and
    both ``p(mu)`` and ``p'(mu)`` must be within ``tol``.  Returns ``False``
    if the eigenvector relations themselves fail.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    na, nb = frob(a), frob(b)
    if na == 0 or nb == 0:
        return False
    a, b, mu = a / na, b / nb, mu * nb / na
    if np.linalg.norm(np.cross(v1, v2)) <= 1e-12 * np.linalg.norm(v1) * np.linalg.norm(v2):
        return False
    for v in (v1, v2):
        v = v / np.linalg.norm(v)
        if np.linalg.norm(a @ v - mu * (b @ v)) > 1e-8 * (1.0 + abs(mu)):
            return False
    co = char_poly_coeffs(a, b)
    return abs(co(mu)) <= tol and abs(co.derivative(mu)) <= tol
