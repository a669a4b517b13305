"""Rank-one consistency constraints for a collection of homographies.

Given ``H_0, ..., H_{I-1}`` with ``H_0`` as reference, each block
``J_i = H_i - omega(H_i, H_0) H_0`` must be of the form ``b v_i^T`` for the
collection to come from one camera pair.  Stacking the blocks into a
``3 x 3(I-1)`` matrix, consistency is equivalent to every 2x2 minor
vanishing.  The minors are made positively scale invariant by dividing by
the norms of the two homographies owning the minor's columns; ``psi`` is the
sum of their squares.

All indices are zero based: rows ``a < b`` in ``{0, 1, 2}``, columns
``c < d`` in ``{0, ..., 3I - 4}``, and column ``c`` belongs to plane
``1 + c // 3``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .errors import DegenerateRoot, NonInvertibleResult
from .linalg import frob, is_invertible, minor2
from .pencil import DEG_TOL, omega, omega_batch, omega_nearest


class PhiValue(NamedTuple):
    value: float
    degenerate: bool


@dataclass
class ConsistencyReport:
    j_matrix: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    psi: float
    omegas: list
    degenerate_flags: list = field(default_factory=list)

    @property
    def phi_values(self):
        return [(*map(int, idx), float(v)) for idx, v in zip(self.indices, self.values)]

    @property
    def max_abs_phi(self):
        return float(np.max(np.abs(self.values)))

    def top(self, k=5):
        """The ``k`` entries of largest magnitude as ``(a, b, c, d, value)``."""
        order = np.argsort(-np.abs(self.values), kind="stable")[:k]
        return [(*map(int, self.indices[n]), float(self.values[n])) for n in order]


def _as_stack(hs):
    hs = np.asarray(hs, dtype=float)
    if hs.ndim != 3 or hs.shape[1:] != (3, 3):
        raise ValueError(f"expected an (I, 3, 3) stack, got shape {hs.shape}")
    if hs.shape[0] < 2:
        raise ValueError("need at least two homographies")
    return hs


def _check_invertible(hs):
    for i, h in enumerate(hs):
        if not is_invertible(h):
            raise NonInvertibleResult(f"homography {i} is not invertible")


def rank_one_omega(h_i, h_0, start):
    """Scalar ``w`` minimising the squared 2x2 minors of ``h_i - w h_0``.

    Each minor is quadratic in ``w``, so the objective is a quartic; its
    global minimiser is returned, ties broken towards ``start``.  For a
    consistent pair this is the double root even where the pencil is at a
    triple root and the closed form breaks down.
    """
    ni, n0 = frob(h_i), frob(h_0)
    a, b = np.asarray(h_i) / ni, np.asarray(h_0) / n0
    idx = np.array([(r, s, c, d) for r, s in combinations(range(3), 2)
                    for c, d in combinations(range(3), 2)])
    # minors at w = -1, 0, 1 determine their quadratic coefficients
    m = np.array([_minors(a - t * b, idx) for t in (-1.0, 0.0, 1.0)])
    q0, q1, q2 = m[1], 0.5 * (m[2] - m[0]), 0.5 * (m[2] + m[0]) - m[1]
    quartic = np.polynomial.Polynomial([0.0])
    for k in range(len(idx)):
        quartic = quartic + np.polynomial.Polynomial([q0[k], q1[k], q2[k]]) ** 2
    cand = [r.real for r in quartic.deriv().roots() if abs(r.imag) <= 1e-9 * (1 + abs(r))]
    s0 = start * n0 / ni
    best = min(cand, key=lambda r: (quartic(r), abs(r - s0)), default=s0)
    return float(best * ni / n0)


def build_j(hs):
    """Stack ``J_i = H_i - omega_i H_0`` for ``i >= 1``.

    Returns ``(J, omegas, degenerate_flags)``.  A block whose pencil is
    within tolerance of a triple root is flagged and uses
    :func:`rank_one_omega`.
    """
    hs = _as_stack(hs)
    _check_invertible(hs)
    blocks, omegas, flags = [], [], []
    for h in hs[1:]:
        try:
            w, bad = omega(h, hs[0]), False
        except DegenerateRoot:
            w, bad = rank_one_omega(h, hs[0], omega_nearest(h, hs[0])), True
        blocks.append(h - w * hs[0])
        omegas.append(w)
        flags.append(bad)
    return np.hstack(blocks), omegas, flags


@lru_cache(maxsize=None)
def _index_array(i_count):
    cols = 3 * (i_count - 1)
    out = [
        (a, b, c, d)
        for a, b in combinations(range(3), 2)
        for c, d in combinations(range(cols), 2)
    ]
    arr = np.array(out, dtype=np.intp).reshape(-1, 4)
    arr.setflags(write=False)
    return arr


def constraint_indices(i_count):
    """All ``(a, b, c, d)`` minor indices in lexicographic order."""
    if i_count < 2:
        raise ValueError("need at least two homographies")
    return [tuple(map(int, row)) for row in _index_array(i_count)]


def column_owner(c, i_count=None):
    """Plane index owning column ``c`` of J."""
    if c < 0 or (i_count is not None and c >= 3 * (i_count - 1)):
        raise IndexError(f"column {c} out of range")
    return 1 + c // 3


def phi(hs, a, b, c, d):
    """Scale-normalised minor of J on rows (a, b) and columns (c, d)."""
    hs = _as_stack(hs)
    j, _, flags = build_j(hs)
    ic, id_ = column_owner(c, len(hs)), column_owner(d, len(hs))
    value = minor2(j, a, b, c, d) / (frob(hs[ic]) * frob(hs[id_]))
    return PhiValue(float(value), flags[ic - 1] or flags[id_ - 1])


def _minors(j, idx):
    a, b, c, d = idx.T
    return j[a, c] * j[b, d] - j[a, d] * j[b, c]


def psi(hs):
    """Incompatibility measure with the full list of normalised minors."""
    hs = _as_stack(hs)
    j, omegas, flags = build_j(hs)
    idx = _index_array(len(hs))
    norms = np.sqrt(np.sum(hs**2, axis=(1, 2)))
    owners = 1 + idx[:, 2:] // 3
    values = _minors(j, idx) / (norms[owners[:, 0]] * norms[owners[:, 1]])
    return ConsistencyReport(
        j_matrix=j,
        indices=idx,
        values=values,
        psi=float(np.sum(values**2)),
        omegas=omegas,
        degenerate_flags=flags,
    )


def phi_jacobian(hs, omega_fallback=None, need_jac=True, omega_free=None):
    """All normalised minors and their derivatives w.r.t. the stacked entries.

    Parameters
    ----------
    hs : (I, 3, 3) array
    omega_fallback : sequence of float, optional
        Values used for blocks whose pencil is degenerate; their gradient is
        taken as zero.  Without it such blocks use ``omega = 0``.
    need_jac : bool
        When false only the values are computed and ``jac`` is ``None``.
    omega_free : sequence, optional
        One entry per block: ``None`` for the closed-form ``omega``, or a
        value to use as an independent variable.  ``jac`` then gains one
        column per such block, in block order, after the matrix entries.

    Returns
    -------
    values : (K,) array
    jac : (K, 9 I + F) array
        Derivatives with respect to ``hs.reshape(-1)`` (row-major entries)
        and the ``F`` free omegas.
    omegas : list of float
    flags : list of bool
    """
    hs = _as_stack(hs)
    n_h = len(hs)
    n_blk = n_h - 1
    h0 = hs[0]
    w, dwi, dw0, bad = omega_batch(hs[1:], h0, DEG_TOL, grad=need_jac)
    if omega_fallback is not None and np.any(bad):
        w = np.where(bad, np.asarray(omega_fallback, dtype=float), w)
    free = [k for k, v in enumerate(omega_free or ()) if v is not None]
    if free:
        w, bad = w.copy(), bad.copy()
        w[free] = [omega_free[k] for k in free]
        bad[free] = False
        if need_jac:
            dwi, dw0 = dwi.copy(), dw0.copy()
            dwi[free] = 0.0
            dw0[free] = 0.0
    # J as (3, n_blk, 3) -> (3, 3 n_blk)
    j = (hs[1:] - w[:, None, None] * h0).transpose(1, 0, 2).reshape(3, 3 * n_blk)

    idx = _index_array(n_h)
    a, b, c, d = idx.T
    minors = j[a, c] * j[b, d] - j[a, d] * j[b, c]
    norms = np.sqrt(np.sum(hs**2, axis=(1, 2)))
    ic, id_ = 1 + c // 3, 1 + d // 3
    scale = 1.0 / (norms[ic] * norms[id_])
    values = minors * scale
    if not need_jac:
        return values, None, list(w), list(bad)

    # dj[p, q, k, :] = d J[p, q] / d H_k (row-major entries)
    eye9 = np.eye(9).reshape(3, 3, 9)
    dj = np.zeros((3, n_blk, 3, n_h, 9))
    for k in range(n_blk):
        outer_i = h0[:, :, None] * dwi[k].reshape(1, 1, 9)
        outer_0 = h0[:, :, None] * dw0[k].reshape(1, 1, 9)
        dj[:, k, :, k + 1] = eye9 - outer_i
        dj[:, k, :, 0] = -w[k] * eye9 - outer_0
    dj = dj.reshape(3, 3 * n_blk, 9 * n_h)
    dminors = (
        dj[a, c] * j[b, d][:, None]
        + j[a, c][:, None] * dj[b, d]
        - dj[a, d] * j[b, c][:, None]
        - j[a, d][:, None] * dj[b, c]
    )
    # d log||H_k|| / dH, laid out over the stacked entries
    dlog = np.zeros((n_h, n_h, 9))
    dlog[np.arange(n_h), np.arange(n_h)] = hs.reshape(n_h, 9) / norms[:, None] ** 2
    dlog = dlog.reshape(n_h, 9 * n_h)
    jac = dminors * scale[:, None] - values[:, None] * (dlog[ic] + dlog[id_])
    if free:
        # d J_k / d omega_k = -H_0
        djw = np.zeros((3, n_blk, 3, len(free)))
        for col, k in enumerate(free):
            djw[:, k, :, col] = -h0
        djw = djw.reshape(3, 3 * n_blk, len(free))
        dw_minors = (
            djw[a, c] * j[b, d][:, None]
            + j[a, c][:, None] * djw[b, d]
            - djw[a, d] * j[b, c][:, None]
            - j[a, d][:, None] * djw[b, c]
        )
        jac = np.hstack([jac, dw_minors * scale[:, None]])
    return values, jac, list(w), list(bad)
