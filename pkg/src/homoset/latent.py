"""Latent-variable parametrisation ``H_i = w_i A + b v_i^T`` and its gauge.

The parameter vector is laid out as
``[vec(A), b, v_0, ..., v_{I-1}, w_0, ..., w_{I-1}]`` (``vec`` is
column-wise), giving ``4 I + 12`` entries.  Five of those directions are
gauge: ``(alpha, beta, c)`` act as

    A' = beta A + b c^T,  b' = alpha b,
    v_i' = v_i / alpha - w_i c / (alpha beta),  w_i' = w_i / beta

without changing any ``H_i``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .consistency import build_j
from .errors import DegenerateRoot, NonInvertibleResult, RankOneFailure
from .linalg import frob, is_invertible, rank_one_approx, unvec, vec


@dataclass
class LatentParameters:
    a: np.ndarray
    b: np.ndarray
    v: np.ndarray  # (I, 3)
    w: np.ndarray  # (I,)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).reshape(3, 3)
        self.b = np.asarray(self.b, dtype=float).reshape(3)
        self.v = np.asarray(self.v, dtype=float).reshape(-1, 3)
        self.w = np.asarray(self.w, dtype=float).reshape(-1)
        if len(self.v) != len(self.w):
            raise ValueError("v and w must describe the same number of planes")

    @property
    def n_planes(self):
        return len(self.w)

    @property
    def size(self):
        return 4 * self.n_planes + 12

    def to_vector(self):
        return np.concatenate([vec(self.a), self.b, self.v.ravel(), self.w])

    @classmethod
    def from_vector(cls, x, n_planes):
        x = np.asarray(x, dtype=float)
        if x.shape != (4 * n_planes + 12,):
            raise ValueError(f"expected {4 * n_planes + 12} entries, got {x.shape}")
        v_end = 12 + 3 * n_planes
        return cls(unvec(x[:9]), x[9:12], x[12:v_end], x[v_end:])

    def copy(self):
        return LatentParameters(self.a.copy(), self.b.copy(), self.v.copy(), self.w.copy())


@dataclass(frozen=True)
class GaugeTransform:
    alpha: float = 1.0
    beta: float = 1.0
    c: tuple = (0.0, 0.0, 0.0)


def pi_map(eta, check=True):
    """Homographies ``w_i A + b v_i^T`` as an ``(I, 3, 3)`` stack."""
    hs = eta.w[:, None, None] * eta.a[None] + np.einsum("r,is->irs", eta.b, eta.v)
    if check:
        for i, h in enumerate(hs):
            if not is_invertible(h):
                raise NonInvertibleResult(f"homography {i} is not invertible")
    return hs


def pi_jacobian(eta):
    """Derivative of ``pi_map(eta).reshape(-1)`` with respect to ``eta.to_vector()``."""
    n = eta.n_planes
    jac = np.zeros((n, 3, 3, 4 * n + 12))
    v_end = 12 + 3 * n
    for i in range(n):
        for r in range(3):
            for s in range(3):
                row = jac[i, r, s]
                row[3 * s + r] = eta.w[i]
                row[9 + r] = eta.v[i, s]
                row[12 + 3 * i + s] = eta.b[r]
                row[v_end + i] = eta.a[r, s]
    return jac.reshape(9 * n, 4 * n + 12)


def apply_gauge(eta, g):
    """Re-parametrise ``eta`` without changing ``pi_map(eta)``."""
    if g.alpha == 0 or g.beta == 0:
        raise ValueError("gauge scalars must be non-zero")
    c = np.asarray(g.c, dtype=float)
    return LatentParameters(
        a=g.beta * eta.a + np.outer(eta.b, c),
        b=g.alpha * eta.b,
        v=eta.v / g.alpha - np.outer(eta.w, c) / (g.alpha * g.beta),
        w=eta.w / g.beta,
    )


def canonical_gauge(eta, reference=0):
    """Gauge with ``A = H_ref``, ``w_ref = 1``, ``v_ref = 0``, unit ``b`` signed positive."""
    g = GaugeTransform(1.0, eta.w[reference], tuple(eta.v[reference]))
    out = apply_gauge(eta, g)
    nb = np.linalg.norm(out.b)
    if nb > 0:
        alpha = nb if out.b[np.argmax(np.abs(out.b))] > 0 else -nb
        out = apply_gauge(out, GaugeTransform(1.0 / alpha, 1.0, (0.0, 0.0, 0.0)))
    out.v[reference] = 0.0
    out.w[reference] = 1.0
    return out


def factorize(hs, reference=0, rank_tol=0.1):
    """Latent parameters in canonical gauge from a (near-)consistent collection.

    ``A`` is the reference homography, ``w_i`` the pencil double roots and
    ``(b, v)`` the leading rank-one factor of J, with ``b`` unit length and its
    largest-magnitude component positive.  Exact for consistent input; for
    noisy input the result is the nearest representable collection in this
    construction.  A :class:`RankOneFailure` warning is issued when the
    rank-one residual exceeds ``rank_tol`` times ``frob(J)``.
    """
    hs = np.asarray(hs, dtype=float)
    n = len(hs)
    order = [reference] + [i for i in range(n) if i != reference]
    j, omegas, flags = build_j(hs[order])
    if any(flags):
        bad = [order[k + 1] for k, f in enumerate(flags) if f]
        raise DegenerateRoot(f"degenerate pencil for homographies {bad}")
    b, wvec, residual = rank_one_approx(j)
    if residual > rank_tol * frob(j):
        warnings.warn(
            f"J is far from rank one (residual {residual:.3g}, norm {frob(j):.3g})",
            RankOneFailure,
            stacklevel=2,
        )
    if b[np.argmax(np.abs(b))] < 0:
        b, wvec = -b, -wvec
    v = np.zeros((n, 3))
    w = np.ones(n)
    for k, i in enumerate(order[1:]):
        v[i] = wvec[3 * k : 3 * k + 3]
        w[i] = omegas[k]
    return LatentParameters(hs[reference].copy(), b, v, w)
