"""Reprojection (maximum-likelihood) cost and RMS evaluation.

For homographies ``H_i`` and corrected first-view points ``m^_ij`` the cost is

    sum_ij ||m_ij - m^_ij||^2 + ||m'_ij - dehom(H_i hom(m^_ij))||^2.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import PointAtInfinity

Y3_TOL = 1e-14


def homogenize(x):
    x = np.asarray(x, dtype=float)
    return np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)


def dehomogenize(y):
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y[..., 2]) < Y3_TOL):
        raise PointAtInfinity("third homogeneous coordinate vanishes")
    return y[..., :2] / y[..., 2:]


@dataclass
class MlState:
    homographies: np.ndarray
    corrections: list  # per plane (N_i, 2)


def ml_cost(state, data):
    """Reprojection cost of ``state`` on the measured pairs in ``data``."""
    total = 0.0
    for h, mhat, m, mp in zip(state.homographies, state.corrections, data.x1, data.x2):
        mhat = np.asarray(mhat, dtype=float)
        if mhat.shape != m.shape:
            raise ValueError("corrections must match the measured points")
        proj = dehomogenize(homogenize(mhat) @ np.asarray(h).T)
        total += np.sum((m - mhat) ** 2) + np.sum((mp - proj) ** 2)
    return float(total)


def optimal_corrections(h, x1, x2, iters=30):
    """Per-pair minimiser of ``||m - m^||^2 + ||m' - H(m^)||^2``.

    Vectorised damped Gauss-Newton on each 2-d problem, started at ``m^ = m``.
    Returns ``(corrections, per_pair_cost, valid_mask)``; pairs whose image
    goes to infinity are masked out.
    """
    h = np.asarray(h, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    mhat = x1.copy()

    def evaluate(p):
        y = homogenize(p) @ h.T
        ok = np.abs(y[:, 2]) >= Y3_TOL
        y3 = np.where(ok, y[:, 2], 1.0)
        f = y[:, :2] / y3[:, None]
        cost = np.sum((x1 - p) ** 2, axis=1) + np.sum((x2 - f) ** 2, axis=1)
        return f, y3, np.where(ok, cost, np.inf), ok

    f, y3, cost, ok = evaluate(mhat)
    mu = np.full(len(x1), 1e-6)
    for _ in range(iters):
        # df/dm^ rows: (H[k, :2] - f_k H[2, :2]) / y3
        jf = (h[None, :2, :2] - f[:, :, None] * h[None, 2:3, :2]) / y3[:, None, None]
        r1 = x1 - mhat
        r2 = x2 - f
        # residual Jacobian wrt m^ is [-I; -jf]
        a = np.eye(2)[None] + np.einsum("pki,pkj->pij", jf, jf)
        g = -r1 - np.einsum("pki,pk->pi", jf, r2)
        a_damped = a + mu[:, None, None] * np.eye(2)[None]
        step = -np.linalg.solve(a_damped, g[:, :, None])[:, :, 0]
        trial = mhat + step
        f_t, y3_t, cost_t, ok_t = evaluate(trial)
        better = ok_t & (cost_t <= cost)
        mhat = np.where(better[:, None], trial, mhat)
        f = np.where(better[:, None], f_t, f)
        y3 = np.where(better, y3_t, y3)
        cost = np.where(better, cost_t, cost)
        mu = np.where(better, mu * 0.1, mu * 10.0)
        if np.all(np.abs(step) < 1e-12 * (1.0 + np.abs(mhat))):
            break
    return mhat, cost, ok


@dataclass
class RmsReport:
    per_plane: list
    overall: float
    excluded: int = 0


def evaluate_rms(hs, data):
    """Per-plane and pooled RMS distance, with corrections re-optimised per pair.

    RMS is ``sqrt(cost / (2 N))``: each pair contributes two point
    displacements, one per view.
    """
    per_plane, tot_cost, tot_n, excluded = [], 0.0, 0, 0
    for h, x1, x2 in zip(hs, data.x1, data.x2):
        if len(x1) == 0:
            per_plane.append(float("nan"))
            continue
        _, cost, ok = optimal_corrections(h, x1, x2)
        excluded += int(np.sum(~ok))
        c = cost[ok]
        n = len(c)
        per_plane.append(float(np.sqrt(np.sum(c) / (2 * n))) if n else float("nan"))
        tot_cost += float(np.sum(c))
        tot_n += n
    overall = float(np.sqrt(tot_cost / (2 * tot_n))) if tot_n else float("nan")
    return RmsReport(per_plane, overall, excluded)
