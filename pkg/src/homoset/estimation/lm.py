"""Levenberg-Marquardt for sums of squared residuals.

The damping follows Nielsen's update with Marquardt's diagonal scaling.  The
linear algebra of a step is delegated to a ``step_solver`` so that
structured problems (bundle adjustment) can plug in a Schur-complement
solve while small dense problems use :func:`dense_step`.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import LinAlgFailure


@dataclass
class LMOptions:
    gtol: float = 1e-10
    xtol: float = 1e-12
    ftol: float = 1e-14
    max_iter: int = 200
    mu0: float = 1e-4
    mu_max: float = 1e20


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    iterations: int
    accepted: int
    converged: bool
    reason: str
    history: list = field(default_factory=list)


def _damping_diag(diag):
    floor = 1e-12 * max(float(np.max(diag)), 1e-300)
    return np.maximum(diag, floor)


def dense_step(jac, r, mu):
    """Solve ``(J^T J + mu D) dx = -J^T r`` with ``D = diag(J^T J)``.

    Returns ``(dx, gradient, predicted_reduction)`` where the gradient is
    ``J^T r`` and the predicted reduction refers to ``||r||^2``.
    """
    g = jac.T @ r
    a = jac.T @ jac
    d = _damping_diag(np.diag(a).copy())
    dx = np.linalg.solve(a + mu * np.diag(d), -g)
    pred = -g @ dx + mu * dx @ (d * dx)
    return dx, g, pred


def lm_minimize(residual_fn, jacobian_fn, x0, options=None, step_solver=dense_step):
    """Minimise ``||residual_fn(x)||^2`` from ``x0``.

    Stops when ``max|J^T r| < gtol``, when the step is below
    ``xtol * (||x|| + xtol)``, when an accepted step lowers the cost by less
    than ``ftol`` relative, or after ``max_iter`` trial steps.  ``history``
    lists the cost after every accepted step, so it is non-increasing.
    """
    opts = options or LMOptions()
    x = np.array(x0, dtype=float, copy=True)
    r = residual_fn(x)
    cost = float(r @ r)
    history = [cost]
    if cost == 0.0:
        return LMResult(x, cost, 0, 0, True, "zero residual", history)
    jac = jacobian_fn(x)
    mu, nu = opts.mu0, 2.0
    accepted = 0
    reason, converged = "max_iter", False
    it = 0
    while it < opts.max_iter:
        try:
            dx, g, pred = step_solver(jac, r, mu)
        except np.linalg.LinAlgError:
            it += 1
            mu *= nu
            nu *= 2.0
            if mu > opts.mu_max:
                raise LinAlgFailure("normal equations singular at every damping level")
            continue
        if np.max(np.abs(g)) < opts.gtol:
            reason, converged = "gtol", True
            break
        if np.linalg.norm(dx) < opts.xtol * (np.linalg.norm(x) + opts.xtol):
            reason, converged = "xtol", True
            break
        # iterations count evaluated trial steps
        it += 1
        x_new = x + dx
        r_new = residual_fn(x_new)
        cost_new = float(r_new @ r_new)
        # reduction from the residual difference; subtracting the two sums
        # cancels catastrophically near the minimum
        drop = float((r - r_new) @ (r + r_new)) if np.isfinite(cost_new) else -np.inf
        rho = drop / pred if pred > 0 else -1.0
        if rho > 0:
            small = drop <= opts.ftol * cost
            x, r, cost = x_new, r_new, cost_new
            # the recomputed sum can exceed the previous one by an ulp even
            # though the step lowered the cost
            history.append(min(cost, history[-1]))
            accepted += 1
            if cost == 0.0:
                reason, converged = "zero residual", True
                break
            if small:
                reason, converged = "ftol", True
                break
            jac = jacobian_fn(x)
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
        else:
            mu *= nu
            nu *= 2.0
            if mu > opts.mu_max:
                reason, converged = "damping limit", True
                break
    return LMResult(x, cost, it, accepted, converged, reason, history)
