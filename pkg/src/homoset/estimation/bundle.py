"""Bundle adjustment of several homographies over the reprojection cost.

Three estimators share one machinery:

* ``ba_unconstrained`` - every ``H_i`` free (the per-plane gold standard),
* ``ba_implicit`` - homographies generated by latent variables,
* ``ba_explicit`` - free ``H_i`` subject to the normalised-minor constraints
  and ``||H_i|| = 1`` for ``i >= 1``, solved by an augmented Lagrangian.

All work happens in Hartley-normalised coordinates, with one similarity per
view pooled over every plane so that consistency is preserved.  Residuals
are scaled back to pixels, so the minimised quantity is the pixel
reprojection cost.  The unknowns are a global block ``theta`` plus a 2-d
correction per measured point; the normal equations are reduced onto
``theta`` with a Schur complement over the 2x2 correction blocks.
"""

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ..consistency import phi_jacobian, psi, rank_one_omega
from ..errors import (
    ConstraintStall, DegenerateRoot, HomosetError, NonInvertibleResult, RankOneFailure,
)
from ..latent import LatentParameters, factorize, pi_jacobian, pi_map
from ..linalg import canonical_sign
from ..pencil import degeneracy_margins
from .cost import RmsReport, evaluate_rms
from .dlt import design_matrix, dlt, hartley_normalize, transform_points
from .lm import LMOptions, _damping_diag, lm_minimize


@dataclass
class AugLagOptions:
    rho0: float = 10.0
    rho_growth: float = 5.0
    required_drop: float = 4.0
    ctol: float = 1e-8
    max_outer: int = 30
    stall_rounds: int = 3
    lift_tol: float = 1e-6


@dataclass
class EstimationReport:
    method: str
    homographies: np.ndarray
    cost: float
    psi: float
    rms: RmsReport
    iterations: int
    converged: bool
    constraint_residual_max: float
    rms_test: RmsReport = None
    outer_rounds: int = 0
    wall_time: float = 0.0
    settings: dict = field(default_factory=dict)


class _Frame:
    """Pooled Hartley normalisation of all planes, and the flattened point list."""

    def __init__(self, data):
        if data.n_planes < 1:
            raise ValueError("no planes in data")
        for i, n in enumerate(data.counts):
            if n < 4:
                raise ValueError(f"plane {i} has {n} pairs; need at least 4")
        all1, all2 = np.vstack(data.x1), np.vstack(data.x2)
        self.t1, self.m1 = hartley_normalize(all1)
        self.t2, self.m2 = hartley_normalize(all2)
        self.w1 = 1.0 / self.t1[0, 0]
        self.w2 = 1.0 / self.t2[0, 0]
        self.plane = np.concatenate([np.full(n, i) for i, n in enumerate(data.counts)])
        self.n_planes = data.n_planes
        self.n_points = len(self.plane)

    def to_normalized(self, hs):
        hs = np.asarray(hs, dtype=float)
        out = self.t2 @ hs @ np.linalg.inv(self.t1)
        return out / np.sqrt(np.sum(out**2, axis=(-2, -1), keepdims=True))

    def from_normalized(self, hs):
        out = np.linalg.solve(self.t2, np.asarray(hs) @ self.t1)
        return np.array([canonical_sign(h) for h in out])

    def latent_to_normalized(self, eta):
        t1inv = np.linalg.inv(self.t1)
        return LatentParameters(self.t2 @ eta.a @ t1inv, self.t2 @ eta.b, eta.v @ t1inv, eta.w)


class _BundleProblem:
    """Residuals ``[w1 (m - m^), w2 (m' - H(m^))]`` per point, plus optional extras.

    ``hom_fn(theta) -> (hs, dhs)`` gives the homographies and their
    derivative ``dhs[i]`` (9 x n_theta) of ``hs[i].ravel()``.
    ``extra_fn(theta, need_jac) -> (e, E)`` adds residuals depending on
    theta only.  ``unit`` rescales the point residuals (1 keeps pixels);
    :meth:`ml_cost` always reports pixels.
    """

    def __init__(self, frame, hom_fn, n_theta, extra_fn=None, unit=1.0):
        self.f = frame
        self.hom_fn = hom_fn
        self.n_theta = n_theta
        self.extra_fn = extra_fn
        self.unit = unit
        self.w1 = unit * frame.w1
        self.w2 = unit * frame.w2

    def split(self, x):
        return x[: self.n_theta], x[self.n_theta :].reshape(-1, 2)

    def _project(self, hs, mhat):
        hp = hs[self.f.plane]
        y = np.einsum("pij,pj->pi", hp[:, :, :2], mhat) + hp[:, :, 2]
        return hp, y

    def point_residuals(self, theta, mhat):
        hs, _ = self.hom_fn(theta)
        _, y = self._project(hs, mhat)
        f = y[:, :2] / y[:, 2:]
        r1 = self.w1 * (self.f.m1 - mhat)
        r2 = self.w2 * (self.f.m2 - f)
        return np.hstack([r1, r2])

    def residuals(self, x):
        theta, mhat = self.split(x)
        r = self.point_residuals(theta, mhat).ravel()
        if self.extra_fn is None:
            return r
        e, _ = self.extra_fn(theta, False)
        return np.concatenate([r, e])

    def jacobian(self, x):
        theta, mhat = self.split(x)
        hs, dhs = self.hom_fn(theta)
        hp, y = self._project(hs, mhat)
        y3 = y[:, 2]
        f = y[:, :2] / y3[:, None]
        jf = (hp[:, :2, :2] - f[:, :, None] * hp[:, 2:3, :2]) / y3[:, None, None]
        p = self.f.n_points
        hom = np.column_stack([mhat, np.ones(p)])
        dfdh = np.zeros((p, 2, 9))
        dfdh[:, 0, 0:3] = hom
        dfdh[:, 1, 3:6] = hom
        dfdh[:, :, 6:9] = -f[:, :, None] * hom[:, None, :]
        dfdh /= y3[:, None, None]
        b2 = -self.w2 * np.einsum("pkh,phj->pkj", dfdh, dhs[self.f.plane])
        c2 = -self.w2 * jf
        if self.extra_fn is None:
            e_jac = np.zeros((0, self.n_theta))
        else:
            _, e_jac = self.extra_fn(theta, True)
        return b2, c2, e_jac

    def dense_jacobian(self, x):
        """Full Jacobian as a dense array (for checking only)."""
        b2, c2, e_jac = self.jacobian(x)
        p = self.f.n_points
        out = np.zeros((4 * p + len(e_jac), self.n_theta + 2 * p))
        for k in range(p):
            rows = slice(4 * k, 4 * k + 4)
            cols = slice(self.n_theta + 2 * k, self.n_theta + 2 * k + 2)
            out[4 * k + 2 : 4 * k + 4, : self.n_theta] = b2[k]
            out[rows, cols] = np.vstack([-self.w1 * np.eye(2), c2[k]])
        out[4 * p :, : self.n_theta] = e_jac
        return out

    def schur_step(self, jac, r, mu):
        b2, c2, e_jac = jac
        p = self.f.n_points
        rp = r[: 4 * p].reshape(p, 4)
        r1, r2 = rp[:, :2], rp[:, 2:]
        e = r[4 * p :]
        w1 = self.w1

        u = np.einsum("pki,pkj->ij", b2, b2) + e_jac.T @ e_jac
        v = w1**2 * np.eye(2)[None] + np.einsum("pki,pkj->pij", c2, c2)
        wmat = np.einsum("pki,pkj->pij", b2, c2)
        g_theta = np.einsum("pki,pk->i", b2, r2) + e_jac.T @ e
        g_pt = -w1 * r1 + np.einsum("pki,pk->pi", c2, r2)

        d_all = _damping_diag(
            np.concatenate([np.diag(u), np.einsum("pii->pi", v).ravel()])
        )
        d_theta = d_all[: self.n_theta]
        d_pt = d_all[self.n_theta :].reshape(p, 2)
        u_d = u + mu * np.diag(d_theta)
        v_d = v.copy()
        v_d[:, 0, 0] += mu * d_pt[:, 0]
        v_d[:, 1, 1] += mu * d_pt[:, 1]
        det = v_d[:, 0, 0] * v_d[:, 1, 1] - v_d[:, 0, 1] * v_d[:, 1, 0]
        v_inv = np.empty_like(v_d)
        v_inv[:, 0, 0] = v_d[:, 1, 1] / det
        v_inv[:, 1, 1] = v_d[:, 0, 0] / det
        v_inv[:, 0, 1] = -v_d[:, 0, 1] / det
        v_inv[:, 1, 0] = -v_d[:, 1, 0] / det

        wv = np.einsum("pia,pab->pib", wmat, v_inv)
        s = u_d - np.einsum("pib,pjb->ij", wv, wmat)
        rhs = -g_theta + np.einsum("pib,pb->i", wv, g_pt)
        d_th = np.linalg.solve(s, rhs)
        d_p = -np.einsum("pab,pb->pa", v_inv, g_pt + np.einsum("pia,i->pa", wmat, d_th))
        dx = np.concatenate([d_th, d_p.ravel()])
        g = np.concatenate([g_theta, g_pt.ravel()])
        pred = -g @ dx + mu * dx @ (d_all * dx)
        return dx, g, pred

    def solve(self, x0, options):
        return lm_minimize(self.residuals, self.jacobian, x0, options, self.schur_step)

    def ml_cost(self, x):
        theta, mhat = self.split(x)
        r = self.point_residuals(theta, mhat) / self.unit
        return float(np.sum(r**2))


def _free_homographies(n_planes, n_extra=0):
    # parameters past the 9 I matrix entries do not move the homographies
    dhs = np.zeros((n_planes, 9, 9 * n_planes + n_extra))
    for i in range(n_planes):
        dhs[i, :, 9 * i : 9 * i + 9] = np.eye(9)

    def hom_fn(theta):
        return theta[: 9 * n_planes].reshape(n_planes, 3, 3), dhs

    return hom_fn


def _latent_homographies(n_planes):
    def hom_fn(theta):
        eta = LatentParameters.from_vector(theta, n_planes)
        return pi_map(eta, check=False), pi_jacobian(eta).reshape(n_planes, 9, -1)

    return hom_fn


def dlt_all(data):
    """Independent per-plane DLT estimates (pixel coordinates, unit norm)."""
    return np.array([dlt(a, b) for a, b in zip(data.x1, data.x2)])


def _report(method, frame, data, hs_norm, cost, iterations, converged, t0, **extra):
    hs = frame.from_normalized(hs_norm)
    rep = psi(hs)
    return EstimationReport(
        method=method,
        homographies=hs,
        cost=cost,
        psi=rep.psi,
        rms=evaluate_rms(hs, data),
        iterations=iterations,
        converged=converged,
        constraint_residual_max=rep.max_abs_phi,
        wall_time=time.perf_counter() - t0,
        **extra,
    )


def estimate_dlt(data):
    """Wrap per-plane DLT in an :class:`EstimationReport`."""
    t0 = time.perf_counter()
    hs = dlt_all(data)
    frame = _Frame(data)
    hs_norm = frame.to_normalized(hs)
    rep = _report("dlt", frame, data, hs_norm, 0.0, 0, True, t0)
    # reprojection cost with per-pair optimal corrections
    cost = 2.0 * sum(
        len(x1) * r**2 for x1, r in zip(data.x1, rep.rms.per_plane) if len(x1)
    )
    return replace(rep, cost=float(cost))


def ba_unconstrained(data, init=None, options=None):
    """Minimise the reprojection cost over free homographies and corrections."""
    t0 = time.perf_counter()
    opts = options or LMOptions()
    frame = _Frame(data)
    hs0 = dlt_all(data) if init is None else np.asarray(init, dtype=float)
    n = data.n_planes
    prob = _BundleProblem(frame, _free_homographies(n), 9 * n)
    x0 = np.concatenate([frame.to_normalized(hs0).ravel(), frame.m1.ravel()])
    res = prob.solve(x0, opts)
    theta, _ = prob.split(res.x)
    return _report(
        "ba", frame, data, theta.reshape(n, 3, 3), prob.ml_cost(res.x),
        res.iterations, res.converged, t0, settings={"lm": vars(opts), "reason": res.reason},
    )


def implicit_candidates(frame, data, hs_norm):
    """Latent starting points ranked by the reprojection cost of their homographies.

    Candidates are the factorisations of ``hs_norm`` with every plane in turn
    as reference, each with and without :func:`refit_planes`.  Noisy
    estimates factorise differently depending on the reference, and the
    algebraic refit helps on some planes and hurts on others, so the
    geometric cost decides.
    """
    scored = []
    for ref in range(len(hs_norm)):
        try:
            # noisy estimates are never exactly rank one; that is expected here
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankOneFailure)
                base = factorize(hs_norm, reference=ref)
        except HomosetError:
            continue
        for eta in (base, refit_planes(frame, base, ref)):
            try:
                hs = frame.from_normalized(pi_map(eta, check=False))
                cost = evaluate_rms(hs, data).overall
            except (HomosetError, np.linalg.LinAlgError):
                continue
            if np.isfinite(cost):
                scored.append((cost, len(scored), eta))
    if not scored:
        raise DegenerateRoot("no factorisation of the initial estimates is usable")
    return [eta for _, _, eta in sorted(scored, key=lambda t: t[:2])]


def refit_planes(frame, eta, reference=0, targets=None):
    """Algebraic least-squares ``(w_i, v_i)`` for every plane but the reference.

    With ``A`` and ``b`` fixed, ``H_i = w_i A + b v_i^T`` is linear in the
    four plane parameters, so each plane is a small homogeneous DLT problem
    on its own (normalised) points.  Each result is scaled to the Frobenius
    norm, and sign, of ``targets[i]`` (default: the homography it replaces).
    """
    eta = eta.copy()
    basis = np.zeros((9, 4))
    basis[:, 0] = eta.a.ravel()
    for c in range(3):
        basis[:, 1 + c] = np.outer(eta.b, np.eye(3)[c]).ravel()
    for i in range(eta.n_planes):
        if i == reference:
            continue
        sel = frame.plane == i
        m = design_matrix(frame.m1[sel], frame.m2[sel]) @ basis
        _, _, vt = np.linalg.svd(m, full_matrices=True)
        p = vt[-1]
        if targets is None:
            old = eta.w[i] * eta.a + np.outer(eta.b, eta.v[i])
        else:
            old = targets[i]
        new = p[0] * eta.a + np.outer(eta.b, p[1:])
        scale = np.linalg.norm(old) / np.linalg.norm(new)
        if np.sum(old * new) < 0:
            scale = -scale
        eta.w[i], eta.v[i] = scale * p[0], scale * p[1:]
    return eta


def ba_implicit(data, init=None, options=None, max_starts=3, screen_iter=8):
    """Minimise the reprojection cost over latent variables and corrections.

    ``init`` is a :class:`LatentParameters` in pixel coordinates; by default
    the per-plane DLT estimates are factorised in several ways (see
    :func:`implicit_candidates`), each candidate gets ``screen_iter`` LM
    iterations and the cheapest is run to convergence.  When a run collapses
    onto a singular homography the next-ranked start is tried, up to
    ``max_starts``.
    """
    t0 = time.perf_counter()
    opts = options or LMOptions()
    frame = _Frame(data)
    n = data.n_planes
    if init is None:
        starts = implicit_candidates(frame, data, frame.to_normalized(dlt_all(data)))
    else:
        starts = [frame.latent_to_normalized(init)]
    prob = _BundleProblem(frame, _latent_homographies(n), 4 * n + 12)
    iterations = 0
    if len(starts) > 1:
        # short runs from every start; the basins separate within a few steps
        screened = []
        for eta0 in starts:
            x0 = np.concatenate([eta0.to_vector(), frame.m1.ravel()])
            res = prob.solve(x0, replace(opts, max_iter=screen_iter))
            iterations += res.iterations
            if np.isfinite(res.cost):
                screened.append((res.cost, len(screened), res.x))
        starts = [x for _, _, x in sorted(screened, key=lambda t: t[:2])]
    else:
        starts = [np.concatenate([starts[0].to_vector(), frame.m1.ravel()])]
    failure = None
    for k, x0 in enumerate(starts[:max_starts]):
        res = prob.solve(x0, opts)
        iterations += res.iterations
        theta, _ = prob.split(res.x)
        hs_norm = pi_map(LatentParameters.from_vector(theta, n), check=False)
        try:
            psi(frame.from_normalized(hs_norm))
        except (NonInvertibleResult, DegenerateRoot) as exc:
            # collapsed onto a singular homography; try the next start
            failure = exc
            continue
        break
    else:
        raise failure
    return _report(
        "ba-implicit", frame, data, hs_norm, prob.ml_cost(res.x),
        iterations, res.converged, t0,
        settings={"lm": vars(opts), "reason": res.reason, "start": k},
    )


def explicit_constraints(theta, n_planes, omega_fallback=None, need_jac=True, free=()):
    """Constraint vector ``[phi..., ||H_i|| - 1 (i >= 1)]`` and its Jacobian.

    ``free`` lists blocks whose omega is an independent variable; their
    values follow the matrix entries in ``theta``, in the same order.
    """
    hs = theta[: 9 * n_planes].reshape(n_planes, 3, 3)
    omega_free = None
    if free:
        omega_free = [None] * (n_planes - 1)
        for k, v in zip(free, theta[9 * n_planes:]):
            omega_free[k] = float(v)
    phis, dphi, omegas, flags = phi_jacobian(hs, omega_fallback, need_jac, omega_free)
    norms = np.sqrt(np.sum(hs[1:] ** 2, axis=(1, 2)))
    if not need_jac:
        return np.concatenate([phis, norms - 1.0]), None, omegas, flags
    dnorm = np.zeros((n_planes - 1, 9 * n_planes + len(free)))
    for k in range(1, n_planes):
        dnorm[k - 1, 9 * k : 9 * k + 9] = hs[k].ravel() / norms[k - 1]
    c = np.concatenate([phis, norms - 1.0])
    return c, np.vstack([dphi, dnorm]), omegas, flags


def ba_explicit(data, init=None, options=None, al_options=None):
    """Minimise the reprojection cost subject to the consistency constraints.

    Augmented Lagrangian: each round runs LM on
    ``cost + sum(lam_k c_k) + rho/2 sum(c_k^2)``, then updates
    ``lam <- lam + rho c`` and multiplies ``rho`` by ``rho_growth`` when the
    largest violation fell by less than ``required_drop``.  Stops once the
    violation is below ``ctol`` both in the normalised frame and for the
    reported pixel-frame homographies.  Raises :class:`ConstraintStall` if
    the violation is no lower than it was ``stall_rounds`` rounds earlier.

    The default start is the per-plane DLT.  If that run collapses onto a
    singular homography or stalls, it is repeated once from the
    :func:`ba_implicit` estimate, a feasible point found with several
    starts; ``settings["start"]`` records which start produced the result.
    """
    t0 = time.perf_counter()
    opts = options or LMOptions()
    al = al_options or AugLagOptions()
    frame = _Frame(data)
    n = data.n_planes
    if n < 2:
        raise ValueError("explicit constraints need at least two planes")
    hs0 = dlt_all(data) if init is None else np.asarray(init, dtype=float)
    start = "dlt" if init is None else "init"
    try:
        run = _auglag(frame, frame.to_normalized(hs0), opts, al)
        hs_norm = run[0][: 9 * n].reshape(n, 3, 3)
        psi(frame.from_normalized(hs_norm))
    except (NonInvertibleResult, DegenerateRoot, ConstraintStall):
        if init is not None:
            raise
        start = "ba-implicit"
        hs1 = ba_implicit(data, options=opts).homographies
        run = _auglag(frame, frame.to_normalized(hs1), opts, al)
    x, prob, iterations, converged, rounds, history = run
    return _report(
        "ba-explicit", frame, data, x[: 9 * n].reshape(n, 3, 3), prob.ml_cost(x),
        iterations, converged, t0, outer_rounds=rounds,
        settings={"lm": vars(opts), "auglag": vars(al), "start": start, "history": history},
    )


def _auglag(frame, hs_norm, opts, al):
    """Augmented-Lagrangian rounds from normalised-frame homographies ``hs_norm``."""
    n = len(hs_norm)
    theta0 = (hs_norm / np.linalg.norm(hs_norm, axis=(1, 2), keepdims=True)).ravel()
    c0, _, frozen, _ = explicit_constraints(theta0, n)

    state = {"lam": np.zeros(len(c0)), "rho": al.rho0, "frozen": list(frozen), "free": ()}

    def extra_fn(theta, need_jac):
        c, dc, _, _ = explicit_constraints(theta, n, state["frozen"], need_jac, state["free"])
        k = np.sqrt(0.5 * state["rho"])
        return k * (c + state["lam"] / state["rho"]), None if dc is None else k * dc

    # the reprojection term is measured in normalised units so that the
    # penalty schedule does not depend on the image resolution
    unit = 1.0 / np.sqrt(frame.w1 * frame.w2)

    def problem():
        n_theta = 9 * n + len(state["free"])
        return _BundleProblem(frame, _free_homographies(n, len(state["free"])), n_theta,
                              extra_fn, unit)

    theta0, _ = _lift_omegas(theta0, n, state, al.lift_tol)
    prob = problem()
    x = np.concatenate([theta0, frame.m1.ravel()])
    prev = np.max(np.abs(c0))
    iterations, converged, rounds = 0, False, 0
    history = []
    for rounds in range(1, al.max_outer + 1):
        # inexact inner solves while the constraints are far from satisfied
        inner = replace(opts, ftol=max(opts.ftol, min(1e-4, 1e-2 * prev)))
        res = prob.solve(x, inner)
        x = res.x
        iterations += res.iterations
        theta = x[: prob.n_theta]
        # the reference scale is a free gauge; keep it at unit norm
        h0_norm = np.linalg.norm(theta[:9])
        theta[:9] /= h0_norm
        theta[9 * n:] *= h0_norm
        lifted_theta, lifted = _lift_omegas(theta, n, state, al.lift_tol)
        if lifted:
            x = np.concatenate([lifted_theta, x[prob.n_theta:]])
            prob = problem()
            theta = x[: prob.n_theta]
        c, _, omegas, flags = explicit_constraints(theta, n, state["frozen"], True, state["free"])
        state["frozen"] = [w if not bad else old
                           for w, bad, old in zip(omegas, flags, state["frozen"])]
        cmax = float(np.max(np.abs(c)))
        pixel_max = _pixel_phi_max(frame, theta, n)
        if cmax <= 1e-2 * al.ctol and pixel_max > al.ctol:
            # the pixel-frame minors can be a few hundred times larger than the
            # normalised ones, and the last factor is below what the merit
            # function resolves; finish with a minimum-norm projection
            theta[:], c, cmax, pixel_max = _project_feasible(
                frame, theta, n, state["frozen"], state["free"])
        history.append((cmax, pixel_max, state["rho"], res.iterations, res.reason))
        if max(cmax, pixel_max) <= al.ctol:
            converged = res.converged
            break
        state["lam"] = state["lam"] + state["rho"] * c
        if cmax > prev / al.required_drop:
            state["rho"] *= al.rho_growth
        k = al.stall_rounds
        if len(history) > k and cmax >= history[-1 - k][0]:
            raise ConstraintStall(
                f"constraint violation stuck at {cmax:.3g} after {rounds} rounds"
            )
        prev = cmax
    return x, prob, iterations, converged, rounds, history


def _lift_omegas(theta, n, state, tol):
    """Make omega an independent variable for blocks near a triple root.

    The closed form and its gradient blow up as the pencil approaches a
    triple root, which a constrained optimum can sit on.  Once a block's
    margin drops below ``tol`` its omega joins ``theta`` (after the matrix
    entries and any earlier free values) and stays free.  Returns the new
    ``theta`` and the newly lifted blocks.
    """
    hs = theta[: 9 * n].reshape(n, 3, 3)
    margins = degeneracy_margins(hs[1:], hs[0])
    new = [k for k in range(n - 1) if margins[k] < tol and k not in state["free"]]
    if not new:
        return theta, []
    _, _, omegas, flags = phi_jacobian(hs, state["frozen"], need_jac=False)
    values = [rank_one_omega(hs[k + 1], hs[0], omegas[k]) for k in new]
    state["free"] = tuple(state["free"]) + tuple(new)
    return np.concatenate([theta, values]), new


def _project_feasible(frame, theta, n, frozen, free=(), steps=3):
    """Gauss-Newton steps ``theta -= pinv(dc) c`` on the explicit constraints.

    Used only once the constraints hold in the normalised frame, so the
    moves are tiny and the reprojection cost is unaffected to first order.
    Returns ``(theta, c, max|c|, pixel-frame max|phi|)`` of the best iterate.
    """
    c, dc, _, _ = explicit_constraints(theta, n, frozen, True, free)
    best = (theta.copy(), c, float(np.max(np.abs(c))), _pixel_phi_max(frame, theta, n))
    for _ in range(steps):
        # the minors are redundant, so dc is rank deficient; drop its null space
        step = np.linalg.lstsq(dc, c, rcond=1e-8)[0]
        trial = best[0] - step
        h0_norm = np.linalg.norm(trial[:9])
        trial[:9] /= h0_norm
        trial[9 * n:] *= h0_norm
        c, dc, _, _ = explicit_constraints(trial, n, frozen, True, free)
        cand = (trial, c, float(np.max(np.abs(c))), _pixel_phi_max(frame, trial, n))
        if max(cand[2:]) >= max(best[2:]):
            break
        best = cand
    return best


def _pixel_phi_max(frame, theta, n):
    try:
        return psi(frame.from_normalized(theta[: 9 * n].reshape(n, 3, 3))).max_abs_phi
    except DegenerateRoot:
        return np.inf


ESTIMATORS = {
    "dlt": estimate_dlt,
    "ba": ba_unconstrained,
    "ba-implicit": ba_implicit,
    "ba-explicit": ba_explicit,
}


def estimate(data, method, test=None, **kwargs):
    """Run ``method`` on ``data``; attach test-set RMS when ``test`` is given."""
    if method not in ESTIMATORS:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(ESTIMATORS)}")
    report = ESTIMATORS[method](data, **kwargs)
    if test is not None:
        report = replace(report, rms_test=evaluate_rms(report.homographies, test))
    return report
