import numpy as np
import pytest
from dataclasses import replace

from conftest import fd_jacobian, small_problem
from homoset import synth
from homoset.consistency import psi
from homoset.errors import ConstraintStall, PointAtInfinity, RankDeficient
from homoset.estimation import (
    AugLagOptions, LMOptions, MlState, ba_explicit, ba_implicit, ba_unconstrained,
    dlt, estimate, estimate_dlt, evaluate_rms, explicit_constraints, hartley_normalize,
    lm_minimize, ml_cost, optimal_corrections, transform_points,
)
from homoset.estimation.bundle import (
    _BundleProblem, _Frame, _free_homographies, _latent_homographies, implicit_candidates,
)
from homoset.latent import LatentParameters, canonical_gauge, pi_map
from homoset.linalg import canonical_sign


# normalisation and DLT

def test_hartley_square():
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
    t, n = hartley_normalize(pts)
    assert np.allclose(n, [[-1, -1], [1, -1], [1, 1], [-1, 1]])
    assert np.allclose(t, [[1, 0, -1], [0, 1, -1], [0, 0, 1]])
    assert np.allclose(transform_points(t, pts), n)


def test_hartley_properties(rng):
    pts = rng.uniform(0, 1000, (30, 2))
    _, n = hartley_normalize(pts)
    assert np.allclose(n.mean(axis=0), 0, atol=1e-12)
    assert np.mean(np.linalg.norm(n, axis=1)) == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        hartley_normalize(np.ones((5, 2)))


def test_dlt_exact(rng):
    h = np.array([[1.1, 0.05, 30.0], [-0.02, 0.95, -12.0], [1e-4, -2e-4, 1.0]])
    x1 = rng.uniform(0, 640, (20, 2))
    x2 = synth.apply_homography(h, x1)
    assert np.allclose(dlt(x1, x2), canonical_sign(h), atol=1e-10)
    assert np.allclose(dlt(x1[:4], x2[:4]), canonical_sign(h), atol=1e-8)


def test_dlt_noisy_is_close(rng):
    h = np.array([[1.1, 0.05, 30.0], [-0.02, 0.95, -12.0], [1e-4, -2e-4, 1.0]])
    x1 = rng.uniform(0, 640, (200, 2))
    x2 = synth.apply_homography(h, x1) + 0.5 * rng.standard_normal((200, 2))
    got = dlt(x1, x2)
    err = synth.apply_homography(got, x1) - synth.apply_homography(h, x1)
    assert np.sqrt(np.mean(err**2)) < 0.2


def test_dlt_collinear_points():
    x1 = np.column_stack([np.arange(6.0), 2 * np.arange(6.0)])
    with pytest.raises(RankDeficient):
        dlt(x1, x1 + 1.0)
    with pytest.raises(ValueError):
        dlt(x1[:3], x1[:3])


# cost

def test_ml_cost_hand_value():
    data = synth.CorrespondenceSet([[[0.0, 0.0]]], [[[1.0, 0.0]]])
    state = MlState(np.eye(3)[None], [np.array([[0.0, 0.0]])])
    assert ml_cost(state, data) == pytest.approx(1.0)
    state = MlState(np.eye(3)[None], [np.array([[0.5, 0.0]])])
    assert ml_cost(state, data) == pytest.approx(0.5)


def test_ml_cost_point_at_infinity():
    data = synth.CorrespondenceSet([[[1.0, 0.0]]], [[[1.0, 0.0]]])
    h = np.array([[1.0, 0, 0], [0, 1, 0], [-1, 0, 1]])
    with pytest.raises(PointAtInfinity):
        ml_cost(MlState(h[None], [np.array([[1.0, 0.0]])]), data)


def test_optimal_corrections_translation():
    # x' = x + 5: the best split moves each point half way
    x1 = np.array([[0.0, 0.0], [10.0, 3.0]])
    h = np.eye(3)
    mhat, cost, ok = optimal_corrections(h, x1, x1 + [5.0, 0.0])
    assert ok.all()
    assert np.allclose(mhat, x1 + [2.5, 0.0])
    assert np.allclose(cost, 12.5)


def test_evaluate_rms_translation():
    x1 = np.random.default_rng(0).uniform(0, 100, (10, 2))
    data = synth.CorrespondenceSet([x1], [x1 + [5.0, 0.0]])
    rep = evaluate_rms(np.eye(3)[None], data)
    assert rep.overall == pytest.approx(2.5)
    assert rep.per_plane == [pytest.approx(2.5)]


def test_corrections_beat_measured_points(rng):
    data = small_problem(3, points=30, sigma=2.0)
    h = data.truth[0]
    mhat, cost, _ = optimal_corrections(h, data.x1[0], data.x2[0])
    naive = np.sum((data.x2[0] - synth.apply_homography(h, data.x1[0])) ** 2, axis=1)
    assert np.all(cost <= naive + 1e-9)


# Levenberg-Marquardt

def test_lm_linear_problem(rng):
    a = rng.standard_normal((10, 3))
    y = rng.standard_normal(10)
    res = lm_minimize(lambda x: a @ x - y, lambda x: a, np.zeros(3))
    assert res.converged and res.iterations <= 3
    assert np.allclose(res.x, np.linalg.lstsq(a, y, rcond=None)[0], rtol=0, atol=1e-10)


def test_lm_rosenbrock():
    fn = lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    jac = lambda x: np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])
    res = lm_minimize(fn, jac, np.array([-1.2, 1.0]))
    assert res.converged
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-8)
    assert np.all(np.diff(res.history) <= 0)


def test_lm_zero_residual_start():
    res = lm_minimize(lambda x: x - 1, lambda x: np.eye(2), np.ones(2))
    assert res.iterations == 0 and res.reason == "zero residual"


# Jacobians

def _problem(kind, seed):
    data = small_problem(seed, n_planes=3, points=5)
    frame = _Frame(data)
    rng = np.random.default_rng(seed)
    hs = frame.to_normalized(data.truth)
    if kind == "free":
        theta = (hs + 0.01 * rng.standard_normal(hs.shape)).ravel()
        prob = _BundleProblem(frame, _free_homographies(3), 27)
    else:
        from homoset.latent import factorize
        eta = factorize(hs)
        theta = eta.to_vector() + 0.01 * rng.standard_normal(24)
        prob = _BundleProblem(frame, _latent_homographies(3), 24)
    x = np.concatenate([theta, frame.m1.ravel() + 0.01 * rng.standard_normal(frame.m1.size)])
    return prob, x


@pytest.mark.parametrize("kind", ["free", "latent"])
def test_residual_jacobian(kind):
    for seed in range(3):
        prob, x = _problem(kind, seed)
        num = fd_jacobian(prob.residuals, x)
        ana = prob.dense_jacobian(x)
        assert np.max(np.abs(ana - num)) <= 1e-5 * np.max(np.abs(num))


def test_constraint_jacobian(rng):
    data = small_problem(4, n_planes=3)
    # the estimator evaluates constraints in the normalised frame
    hs = _Frame(data).to_normalized(data.truth) + 0.01 * rng.standard_normal((3, 3, 3))
    theta = hs.ravel()
    c, dc, omegas, _ = explicit_constraints(theta, 3)
    num = fd_jacobian(lambda t: explicit_constraints(t, 3, omegas)[0], theta)
    assert np.max(np.abs(dc - num)) <= 1e-5 * np.max(np.abs(num))


def test_schur_step_matches_dense(rng):
    prob, x = _problem("free", 1)
    jac = prob.jacobian(x)
    r = prob.residuals(x)
    dx, g, _ = prob.schur_step(jac, r, 1e-3)
    dense = prob.dense_jacobian(x)
    a = dense.T @ dense
    d = np.maximum(np.diag(a), 1e-12 * np.max(np.diag(a)))
    ref = np.linalg.solve(a + 1e-3 * np.diag(d), -dense.T @ r)
    assert np.allclose(g, dense.T @ r)
    assert np.allclose(dx, ref, rtol=1e-6, atol=1e-10)


# estimators

@pytest.fixture(scope="module")
def clean_case():
    scene = synth.random_scene(11, n_planes=3)
    return synth.sample_correspondences(scene, 20, 2)


@pytest.mark.parametrize("method", ["dlt", "ba", "ba-implicit", "ba-explicit"])
def test_noise_free_recovery(clean_case, method):
    rep = estimate(clean_case, method)
    truth = np.array([canonical_sign(h) for h in clean_case.truth])
    assert np.max(np.abs(rep.homographies - truth)) <= 1e-6
    assert rep.rms.overall <= 1e-6


def test_constrained_estimates_are_consistent():
    data = small_problem(5, n_planes=4, points=30)
    imp = ba_implicit(data)
    exp = ba_explicit(data)
    free = ba_unconstrained(data)
    assert imp.psi <= 1e-16
    assert exp.converged and exp.constraint_residual_max <= 1e-8 and exp.psi <= 1e-14
    assert free.psi > 1e-10
    # constraints can only raise the training cost
    assert free.cost <= imp.cost + 1e-9 and free.cost <= exp.cost + 1e-9
    assert exp.cost == pytest.approx(imp.cost, rel=1e-4)


def test_ba_improves_on_dlt_cost():
    data = small_problem(6, n_planes=3, points=30, sigma=2.0)
    assert ba_unconstrained(data).cost <= estimate_dlt(data).cost + 1e-9


def test_ba_implicit_gauge_independent():
    data = small_problem(7, n_planes=3, points=25)
    base = ba_implicit(data)
    frame = _Frame(data)
    eta = implicit_candidates(frame, data, frame.to_normalized(base.homographies))[0]
    # back to pixels, then move the start through a gauge transformation
    t1inv = np.linalg.inv(frame.t1)
    t2inv = np.linalg.inv(frame.t2)
    pix = LatentParameters(t2inv @ eta.a @ frame.t1, t2inv @ eta.b, eta.v @ frame.t1, eta.w)
    from homoset.latent import GaugeTransform, apply_gauge
    moved = apply_gauge(pix, GaugeTransform(2.0, -0.5, np.array([0.3, -0.1, 0.2])))
    a = ba_implicit(data, init=pix)
    b = ba_implicit(data, init=moved)
    assert a.cost == pytest.approx(b.cost, rel=1e-8)
    assert np.allclose(a.homographies, b.homographies, atol=1e-7)


def test_estimators_are_deterministic():
    data = small_problem(8, n_planes=3, points=15)
    for method in ("ba-implicit", "ba-explicit"):
        a, b = estimate(data, method), estimate(data, method)
        assert np.array_equal(a.homographies, b.homographies)


def test_constraint_stall_is_reported():
    data = small_problem(9, n_planes=3, points=15)
    al = AugLagOptions(rho_growth=1.0, rho0=1e-12, stall_rounds=1)
    with pytest.raises(ConstraintStall):
        ba_explicit(data, al_options=al)


def test_report_fields():
    data = small_problem(10, n_planes=2, points=10)
    test = synth.sample_correspondences(synth.random_scene(10, n_planes=2), 10, 99)
    rep = estimate(data, "ba-explicit", test=test)
    assert rep.method == "ba-explicit" and rep.outer_rounds >= 1
    assert rep.rms_test is not None and len(rep.rms_test.per_plane) == 2
    assert "history" in rep.settings
    with pytest.raises(ValueError):
        estimate(data, "ransac")


def test_lm_history_monotone_on_bundle_problem():
    prob, x = _problem("latent", 2)
    res = prob.solve(x, LMOptions())
    assert res.converged
    assert np.all(np.diff(res.history) <= 0)
    assert res.history[-1] <= res.history[0]


def test_explicit_falls_back_when_dlt_start_collapses():
    # in this trial the run from DLT drives one homography singular
    from homoset.experiment import ExperimentConfig, random_scene_trial
    train, _ = random_scene_trial(ExperimentConfig(trials=200, sigma=3.0, seed=0), 194)
    rep = ba_explicit(train)
    assert rep.settings["start"] == "ba-implicit"
    assert rep.converged and rep.constraint_residual_max <= 1e-8
    assert rep.cost == pytest.approx(ba_implicit(train).cost, rel=1e-6)


def test_explicit_lifts_omega_near_triple_root():
    # the constrained optimum of this trial has a block at a triple root
    from homoset.experiment import ExperimentConfig, random_scene_trial
    train, _ = random_scene_trial(ExperimentConfig(trials=200, sigma=3.0, seed=0), 110)
    rep = ba_explicit(train)
    assert rep.settings["start"] == "dlt"
    assert rep.converged and rep.constraint_residual_max <= 1e-8
    assert rep.cost == pytest.approx(ba_implicit(train).cost, rel=1e-6)


def test_explicit_final_projection_reaches_pixel_tolerance():
    # normalised constraints settle near 5e-11 while pixel minors sit at 2e-8
    from homoset.experiment import ExperimentConfig, random_scene_trial
    train, _ = random_scene_trial(ExperimentConfig(trials=200, sigma=1.0, seed=0), 4)
    rep = ba_explicit(train)
    assert rep.settings["start"] == "dlt"
    assert rep.converged and rep.constraint_residual_max <= 1e-8
