import numpy as np
import pytest

from homoset.latent import LatentParameters, pi_map


def random_latent(rng, n_planes, w_range=(0.5, 2.0)):
    """Latent parameters with well-conditioned outputs."""
    while True:
        a = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
        b = rng.standard_normal(3)
        v = 0.5 * rng.standard_normal((n_planes, 3))
        w = rng.uniform(*w_range, size=n_planes) * rng.choice([-1.0, 1.0], size=n_planes)
        eta = LatentParameters(a, b, v, w)
        hs = pi_map(eta, check=False)
        conds = [np.linalg.cond(h) for h in hs]
        if max(conds) < 1e3 and np.linalg.cond(a) < 1e2:
            return eta


def random_consistent(rng, n_planes):
    return pi_map(random_latent(rng, n_planes))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _stencil(fn, x, k, h):
    e = np.zeros_like(x)
    e[k] = h
    return (8 * (fn(x + e) - fn(x - e)) - (fn(x + 2 * e) - fn(x - 2 * e))) / (12 * h)


def fd_jacobian(fn, x, h=None, steps=(1e-3, 2.5e-4, 6.25e-5, 1.6e-5, 4e-6, 1e-6, 2.5e-7)):
    """Fourth-order central-difference Jacobian of a vector function.

    With a fixed ``h`` every column uses that step.  Otherwise each column
    walks down ``steps`` and keeps the estimate that changes least at the
    next smaller step, which balances truncation against round-off without
    reference to any analytic derivative.
    """
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(len(x)):
        if h is not None:
            cols.append(_stencil(fn, x, k, h))
            continue
        ests = [_stencil(fn, x, k, s) for s in steps]
        change = [np.max(np.abs(a - b)) for a, b in zip(ests, ests[1:])]
        cols.append(ests[int(np.argmin(change))])
    return np.column_stack(cols)


def small_problem(seed=0, n_planes=3, points=6, sigma=1.0):
    """Noisy data for a small random scene, with the scene truth attached."""
    from homoset import synth

    scene = synth.random_scene(seed, n_planes=n_planes)
    clean = synth.sample_correspondences(scene, points, seed + 1)
    return synth.add_noise(clean, sigma, seed + 2)
