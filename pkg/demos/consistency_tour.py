"""How far is a set of homographies from being jointly realisable?

Homographies induced by several planes between the same two views share
structure: every one of them is ``w_i A + b v_i^T`` for a common ``A`` and
``b``.  This script builds such a set from a synthetic scene, checks the
incompatibility measure, then perturbs one matrix and watches it grow.

Run:  python3 demos/consistency_tour.py
"""

import numpy as np

from homoset import synth
from homoset.consistency import psi
from homoset.latent import factorize, pi_map
from homoset.pencil import omega

scene = synth.random_scene(seed=7, n_planes=3)
hs = synth.true_homographies(scene)
eta = synth.latent_truth(scene)

# the relative scale of two plane homographies is a double eigenvalue
for i in (1, 2):
    print(f"plane {i}: omega = {omega(hs[i], hs[0]):+.10f}   w_i / w_0 = {eta.w[i] / eta.w[0]:+.10f}")

unit = hs / np.linalg.norm(hs, axis=(1, 2), keepdims=True)
print(f"\npsi of the scene's homographies: {psi(unit).psi:.3e}")

# perturb the last matrix and report the largest minors
rng = np.random.default_rng(0)
for eps in (1e-8, 1e-6, 1e-4, 1e-2):
    bent = unit.copy()
    bent[2] = bent[2] + eps * rng.standard_normal((3, 3))
    rep = psi(bent)
    print(f"noise {eps:.0e}: psi = {rep.psi:.3e}, max |phi| = {rep.max_abs_phi:.3e}")

rep = psi(bent)
print("\nlargest normalised minors (rows a, b; columns c, d):")
for a, b, c, d, v in rep.top(4):
    print(f"  ({a}, {b}; {c:2d}, {d:2d})  {v:+.3e}")

# a consistent set factorises back into latent variables
back = factorize(unit)
print(f"\nrecomposition error after factorising: {np.max(np.abs(pi_map(back) - unit)):.2e}")
