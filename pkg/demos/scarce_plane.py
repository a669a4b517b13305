"""One plane seen well, one plane seen through a keyhole.

Two checkerboards on the faces of a box corner.  The first board is fully
matched; the second is matched only on a 4x4 block of its corners.  Fitting
the second homography on its own extrapolates badly away from the block,
while the consistent estimators borrow the camera geometry from the first
plane.  The sweep moves the block over every position on the board.

Run:  python3 demos/scarce_plane.py
"""

import numpy as np

from homoset import synth
from homoset.estimation import estimate

scene = synth.checkerboard_scene()
rng_seed = 0
ratios = []
print(" block   ba plane-2   explicit plane-2   ratio")
for k, origin in enumerate(synth.square_placements(scene)):
    train, test = synth.scarce_plane_scenario(scene, origin)
    train = synth.add_noise(train, 1.0, rng_seed + k)
    free = estimate(train, "ba", test=test).rms_test.per_plane[1]
    cons = estimate(train, "ba-explicit", test=test).rms_test.per_plane[1]
    ratios.append(free / cons)
    print(f" {origin}   {free:10.3f}   {cons:16.3f}   {free / cons:6.2f}")

ratios = np.array(ratios)
print(f"\nexplicit better in {np.mean(ratios > 1):.0%} of placements, "
      f"median improvement {np.median(ratios):.2f}x")
