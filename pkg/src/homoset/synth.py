"""Synthetic two-view scenes with several planes.

A plane ``{X : n.X = d}`` seen by cameras ``P_k = K_k R_k [I | -t_k]``
induces ``H_i = w_i A + b v_i^T`` with

    A = K2 R2 R1^T K1^{-1},   b = K2 R2 (t1 - t2),
    w_i = d_i - n_i.t1,       v_i = K1^{-T} R1 n_i.

Random draws go through ``numpy.random.Generator`` (PCG64) seeded from a
``SeedSequence``; every plane gets its own spawned stream so adding planes
does not perturb earlier ones.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateRegion, DegenerateScene
from .latent import LatentParameters, pi_map

IMAGE_SIZE = (640, 480)
# planes whose pencil with plane 0 is closer than this to a triple root are redrawn
MIN_PENCIL_GAP = 0.2


@dataclass
class CameraModel:
    k: np.ndarray
    r: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.t = np.asarray(self.t, dtype=float)

    def depth(self, points):
        return ((np.atleast_2d(points) - self.t) @ self.r.T)[:, 2]

    def project(self, points):
        cam = (np.atleast_2d(points) - self.t) @ self.r.T
        pix = cam @ self.k.T
        return pix[:, :2] / pix[:, 2:]


@dataclass
class Region:
    """Rectangle ``centre + s*axes[0] + t*axes[1]`` with ``|s| <= size[0]/2``, ``|t| <= size[1]/2``."""

    center: np.ndarray
    axes: np.ndarray
    size: tuple
    grid: tuple = None  # (rows, cols) lattice spanning the rectangle

    def point(self, s, t):
        return self.center + np.outer(s, self.axes[0]) + np.outer(t, self.axes[1])

    def corners(self):
        hs, ht = 0.5 * self.size[0], 0.5 * self.size[1]
        return self.point(np.array([-hs, hs, hs, -hs]), np.array([-ht, -ht, ht, ht]))

    def grid_points(self):
        rows, cols = self.grid
        t = np.linspace(-0.5, 0.5, rows) * self.size[1]
        s = np.linspace(-0.5, 0.5, cols) * self.size[0]
        tt, ss = np.meshgrid(t, s, indexing="ij")
        return self.point(ss.ravel(), tt.ravel())


@dataclass
class PlaneModel:
    n: np.ndarray
    d: float

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=float)
        norm = np.linalg.norm(self.n)
        if not np.isclose(norm, 1.0, atol=1e-12):
            raise ValueError("plane normal must be a unit vector")


@dataclass
class SceneModel:
    cam1: CameraModel
    cam2: CameraModel
    planes: list
    regions: list
    image_size: tuple = IMAGE_SIZE
    test_regions: list = None  # optional held-out lattices, one per plane

    @property
    def n_planes(self):
        return len(self.planes)


@dataclass
class CorrespondenceSet:
    """Per-plane point pairs; ``x1[i]`` and ``x2[i]`` are ``(N_i, 2)`` pixel arrays."""

    x1: list
    x2: list
    clean_x1: list = None
    clean_x2: list = None
    truth: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x1 = [np.asarray(p, dtype=float).reshape(-1, 2) for p in self.x1]
        self.x2 = [np.asarray(p, dtype=float).reshape(-1, 2) for p in self.x2]
        if len(self.x1) != len(self.x2):
            raise ValueError("x1 and x2 must list the same planes")
        for a, b in zip(self.x1, self.x2):
            if a.shape != b.shape:
                raise ValueError("mismatched pair counts within a plane")

    @property
    def n_planes(self):
        return len(self.x1)

    @property
    def counts(self):
        return [len(p) for p in self.x1]

    def clean(self):
        """Noise-free copy, if ground-truth positions are retained."""
        if self.clean_x1 is None:
            return self
        return replace(self, x1=self.clean_x1, x2=self.clean_x2)


def _dehom(y):
    return y[..., :2] / y[..., 2:]


def apply_homography(h, points):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return _dehom(np.column_stack([pts, np.ones(len(pts))]) @ np.asarray(h).T)


def latent_truth(scene):
    """Latent parameters of the scene's homographies."""
    c1, c2 = scene.cam1, scene.cam2
    k1inv = np.linalg.inv(c1.k)
    a = c2.k @ c2.r @ c1.r.T @ k1inv
    b = c2.k @ c2.r @ (c1.t - c2.t)
    w = np.array([p.d - p.n @ c1.t for p in scene.planes])
    v = np.array([k1inv.T @ c1.r @ p.n for p in scene.planes])
    for i, (p, wi) in enumerate(zip(scene.planes, w)):
        if abs(wi) <= 1e-12 * max(1.0, abs(p.d)):
            raise DegenerateScene(f"plane {i} passes through the first camera centre")
    return LatentParameters(a, b, v, w)


def true_homographies(scene):
    """Ground-truth ``(I, 3, 3)`` homography stack."""
    return pi_map(latent_truth(scene))


def rotation_about(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    x = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * x + (1 - np.cos(angle)) * (x @ x)


def _random_rotation(rng, max_angle):
    axis = rng.normal(size=3)
    return rotation_about(axis, rng.uniform(0.0, max_angle))


def look_at(center, target, roll=0.0):
    z = np.asarray(target, dtype=float) - center
    z /= np.linalg.norm(z)
    x = np.cross([0.0, 1.0, 0.0], z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    r = np.vstack([x, y, z])
    return rotation_about([0, 0, 1], roll) @ r


def intrinsics(f, image_size=IMAGE_SIZE):
    w, h = image_size
    return np.array([[f, 0.0, w / 2.0], [0.0, f, h / 2.0], [0.0, 0.0, 1.0]])


def _region_visible(scene, region, margin=5.0):
    corners = region.corners()
    w, h = scene.image_size
    for cam in (scene.cam1, scene.cam2):
        if np.any(cam.depth(corners) <= 0):
            return False
        px = cam.project(corners)
        if np.any(px < margin) or np.any(px[:, 0] > w - margin) or np.any(px[:, 1] > h - margin):
            return False
    return True


def _pencil_gap(h_i, h_0):
    """Relative distance of the simple pencil eigenvalue from the double one."""
    ev = np.linalg.eigvals(np.linalg.solve(h_0, h_i))
    ev = np.real_if_close(ev)
    if np.iscomplexobj(ev):
        return 0.0
    gaps = np.abs(ev[:, None] - ev[None, :])
    np.fill_diagonal(gaps, np.inf)
    pair = np.unravel_index(np.argmin(gaps), gaps.shape)
    double = 0.5 * (ev[pair[0]] + ev[pair[1]])
    simple = ev[3 - pair[0] - pair[1]]
    return abs(simple - double) / abs(double)


def random_scene(seed, n_planes=4, image_size=IMAGE_SIZE, max_tries=1000, max_camera_draws=20):
    """Random scene: ``n_planes`` rectangles visible in two uncalibrated views.

    Focal lengths are uniform in [600, 800] px with the principal point at the
    image centre; the first camera is rotated by at most 30 degrees, the second
    sits 0.5 to 2 units away looking at the same target, and the relative
    rotation is capped at 30 degrees.  Region sides are uniform in [0.3, 1.0].
    Planes are redrawn when nearly through the first camera centre, when the
    normal is nearly parallel to the baseline, when the region leaves either
    image, or when the pencil with plane 0 is nearly degenerate.  If some
    plane cannot be placed the cameras are drawn again.
    """
    ss = np.random.SeedSequence(seed)
    for _ in range(max_camera_draws):
        # each attempt spawns fresh streams; the first matches a single draw
        cam_seq, *plane_seqs = ss.spawn(n_planes + 1)
        try:
            return _draw_scene(cam_seq, plane_seqs, image_size, max_tries)
        except DegenerateScene:
            continue
    raise DegenerateScene(f"no valid scene after {max_camera_draws} camera draws")


def _draw_scene(cam_seq, plane_seqs, image_size, max_tries):
    rng = np.random.default_rng(cam_seq)
    for _ in range(max_tries):
        r1 = _random_rotation(rng, np.radians(30.0))
        t1 = rng.uniform(-0.5, 0.5, size=3)
        target = t1 + rng.uniform(5.0, 7.0) * r1[2]
        offset = rng.normal(size=3)
        offset -= 0.7 * (offset @ r1[2]) * r1[2]
        offset *= rng.uniform(0.5, 2.0) / np.linalg.norm(offset)
        t2 = t1 + offset
        r2 = look_at(t2, target, roll=rng.uniform(-0.15, 0.15))
        rel = r2 @ r1.T
        if np.degrees(np.arccos(np.clip((np.trace(rel) - 1) / 2, -1, 1))) <= 30.0:
            break
    cam1 = CameraModel(intrinsics(rng.uniform(600, 800), image_size), r1, t1)
    cam2 = CameraModel(intrinsics(rng.uniform(600, 800), image_size), r2, t2)
    scene = SceneModel(cam1, cam2, [], [], image_size)
    baseline = (t1 - t2) / np.linalg.norm(t1 - t2)

    h0 = None
    for seq in plane_seqs:
        prng = np.random.default_rng(seq)
        for _ in range(max_tries):
            local = np.array(
                [prng.uniform(-1.2, 1.2), prng.uniform(-0.9, 0.9), prng.uniform(-1.0, 1.0)]
            )
            center = target + r1.T @ local
            tilt = rotation_about(prng.normal(size=3), prng.uniform(0, np.radians(50)))
            n = r1.T @ tilt @ np.array([0.0, 0.0, -1.0])
            d = float(n @ center)
            w = d - n @ t1
            if abs(w) < 0.05 * abs(d) or abs(n @ baseline) > 0.95:
                continue
            u = np.cross(n, prng.normal(size=3))
            u /= np.linalg.norm(u)
            axes = np.vstack([u, np.cross(n, u)])
            region = Region(center, axes, tuple(prng.uniform(0.3, 1.0, size=2)))
            if not _region_visible(scene, region):
                continue
            plane = PlaneModel(n, d)
            trial = SceneModel(cam1, cam2, [plane], [region], image_size)
            h = true_homographies(trial)[0]
            if h0 is not None and _pencil_gap(h, h0) < MIN_PENCIL_GAP:
                continue
            break
        else:
            raise DegenerateScene("could not place a non-degenerate plane")
        if h0 is None:
            h0 = h
        scene.planes.append(plane)
        scene.regions.append(region)
    return scene


def _plane_points(scene, i, n, rng):
    region = scene.regions[i]
    if region.size[0] <= 0 or region.size[1] <= 0:
        raise DegenerateRegion(f"region {i} has zero area")
    out = np.empty((0, 3))
    for _ in range(1000):
        s = rng.uniform(-0.5, 0.5, size=n) * region.size[0]
        t = rng.uniform(-0.5, 0.5, size=n) * region.size[1]
        pts = region.point(s, t)
        ok = (scene.cam1.depth(pts) > 0) & (scene.cam2.depth(pts) > 0)
        out = np.vstack([out, pts[ok]])
        if len(out) >= n:
            return out[:n]
    raise DegenerateRegion(f"region {i} is not in front of both cameras")


def _pairs_from_points(scene, hs, i, pts):
    x1 = scene.cam1.project(pts)
    return x1, apply_homography(hs[i], x1)


def sample_correspondences(scene, n_per_plane, rng_seed):
    """Noise-free pairs sampled uniformly in each plane's region.

    Points behind either camera are redrawn.  The second-view point is the
    exact image of the first under the true homography.
    """
    if n_per_plane < 4:
        raise ValueError("need at least four points per plane")
    hs = true_homographies(scene)
    seqs = np.random.SeedSequence(rng_seed).spawn(scene.n_planes)
    x1, x2 = [], []
    for i, seq in enumerate(seqs):
        pts = _plane_points(scene, i, n_per_plane, np.random.default_rng(seq))
        a, b = _pairs_from_points(scene, hs, i, pts)
        x1.append(a)
        x2.append(b)
    return CorrespondenceSet(x1, x2, [p.copy() for p in x1], [p.copy() for p in x2], truth=hs)


def add_noise(corr, sigma, rng_seed):
    """Add i.i.d. zero-mean Gaussian noise of std ``sigma`` to every coordinate."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    clean1 = corr.clean_x1 if corr.clean_x1 is not None else [p.copy() for p in corr.x1]
    clean2 = corr.clean_x2 if corr.clean_x2 is not None else [p.copy() for p in corr.x2]
    if sigma == 0:
        return replace(corr, x1=[p.copy() for p in corr.x1], x2=[p.copy() for p in corr.x2],
                       clean_x1=clean1, clean_x2=clean2)
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    x1 = [p + sigma * rng.standard_normal(p.shape) for p in corr.x1]
    x2 = [p + sigma * rng.standard_normal(p.shape) for p in corr.x2]
    return replace(corr, x1=x1, x2=x2, clean_x1=clean1, clean_x2=clean2)


def checkerboard_scene(grid=8, spacing=0.1, focal=700.0, baseline=1.0, test_offset=1.2,
                       image_size=IMAGE_SIZE):
    """Two pairs of checkerboards on the faces of a box corner.

    Each face carries a ``grid x grid`` training board next to the corner
    and a held-out board of the same size ``test_offset`` units above it.
    The faces meet at 90 degrees about five units in front of the first
    camera; the second camera is shifted sideways by ``baseline`` and looks
    at the same corner.
    """
    target = np.array([0.0, 0.0, 5.0])
    cam1 = CameraModel(intrinsics(focal, image_size), np.eye(3), np.zeros(3))
    t2 = np.array([baseline, -0.2 * baseline, 0.1])
    cam2 = CameraModel(intrinsics(focal * 1.05, image_size), look_at(t2, target, 0.05), t2)
    extent = spacing * (grid - 1)
    up = np.array([0.0, -1.0, 0.0])  # image y grows downwards
    planes, regions, tests = [], [], []
    for side in (-1.0, 1.0):
        # normals point back toward the cameras, 45 degrees either side
        n = np.array([-side, 0.0, -1.0]) / np.sqrt(2.0)
        along = np.array([1.0, 0.0, -side]) / np.sqrt(2.0) * side
        center = target + along * (0.5 * extent + 0.05) - up * (0.5 * test_offset)
        axes = np.vstack([along, -up])
        planes.append(PlaneModel(n, float(n @ center)))
        regions.append(Region(center, axes, (extent, extent), (grid, grid)))
        tests.append(Region(center + up * test_offset, axes, (extent, extent), (grid, grid)))
    return SceneModel(cam1, cam2, planes, regions, image_size, tests)


def square_placements(scene, square=4, plane=1):
    """All top-left grid positions of a ``square x square`` block on ``plane``."""
    rows, cols = scene.regions[plane].grid
    return [(r, c) for r in range(rows - square + 1) for c in range(cols - square + 1)]


def scarce_plane_scenario(scene, square_origin, square=4):
    """Split grid correspondences into train and test sets.

    Plane 0 trains on the checkerboard-coloured half of its lattice (spanning
    the whole board) and tests on the other half.  Plane 1 trains only on
    the ``square x square`` block at ``square_origin`` and tests on every
    other lattice point.  Lattices in ``scene.test_regions``, when present,
    are added to the test set.  Both returned sets are noise-free.
    """
    hs = true_homographies(scene)
    rows, cols = scene.regions[1].grid
    r0, c0 = square_origin
    if r0 < 0 or c0 < 0 or r0 + square > rows or c0 + square > cols:
        raise ValueError(f"square at {square_origin} does not fit a {rows}x{cols} grid")
    train1, train2, test1, test2 = [], [], [], []
    for i in range(scene.n_planes):
        region = scene.regions[i]
        pts = region.grid_points()
        if np.any(scene.cam1.depth(pts) <= 0) or np.any(scene.cam2.depth(pts) <= 0):
            raise DegenerateScene(f"grid {i} is behind a camera")
        x1, x2 = _pairs_from_points(scene, hs, i, pts)
        rr, cc = np.divmod(np.arange(len(pts)), region.grid[1])
        if i == 1:
            mask = (rr >= r0) & (rr < r0 + square) & (cc >= c0) & (cc < c0 + square)
        else:
            mask = (rr + cc) % 2 == 0
        train1.append(x1[mask])
        train2.append(x2[mask])
        t1, t2 = x1[~mask], x2[~mask]
        if scene.test_regions is not None:
            extra = scene.test_regions[i].grid_points()
            if np.any(scene.cam1.depth(extra) <= 0) or np.any(scene.cam2.depth(extra) <= 0):
                raise DegenerateScene(f"test grid {i} is behind a camera")
            e1, e2 = _pairs_from_points(scene, hs, i, extra)
            t1, t2 = np.vstack([t1, e1]), np.vstack([t2, e2])
        test1.append(t1)
        test2.append(t2)
    train = CorrespondenceSet(train1, train2, [p.copy() for p in train1],
                              [p.copy() for p in train2], truth=hs)
    test = CorrespondenceSet(test1, test2, [p.copy() for p in test1],
                             [p.copy() for p in test2], truth=hs)
    return train, test
