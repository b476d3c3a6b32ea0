"""Navigation maps and trajectory planning on the camera-height plane.

The camera sits at the world origin, ``camera_height`` metres above the
floor plane ``y = -camera_height``.  Planning happens in 2D on the (x, z)
plane; the occupancy grid stores rows along z and columns along x, with
cell boundaries aligned to integer multiples of ``cell_size`` so that
``origin_cell`` alone fixes the world-to-grid mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .lift import Panorama
from .rasterize import CameraPose
from .sphere import pixel_to_dir

DEFAULT_CAMERA_HEIGHT = 1.6
DEFAULT_CLEARANCE = 0.3
DEFAULT_CELL_SIZE = 0.05
DEFAULT_MAX_RANGE = 10.0
DEFAULT_SPEED = 1.0
DEFAULT_FPS = 10.0
DEFAULT_ANCHOR_SPACING = 0.5

# Obstruction band: points this far above the floor block movement.
# Below it is floor clutter we can step over, above it is ceiling.
OBSTACLE_MIN_HEIGHT = 0.2
OBSTACLE_MAX_HEIGHT = 1.8


@dataclass
class NavMap:
    """Boolean occupancy grid; True marks navigable cells."""

    grid: np.ndarray
    cell_size: float
    origin_cell: tuple[int, int]

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=bool)
        if self.grid.ndim != 2 or self.grid.size == 0:
            raise ValueError("nav grid must be a nonempty 2D array")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        oi, oj = self.origin_cell
        if not (0 <= oi < self.grid.shape[0] and 0 <= oj < self.grid.shape[1]):
            raise ValueError("origin cell outside grid")
        if not self.grid[oi, oj]:
            raise ValueError("origin blocked")

    def cell_of(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Grid indices of (x, z) points; may fall outside the grid."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        oi, oj = self.origin_cell
        i = np.floor(pts[:, 1] / self.cell_size).astype(int) + oi
        j = np.floor(pts[:, 0] / self.cell_size).astype(int) + oj
        return i, j

    def cell_center(self, i, j) -> np.ndarray:
        """World (x, z) of cell centers."""
        oi, oj = self.origin_cell
        x = (np.asarray(j) - oj + 0.5) * self.cell_size
        z = (np.asarray(i) - oi + 0.5) * self.cell_size
        return np.stack([x, z], axis=-1)

    def is_navigable(self, points: np.ndarray) -> np.ndarray:
        """True for (x, z) points in navigable cells; False off-grid."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        i, j = self.cell_of(pts)
        h, w = self.grid.shape
        ok = (i >= 0) & (i < h) & (j >= 0) & (j < w)
        out = np.zeros(len(pts), dtype=bool)
        out[ok] = self.grid[i[ok], j[ok]]
        return out


@dataclass
class Trajectory:
    """Linear path on the camera-height plane."""

    start: np.ndarray
    end: np.ndarray
    speed: float = DEFAULT_SPEED
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float).reshape(2)
        self.end = np.asarray(self.end, dtype=float).reshape(2)
        if not (np.all(np.isfinite(self.start)) and np.all(np.isfinite(self.end))):
            raise ValueError("trajectory endpoints must be finite")
        if not self.speed > 0:
            raise ValueError("speed must be positive")
        if not self.fps > 0:
            raise ValueError("fps must be positive")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))


def _segment_samples(start: np.ndarray, end: np.ndarray, step: float) -> np.ndarray:
    """Points along [start, end] at ``step`` spacing, endpoints included."""
    length = float(np.linalg.norm(end - start))
    n = max(int(math.ceil(length / step)), 1)
    t = np.linspace(0.0, 1.0, n + 1)
    return start[None, :] + t[:, None] * (end - start)[None, :]


def segment_navigable(nav: NavMap, start, end) -> bool:
    """Whether every sample at half-cell spacing along the segment is navigable."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    pts = _segment_samples(start, end, 0.5 * nav.cell_size)
    return bool(np.all(nav.is_navigable(pts)))


def build_nav_map(
    pano: Panorama,
    camera_height: float = DEFAULT_CAMERA_HEIGHT,
    clearance: float = DEFAULT_CLEARANCE,
    cell_size: float = DEFAULT_CELL_SIZE,
) -> NavMap:
    """Occupancy grid from unprojected panoramic depth.

    A cell is navigable when it lies inside the convex hull of the observed
    geometry footprint, holds no obstruction point (height 0.2..1.8 m above
    the floor), has no obstructed cell within ``clearance``, and is connected
    to the origin.
    """
    if pano.depth is None:
        raise ValueError("panorama has no depth channel")
    if not camera_height > 0:
        raise ValueError("camera_height must be positive")
    if not cell_size > 0:
        raise ValueError("cell_size must be positive")
    if clearance < 0:
        raise ValueError("clearance must be non-negative")

    h, w = pano.grid.shape
    ys, xs = np.meshgrid(np.arange(h) + 0.5, np.arange(w) + 0.5, indexing="ij")
    dirs = pixel_to_dir(ys.ravel(), xs.ravel(), pano.grid)
    depth = pano.depth.ravel()
    valid = np.isfinite(depth) & (depth > 0)
    if not np.any(valid):
        raise ValueError("panorama depth is empty")
    pts = depth[valid, None] * dirs[valid]

    foot = pts[:, [0, 2]]
    height_above_floor = pts[:, 1] + camera_height
    obstacle = foot[(height_above_floor >= OBSTACLE_MIN_HEIGHT)
                    & (height_above_floor <= OBSTACLE_MAX_HEIGHT)]

    # Grid bounds snapped to cell multiples, always covering the origin.
    x_lo = min(math.floor(foot[:, 0].min() / cell_size), -1)
    x_hi = max(math.ceil(foot[:, 0].max() / cell_size), 1)
    z_lo = min(math.floor(foot[:, 1].min() / cell_size), -1)
    z_hi = max(math.ceil(foot[:, 1].max() / cell_size), 1)
    n_rows = z_hi - z_lo
    n_cols = x_hi - x_lo
    origin_cell = (-z_lo, -x_lo)

    centers_x = (np.arange(n_cols) + x_lo + 0.5) * cell_size
    centers_z = (np.arange(n_rows) + z_lo + 0.5) * cell_size
    cz, cx = np.meshgrid(centers_z, centers_x, indexing="ij")
    centers = np.stack([cx.ravel(), cz.ravel()], axis=1)

    try:
        hull = ConvexHull(foot)
        eqs = hull.equations
        inside = np.all(centers @ eqs[:, :2].T + eqs[:, 2] <= 1e-9, axis=1)
    except QhullError:
        inside = np.zeros(len(centers), dtype=bool)
    in_hull = inside.reshape(n_rows, n_cols)

    obstructed = np.zeros((n_rows, n_cols), dtype=bool)
    if len(obstacle):
        oi = np.floor(obstacle[:, 1] / cell_size).astype(int) - z_lo
        oj = np.floor(obstacle[:, 0] / cell_size).astype(int) - x_lo
        keep = (oi >= 0) & (oi < n_rows) & (oj >= 0) & (oj < n_cols)
        obstructed[oi[keep], oj[keep]] = True

    if obstructed.any():
        dist = ndimage.distance_transform_edt(~obstructed, sampling=cell_size)
        clear = dist > clearance
    else:
        clear = np.ones_like(obstructed)
    navigable = in_hull & ~obstructed & clear

    labels, _ = ndimage.label(navigable)
    origin_label = labels[origin_cell]
    if origin_label == 0:
        raise ValueError("origin blocked")
    navigable = labels == origin_label
    return NavMap(grid=navigable, cell_size=cell_size, origin_cell=origin_cell)


def ray_range(nav: NavMap, angle: float, max_range: float = DEFAULT_MAX_RANGE) -> float:
    """Farthest distance along ``angle`` with all half-cell samples navigable.

    Angles are measured on the (x, z) plane: direction (cos a, sin a).
    """
    step = 0.5 * nav.cell_size
    n = int(math.floor(max_range / step))
    if n == 0:
        return 0.0
    t = np.arange(1, n + 1) * step
    d = np.array([math.cos(angle), math.sin(angle)])
    pts = t[:, None] * d[None, :]
    ok = nav.is_navigable(pts)
    bad = np.flatnonzero(~ok)
    good = n if len(bad) == 0 else int(bad[0])
    return good * step


def plan_radial(
    nav: NavMap,
    tau: int,
    n_offsets: int = 32,
    max_range: float = DEFAULT_MAX_RANGE,
    speed: float = DEFAULT_SPEED,
    fps: float = DEFAULT_FPS,
) -> tuple[list[Trajectory], float]:
    """Pick the global rotation maximizing total reach of tau radial rays.

    Candidate offsets step by 2*pi/(tau*n_offsets); ties take the smallest
    offset.  Returns the tau trajectories and the chosen offset.
    """
    if tau < 1:
        raise ValueError("tau must be at least 1")
    if n_offsets < 1:
        raise ValueError("n_offsets must be at least 1")
    delta = 2.0 * math.pi / (tau * n_offsets)
    sector = 2.0 * math.pi / tau

    best_total = -1.0
    best_psi = 0.0
    best_ranges: list[float] = []
    for k in range(n_offsets):
        psi = k * delta
        ranges = [ray_range(nav, psi + i * sector, max_range) for i in range(tau)]
        total = sum(ranges)
        if total > best_total:
            best_total = total
            best_psi = psi
            best_ranges = ranges
    if best_total <= 0.0:
        raise ValueError("no navigable range in any direction")

    origin = np.zeros(2)
    trajectories = []
    for i, r in enumerate(best_ranges):
        a = best_psi + i * sector
        end = origin + r * np.array([math.cos(a), math.sin(a)])
        trajectories.append(Trajectory(start=origin, end=end, speed=speed, fps=fps))
    return trajectories, best_psi


def anchor_points(nav: NavMap, spacing: float = DEFAULT_ANCHOR_SPACING) -> np.ndarray:
    """Navigable points of the ``spacing`` lattice, in lexicographic order."""
    if not spacing > 0:
        raise ValueError("anchor spacing must be positive")
    h, w = nav.grid.shape
    oi, oj = nav.origin_cell
    x_lo, x_hi = (-oj) * nav.cell_size, (w - oj) * nav.cell_size
    z_lo, z_hi = (-oi) * nav.cell_size, (h - oi) * nav.cell_size
    ax = np.arange(math.ceil(x_lo / spacing), math.floor(x_hi / spacing) + 1) * spacing
    az = np.arange(math.ceil(z_lo / spacing), math.floor(z_hi / spacing) + 1) * spacing
    gx, gz = np.meshgrid(ax, az, indexing="ij")
    pts = np.stack([gx.ravel(), gz.ravel()], axis=1)
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    return pts[nav.is_navigable(pts)]


def longest_linear_segment(
    nav: NavMap,
    anchor_spacing: float = DEFAULT_ANCHOR_SPACING,
    speed: float = DEFAULT_SPEED,
    fps: float = DEFAULT_FPS,
) -> Trajectory:
    """Longest fully navigable segment between anchor-lattice points.

    Ties break to the lexicographically smallest (start, end) pair.  With no
    valid pair the result is a zero-length trajectory at the origin.
    """
    anchors = anchor_points(nav, anchor_spacing)
    n = len(anchors)
    if n >= 2:
        ii, jj = np.triu_indices(n, k=1)
        d2 = np.sum((anchors[ii] - anchors[jj]) ** 2, axis=1)
        # Candidates by descending length; lexicographic pair order breaks
        # ties because anchors are already sorted.
        order = np.lexsort((jj, ii, -d2))
        for idx in order:
            a, b = anchors[ii[idx]], anchors[jj[idx]]
            if segment_navigable(nav, a, b):
                return Trajectory(start=a, end=b, speed=speed, fps=fps)
    origin = np.zeros(2)
    return Trajectory(start=origin, end=origin, speed=speed, fps=fps)


def sample_navigable_points(nav: NavMap, count: int, seed: int) -> np.ndarray:
    """Seeded draw of up to ``count`` distinct non-origin navigable cell centers."""
    if count < 0:
        raise ValueError("count must be non-negative")
    cells = np.argwhere(nav.grid)
    keep = ~np.all(cells == np.array(nav.origin_cell), axis=1)
    cells = cells[keep]
    rng = np.random.default_rng(seed)
    take = min(count, len(cells))
    if take == 0:
        return np.zeros((0, 2))
    chosen = rng.choice(len(cells), size=take, replace=False)
    return nav.cell_center(cells[chosen, 0], cells[chosen, 1])


def fps_eval_cameras(
    nav: NavMap,
    n_total: int = 5,
    pool_size: int = 512,
    seed: int = 0,
) -> np.ndarray:
    """Origin plus farthest-point-sampled navigable locations.

    Greedy FPS over a seeded Monte Carlo pool, initialized at the origin.
    """
    if n_total < 1:
        raise ValueError("n_total must be at least 1")
    pool = sample_navigable_points(nav, pool_size, seed)
    if len(pool) + 1 < n_total:
        raise ValueError(
            f"navigable pool ({len(pool)}) smaller than requested cameras ({n_total})"
        )
    selected = [np.zeros(2)]
    min_dist = np.linalg.norm(pool - selected[0], axis=1)
    for _ in range(n_total - 1):
        pick = int(np.argmax(min_dist))
        selected.append(pool[pick])
        min_dist = np.minimum(min_dist, np.linalg.norm(pool - pool[pick], axis=1))
    return np.stack(selected)


def trajectory_to_poses(traj: Trajectory, n_frames: int) -> list[CameraPose]:
    """Constant-speed poses along the trajectory, clamped at its end.

    Orientation stays world-aligned; frame 0 sits exactly at the start.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    length = traj.length
    step = traj.speed / traj.fps
    if length > 0:
        direction = (traj.end - traj.start) / length
    else:
        direction = np.zeros(2)
    identity = np.array([1.0, 0.0, 0.0, 0.0])
    poses = []
    for k in range(n_frames):
        t = min(k * step, length)
        p2 = traj.start + t * direction
        poses.append(CameraPose(position=np.array([p2[0], 0.0, p2[1]]),
                                orientation=identity.copy()))
    return poses
