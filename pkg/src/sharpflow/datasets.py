"""Synthetic 2D target distributions and the standard-normal base.

Three targets: a branched manifold (Y-shaped tree of three quadratic Bezier
arcs, sampled uniformly in arc length), a rotated grid of isotropic
Gaussians, and an Archimedean spiral.  All are scaled to sit within roughly
[-2, 2]^2 so a N(0, I) base reaches them in one unit of flow time.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

DIM = 2


def sample_base(n, seed=0, rng=None):
    """n i.i.d. draws from the standard normal base distribution."""
    if rng is None:
        rng = np.random.default_rng(seed)
    return rng.standard_normal((int(n), DIM))


def _rotation(deg):
    th = np.deg2rad(deg)
    c, s = np.cos(th), np.sin(th)
    return np.array([[c, -s], [s, c]])


def _rotated_grid(n, rng, k=5, noise=0.05, rotation_deg=30.0, extent=1.5):
    axis = np.linspace(-extent, extent, k)
    gx, gy = np.meshgrid(axis, axis)
    centers = np.column_stack([gx.ravel(), gy.ravel()]) @ _rotation(rotation_deg).T
    idx = rng.integers(0, len(centers), size=n)
    pts = centers[idx]
    if noise > 0:
        pts = pts + rng.normal(0.0, noise, size=(n, DIM))
    return pts


def _bezier(p0, p1, p2, tau):
    tau = tau[:, None]
    return (1 - tau) ** 2 * p0 + 2 * (1 - tau) * tau * p1 + tau**2 * p2


_BRANCH_ARCS = [
    # trunk, then left and right branches of the Y
    (np.array([0.0, -1.8]), np.array([0.25, -0.9]), np.array([0.0, 0.0])),
    (np.array([0.0, 0.0]), np.array([-0.85, 0.45]), np.array([-1.4, 1.6])),
    (np.array([0.0, 0.0]), np.array([0.8, 0.4]), np.array([1.3, 1.5])),
]
_ARC_RESOLUTION = 1024


def _arc_tables():
    tables = []
    tau = np.linspace(0.0, 1.0, _ARC_RESOLUTION + 1)
    for p0, p1, p2 in _BRANCH_ARCS:
        pts = _bezier(p0, p1, p2, tau)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        tables.append((tau, cum))
    return tables


_ARC_TABLES = _arc_tables()
_ARC_LENGTHS = np.array([tab[1][-1] for tab in _ARC_TABLES])


def _branched_manifold(n, rng, noise=0.02):
    total = _ARC_LENGTHS.sum()
    u = rng.uniform(0.0, total, size=n)
    bounds = np.concatenate([[0.0], np.cumsum(_ARC_LENGTHS)])
    arc_idx = np.clip(np.searchsorted(bounds, u, side="right") - 1, 0,
                      len(_BRANCH_ARCS) - 1)
    pts = np.empty((n, DIM))
    for a, (tau_grid, cum) in enumerate(_ARC_TABLES):
        mask = arc_idx == a
        if not mask.any():
            continue
        local = u[mask] - bounds[a]
        tau = np.interp(local, cum, tau_grid)
        pts[mask] = _bezier(*_BRANCH_ARCS[a], tau)
    if noise > 0:
        pts = pts + rng.normal(0.0, noise, size=(n, DIM))
    return pts


SPIRAL_TURNS = 2.0
SPIRAL_MAX_RADIUS = 1.8


def spiral_coefficient(turns=SPIRAL_TURNS, max_radius=SPIRAL_MAX_RADIUS):
    """Coefficient a of the polar equation r = a * theta."""
    return max_radius / (2.0 * np.pi * turns)


def _spiral(n, rng, noise=0.02, turns=SPIRAL_TURNS, max_radius=SPIRAL_MAX_RADIUS):
    a = spiral_coefficient(turns, max_radius)
    theta_max = 2.0 * np.pi * turns
    grid = np.linspace(0.0, theta_max, 4096)
    speed = a * np.sqrt(1.0 + grid**2)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(grid))])
    u = rng.uniform(0.0, cum[-1], size=n)
    theta = np.interp(u, cum, grid)
    pts = (a * theta)[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    if noise > 0:
        pts = pts + rng.normal(0.0, noise, size=(n, DIM))
    return pts


_GENERATORS = {
    "rotated-grid": _rotated_grid,
    "branched-manifold": _branched_manifold,
    "spiral": _spiral,
}


@dataclass(frozen=True)
class DatasetSpec:
    """Named 2D target with generator parameters and a reproducibility seed."""

    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.name not in _GENERATORS:
            raise ConfigurationError(
                f"unknown dataset {self.name!r}; choose from {sorted(_GENERATORS)}")

    def sample(self, n, rng=None):
        return sample(self, n, rng=rng)


def sample(spec, n, rng=None):
    """n i.i.d. target draws; deterministic under spec.seed when rng is None."""
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    return _GENERATORS[spec.name](int(n), rng, **spec.params)


def to_csv(points, path):
    """Write an (n, 2) cloud as CSV with header x,y."""
    pts = np.asarray(points, dtype=float)
    np.savetxt(path, pts, delimiter=",", header="x,y", comments="",
               fmt="%.17g")


def from_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
