"""Reproducible Gaussian point clouds in R^d with entries ~ N(0, 1/d)."""
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionTooSmall, ShapeMismatch

_MASK64 = (1 << 64) - 1


def derive_trial_seed(master_seed, trial_index):
    """splitmix64 finalizer over ``master_seed ^ trial_index``.

    The finalizer is a bijection on 64-bit words, so distinct inputs never
    collide for a fixed master seed.
    """
    if trial_index < 0:
        raise ValueError("trial_index must be non-negative")
    z = (int(master_seed) ^ int(trial_index)) & _MASK64
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _rng(seed):
    # PCG64 + numpy's ziggurat normal sampler: frozen as the cloud contract
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """``n`` points in R^d, each factored as ``points[i] = norms[i] * directions[i]``."""

    d: int
    n: int
    seed: int
    points: np.ndarray = field(repr=False)
    norms: np.ndarray = field(init=False, repr=False)
    directions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2 or pts.shape != (self.n, self.d):
            raise ShapeMismatch(f"points must have shape ({self.n}, {self.d}), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(norms <= 0.0):
            raise ValueError("every point must be nonzero")
        dirs = pts / norms[:, None]
        for a in (pts, norms, dirs):
            a.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "norms", norms)
        object.__setattr__(self, "directions", dirs)
        self._check_factorization()

    def _check_factorization(self):
        unit_err = np.abs(np.linalg.norm(self.directions, axis=1) - 1.0)
        recon_err = np.abs(self.points - self.norms[:, None] * self.directions)
        if unit_err.max() > 1e-12 or np.any(recon_err > 1e-12 * self.norms[:, None]):
            raise ValueError("point cloud factorization is inconsistent")

    @classmethod
    def from_points(cls, points, seed=0):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2:
            raise ShapeMismatch("points must be a 2-d array")
        return cls(d=points.shape[1], n=points.shape[0], seed=int(seed), points=points)

    def scaled(self, c):
        return PointCloud(self.d, self.n, self.seed, c * self.points)

    def to_json(self):
        return {
            "d": self.d,
            "n": self.n,
            "seed": int(self.seed),
            "points": self.points.tolist(),
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def from_json(cls, doc):
        try:
            d, n, seed, points = int(doc["d"]), int(doc["n"]), int(doc["seed"]), doc["points"]
        except KeyError as exc:
            raise ValueError(f"point cloud document is missing field {exc.args[0]!r}") from None
        return cls(d=d, n=n, seed=seed, points=np.asarray(points, dtype=np.float64).reshape(n, d))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def sample_gaussian(d, n, rng):
    """Rows of N(0, I_d / d) draws, resampling any exact zero row."""
    scale = np.sqrt(1.0 / d)
    points = rng.normal(0.0, scale, size=(n, d))
    zero = np.flatnonzero(~np.any(points, axis=1))
    while zero.size:
        points[zero] = rng.normal(0.0, scale, size=(zero.size, d))
        zero = np.flatnonzero(~np.any(points, axis=1))
    return points


def sample_cloud(d, n, seed):
    """Deterministic point cloud for ``(d, n, seed)``."""
    if d < 2:
        raise DimensionTooSmall(f"d must be at least 2, got {d}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    points = sample_gaussian(d, n, _rng(seed))
    return PointCloud(d=int(d), n=int(n), seed=int(seed), points=points)


def sample_directions(d, n, rng):
    """Uniform directions on the unit sphere via normalized Gaussians."""
    g = sample_gaussian(d, n, rng)
    return g / np.linalg.norm(g, axis=1)[:, None]
