"""Differentiable rewards R(x0) proportional to a measurement log-likelihood.

Three families:

* GaussianMeasurementReward: R = -w/(2 tau^2) ||x - y||^2, the weighted
  log-density of a Gaussian measurement y (constant dropped).
* DistanceConstraintReward: R = -sum_i min(|d_i(x) - target_i|, delta)^2 over
  bead-pair distances, quadratic inside the tolerance and flat (zero
  gradient) outside it.
* MapMSEReward: negative mean squared error between zero-mean unit-variance
  normalized density maps, R = -mean((V(x) - V_obs)^2) = 2 (cc - 1) where cc
  is the Pearson correlation of the normalized maps.

All gradients are exact, including the chain through map normalization, and
are checked against central finite differences in the verification suite.
Coordinates for bead tasks are flat vectors of length 3 * n_beads.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

__all__ = [
    "DegenerateMapError",
    "GaussianMeasurementReward",
    "DistanceConstraintReward",
    "MapGrid",
    "MapMSEReward",
    "render_map",
    "render_map_raw",
    "map_correlation",
    "select_top_k_constraints",
]


class DegenerateMapError(ValueError):
    """Raised when a rendered or supplied map has zero variance."""


@dataclass(frozen=True, eq=False)
class GaussianMeasurementReward:
    """R(x) = -w/(2 tau2) ||x - y||^2; maximum 0 at x = y."""

    y: np.ndarray
    tau2: float = 1.0
    w: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, dtype=np.float64)))
        if self.tau2 <= 0:
            raise ValueError("tau2 must be positive")
        if self.w < 0:
            raise ValueError("weight w must be non-negative")

    def value(self, x: np.ndarray) -> float:
        d = np.asarray(x, dtype=np.float64) - self.y
        return float(-0.5 * self.w / self.tau2 * d @ d)

    def value_and_grad(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        d = x - self.y
        val = float(-0.5 * self.w / self.tau2 * d @ d)
        return val, -(self.w / self.tau2) * d


@dataclass(frozen=True, eq=False)
class DistanceConstraintReward:
    """Clipped quadratic penalty on bead-pair distance deviations.

    R(x) = -sum_i min(|d_i - target_i|, delta)^2 with d_i = ||x_i - x_j||.
    The gradient is zero on the clipped plateau (|deviation| >= delta) and at
    coincident beads (d_i = 0), both measure-zero boundary choices.
    """

    pairs: tuple
    targets: np.ndarray
    delta: float

    def __post_init__(self):
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        targets = np.asarray(self.targets, dtype=np.float64).ravel()
        if len(pairs) != targets.size:
            raise ValueError("pairs and targets length mismatch")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if any(i == j or i < 0 or j < 0 for i, j in pairs):
            raise ValueError("pairs must index distinct non-negative beads")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "targets", targets)

    @property
    def K(self) -> int:
        return len(self.pairs)

    def distances(self, x: np.ndarray) -> np.ndarray:
        pts = np.asarray(x, dtype=np.float64).reshape(-1, 3)
        ii = [i for i, _ in self.pairs]
        jj = [j for _, j in self.pairs]
        return np.linalg.norm(pts[ii] - pts[jj], axis=1)

    def count_satisfied(self, x: np.ndarray) -> int:
        """Constraints with |d - target| <= delta (inside the tolerance)."""
        dev = np.abs(self.distances(x) - self.targets)
        return int(np.sum(dev <= self.delta))

    def value(self, x: np.ndarray) -> float:
        dev = np.abs(self.distances(x) - self.targets)
        return float(-np.sum(np.minimum(dev, self.delta) ** 2))

    def value_and_grad(self, x: np.ndarray):
        pts = np.asarray(x, dtype=np.float64).reshape(-1, 3)
        grad = np.zeros_like(pts)
        val = 0.0
        for (i, j), target in zip(self.pairs, self.targets):
            bond = pts[i] - pts[j]
            d = float(np.linalg.norm(bond))
            dev = d - target
            clipped = min(abs(dev), self.delta)
            val -= clipped**2
            if abs(dev) >= self.delta or d == 0.0:
                continue  # plateau or undefined direction: zero gradient
            g_d = -2.0 * dev  # dR/dd
            unit = bond / d
            grad[i] += g_d * unit
            grad[j] -= g_d * unit
        return val, grad.ravel()


@dataclass(frozen=True, eq=False)
class MapGrid:
    """Regular voxel grid: shape counts, origin corner, isotropic spacing (A)."""

    shape: tuple
    origin: np.ndarray
    spacing: float

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) != 3 or any(n < 1 for n in shape):
            raise ValueError("grid shape must be three positive counts")
        if self.spacing <= 0:
            raise ValueError("voxel spacing must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(
            self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(3)
        )

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.shape
        return nx * ny * nz

    def voxel_centers(self) -> np.ndarray:
        """All voxel centers as an (n_voxels, 3) array, x fastest last."""
        axes = [self.origin[a] + self.spacing * np.arange(self.shape[a]) for a in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def to_manifest(self) -> dict:
        return {"shape": list(self.shape), "origin": self.origin.tolist(), "spacing": self.spacing}


def render_map_raw(x: np.ndarray, grid: MapGrid, atom_width: float) -> np.ndarray:
    """Sum of isotropic Gaussian splats evaluated at voxel centers (no normalization)."""
    if atom_width <= 0:
        raise ValueError("atom_width must be positive")
    pts = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    centers = grid.voxel_centers()  # (M, 3)
    d2 = ((centers[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)  # (M, n_beads)
    return np.exp(-d2 / (2.0 * atom_width**2)).sum(axis=1)


def _normalize_map(v_raw: np.ndarray):
    mu = v_raw.mean()
    sd = v_raw.std()
    if sd < 1e-300 or not np.isfinite(sd):
        raise DegenerateMapError("rendered map has zero variance")
    return (v_raw - mu) / sd, mu, sd


def render_map(x: np.ndarray, grid: MapGrid, atom_width: float) -> np.ndarray:
    """Splat beads onto the grid and normalize to zero mean, unit variance."""
    return _normalize_map(render_map_raw(x, grid, atom_width))[0]


def map_correlation(v_a: np.ndarray, v_b: np.ndarray) -> float:
    """Pearson correlation over voxels of two same-shape maps."""
    a = np.asarray(v_a, dtype=np.float64).ravel()
    b = np.asarray(v_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("maps must have the same shape")
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-300 or nb < 1e-300:
        raise DegenerateMapError("map has zero variance")
    return float((a @ b) / (na * nb))


@dataclass(frozen=True, eq=False)
class MapMSEReward:
    """R(x) = -mean((V(x) - V_obs)^2) = 2 (cc - 1) on normalized maps.

    V(x) is the normalized rendering of x on the stored grid; V_obs must
    already be zero-mean unit-variance on the same grid. R lies in [-4, 0]
    and is 0 exactly when the rendered map equals the target.
    """

    grid: MapGrid
    v_obs: np.ndarray
    atom_width: float = 1.5

    def __post_init__(self):
        v = np.asarray(self.v_obs, dtype=np.float64).ravel()
        if v.size != self.grid.n_voxels:
            raise ValueError("target map size does not match grid")
        if abs(v.mean()) > 1e-8 or abs(v.std() - 1.0) > 1e-8:
            raise ValueError("target map must be normalized to zero mean, unit variance")
        object.__setattr__(self, "v_obs", v)

    @classmethod
    def from_state(cls, x_target: np.ndarray, grid: MapGrid, atom_width: float = 1.5):
        return cls(grid=grid, v_obs=render_map(x_target, grid, atom_width), atom_width=atom_width)

    def correlation(self, x: np.ndarray) -> float:
        return map_correlation(render_map_raw(np.asarray(x), self.grid, self.atom_width), self.v_obs)

    def value(self, x: np.ndarray) -> float:
        v = render_map(np.asarray(x), self.grid, self.atom_width)
        return float(-np.mean((v - self.v_obs) ** 2))

    def value_and_grad(self, x: np.ndarray):
        pts = np.asarray(x, dtype=np.float64).reshape(-1, 3)
        centers = self.grid.voxel_centers()
        diff = centers[:, None, :] - pts[None, :, :]  # (M, n_beads, 3)
        splat = np.exp(-(diff**2).sum(axis=2) / (2.0 * self.atom_width**2))
        v_raw = splat.sum(axis=1)
        v, _, sd = _normalize_map(v_raw)
        M = v.size
        cc = float(v @ self.v_obs) / M
        val = 2.0 * (cc - 1.0)
        # dcc/dV_raw = (V_obs - cc * V) / (M * sd): V_obs is zero-mean, so the
        # mean-shift term vanishes and only the std chain survives.
        g_vraw = 2.0 * (self.v_obs - cc * v) / (M * sd)
        # chain through the splats: dV_raw[m]/d pts[b] = splat[m,b] * (c_m - p_b)/aw^2
        grad_pts = np.einsum("m,mb,mbi->bi", g_vraw, splat, diff) / self.atom_width**2
        return val, grad_pts.ravel()


def select_top_k_constraints(
    x_prior: np.ndarray, x_target: np.ndarray, K: int
) -> tuple:
    """Pick the K bead pairs (i < j) with the largest |d_prior - d_target|.

    Ties break lexicographically on (i, j). Targets are the distances in
    x_target. Returns (pairs, targets).
    """
    a = np.asarray(x_prior, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(x_target, dtype=np.float64).reshape(-1, 3)
    if a.shape != b.shape:
        raise ValueError("states must have the same bead count")
    all_pairs = list(combinations(range(a.shape[0]), 2))
    if K > len(all_pairs):
        raise ValueError("K exceeds the number of distinct pairs")
    rows = []
    for i, j in all_pairs:
        dp = float(np.linalg.norm(a[i] - a[j]))
        dt = float(np.linalg.norm(b[i] - b[j]))
        rows.append((-abs(dp - dt), i, j, dt))
    rows.sort()
    chosen = rows[:K]
    pairs = tuple((i, j) for _, i, j, _ in chosen)
    targets = np.array([t for _, _, _, t in chosen])
    return pairs, targets
