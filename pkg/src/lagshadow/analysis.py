"""Energy traces, level-set agreement, contour grids and divergence times."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .fields import LagrangianField, join

GRAD_FLOOR = 1e-12


class HamiltonianField:
    """Energy ``qdot . dL/dqdot - L`` of a Lagrangian, as a field on TQ.

    The gradient is assembled from the Lagrangian's own first and second
    derivatives: ``dH/dq = M^T qdot - grad_q L`` and ``dH/dqdot = W qdot``.
    """

    def __init__(self, lagrangian):
        self.lagrangian = lagrangian
        self.n = lagrangian.n

    def value(self, x):
        x = np.asarray(x, dtype=float)
        g = self.lagrangian.gradient(x)
        return float(x[self.n:] @ g[self.n:]) - self.lagrangian.value(x)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        _, g, H = self.lagrangian.derivatives(x)
        v = x[n:]
        return np.concatenate([H[n:, :n].T @ v - g[:n], H[n:, n:] @ v])

    def __call__(self, q, qdot):
        return self.value(join(q, qdot))


class FunctionOnTQ:
    """Scalar function ``f(x)`` on TQ with an optional analytic gradient."""

    def __init__(self, func, n, grad=None, step=1e-6):
        self.func = func
        self.n = n
        self.grad = grad
        self.step = step

    def value(self, x):
        return float(self.func(np.asarray(x, dtype=float)))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        g = np.empty_like(x)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = self.step * max(1.0, abs(x[i]))
            g[i] = (self.value(x + e) - self.value(x - e)) / (2 * e[i])
        return g


def as_scalar_field(obj, n=None):
    if isinstance(obj, LagrangianField):
        raise TypeError("pass a Hamiltonian (e.g. HamiltonianField(L)), not a Lagrangian")
    if hasattr(obj, "value") and hasattr(obj, "gradient"):
        return obj
    if callable(obj):
        if n is None:
            raise ValueError("dimension n is needed to wrap a plain callable")
        return FunctionOnTQ(obj, n)
    raise TypeError(f"cannot use {type(obj).__name__} as a scalar field")


@dataclass
class EnergyTrace:
    t: np.ndarray
    H: np.ndarray

    @property
    def band(self):
        return float(self.H.max() - self.H.min()) if self.H.size else 0.0

    @property
    def slope(self):
        if self.t.size < 2:
            return 0.0
        return float(np.polyfit(self.t, self.H, 1)[0])

    @property
    def has_drift(self):
        """A linear trend that, over the whole trace, exceeds the oscillation band."""
        if self.t.size < 2:
            return False
        return abs(self.slope) * float(self.t[-1] - self.t[0]) > self.band

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "H"])
            for t, H in zip(self.t, self.H):
                w.writerow([format(float(t), ".17g"), format(float(H), ".17g")])


def energy_trace(H, positions, velocities, h):
    """Evaluate ``H(q_j, qdot_j)`` along a trajectory."""
    if velocities is None:
        raise ValueError("energy traces need velocities")
    positions = np.asarray(positions, dtype=float)
    velocities = np.asarray(velocities, dtype=float)
    if positions.ndim == 1:
        positions = positions[:, None]
        velocities = velocities.reshape(-1, 1)
    k = min(len(positions), len(velocities))
    f = as_scalar_field(H, positions.shape[1])
    vals = np.array([f.value(join(q, v)) for q, v in zip(positions[:k], velocities[:k])])
    return EnergyTrace(h * np.arange(k), vals)


@dataclass
class GridSpec:
    """Tensor grid in TQ.

    ``axes`` maps a coordinate index to ``(lower, upper, resolution)``;
    ``fixed`` maps the remaining coordinates to constant values.
    """

    dim: int
    axes: dict
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = {int(k): (float(v[0]), float(v[1]), int(v[2])) for k, v in self.axes.items()}
        self.fixed = {int(k): float(v) for k, v in self.fixed.items()}
        for k, (lo, hi, res) in self.axes.items():
            if res < 2:
                raise ValueError("each free axis needs resolution >= 2")
            if not lo < hi:
                raise ValueError("axis bounds must satisfy lower < upper")
        covered = set(self.axes) | set(self.fixed)
        if covered != set(range(self.dim)) or set(self.axes) & set(self.fixed):
            raise ValueError(f"axes and fixed coordinates must partition 0..{self.dim - 1}")

    def coordinates(self):
        return {k: np.linspace(lo, hi, res) for k, (lo, hi, res) in sorted(self.axes.items())}

    def points(self):
        """All nodes, row-major over the free axes in index order."""
        coords = self.coordinates()
        keys = sorted(coords)
        mesh = np.meshgrid(*[coords[k] for k in keys], indexing="ij")
        pts = np.empty((mesh[0].size, self.dim))
        for k, m in zip(keys, mesh):
            pts[:, k] = m.ravel()
        for k, v in self.fixed.items():
            pts[:, k] = v
        return pts


def pendulum_grid(resolution=30):
    return GridSpec(2, {0: (-1.2, 1.2, resolution), 1: (-0.6, 0.6, resolution)})


@dataclass
class NuResult:
    nu: float
    used: int
    skipped: int

    def __float__(self):
        return self.nu


def nu_metric(H_a, H_b, grid):
    """Mean sine of the angle between the gradients of two Hamiltonians."""
    fa = as_scalar_field(H_a, grid.dim // 2)
    fb = as_scalar_field(H_b, grid.dim // 2)
    total, used, skipped = 0.0, 0, 0
    for x in grid.points():
        ga, gb = fa.gradient(x), fb.gradient(x)
        na, nb = np.linalg.norm(ga), np.linalg.norm(gb)
        if na < GRAD_FLOOR or nb < GRAD_FLOOR:
            skipped += 1
            continue
        ua, ub = ga / na, gb / nb
        # sin of the angle as |ua - ub| |ua + ub| / 2, exact zero for equal directions
        total += min(1.0, 0.5 * float(np.linalg.norm(ua - ub) * np.linalg.norm(ua + ub)))
        used += 1
    return NuResult(total / used if used else float("nan"), used, skipped)


@dataclass
class ContourGrid:
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray  # values[i, j] at (x[j], y[i])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([""] + [format(float(v), ".17g") for v in self.x])
            for yi, row in zip(self.y, self.values):
                w.writerow([format(float(yi), ".17g")] + [format(float(v), ".17g") for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        x = np.array(rows[0][1:], dtype=float)
        y = np.array([r[0] for r in rows[1:]], dtype=float)
        vals = np.array([r[1:] for r in rows[1:]], dtype=float)
        return cls(x, y, vals)

    def level_components(self, level):
        """Connected components of the sub-level set ``{values < level}``."""
        from scipy.ndimage import label
        return int(label(self.values < level)[1])


def contour_grid(field, grid):
    """Evaluate a scalar field on a grid with at most two free axes."""
    keys = sorted(grid.axes)
    if len(keys) > 2:
        raise ValueError("contour export supports at most two free axes")
    f = as_scalar_field(field, grid.dim // 2)
    coords = grid.coordinates()
    vals = np.array([f.value(x) for x in grid.points()])
    if len(keys) == 1:
        return ContourGrid(coords[keys[0]], np.array([0.0]), vals[None, :])
    # points are row-major with the first free axis slowest: shape (nx, ny)
    vals = vals.reshape(len(coords[keys[0]]), len(coords[keys[1]]))
    return ContourGrid(coords[keys[0]], coords[keys[1]], vals.T)


def divergence_time(positions, radius_bound, h):
    """First time ``j h`` with ``|q_j| > radius_bound``, or ``None``."""
    if not radius_bound > 0:
        raise ValueError("radius bound must be positive")
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions[:, None]
    norms = np.linalg.norm(positions, axis=1)
    bad = np.flatnonzero(~(norms <= radius_bound))
    return None if bad.size == 0 else float(bad[0] * h)
