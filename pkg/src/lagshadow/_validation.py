"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import numbers

import numpy as np

from .domain import Trajectory, TrajectoryDataset


def check_step(h, name="h"):
    if isinstance(h, bool) or not isinstance(h, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(h).__name__}")
    h = float(h)
    if not np.isfinite(h) or h <= 0:
        raise ValueError(f"{name} must be positive and finite, got {h}")
    return h


def check_positions(X, h=None, domain=None):
    """Coerce position data to a :class:`TrajectoryDataset`.

    Accepts a dataset (returned unchanged), or an array of shape
    ``(n_trajectories, n_snapshots, n)``; a 2-d array is read as ``n = 1``.
    """
    if isinstance(X, TrajectoryDataset):
        return X
    if h is None:
        raise ValueError("the step size h is needed to interpret raw position arrays")
    h = check_step(h)
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"positions must have shape (n_traj, n_snapshots, n), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 2:
        raise ValueError("need at least one trajectory with two snapshots")
    if not np.all(np.isfinite(arr)):
        raise ValueError("positions contain NaN or infinity")
    trajs = [Trajectory(a, h) for a in arr]
    return TrajectoryDataset(trajs, h, arr.shape[2], domain=domain)


def check_states(X, n=None):
    """2-d float array of points ``(q, qdot)`` with an even number of columns."""
    arr = np.atleast_2d(np.asarray(X, dtype=float))
    if arr.ndim != 2 or arr.shape[1] % 2:
        raise ValueError(f"states must have shape (m, 2n), got {arr.shape}")
    if n is not None and arr.shape[1] != 2 * n:
        raise ValueError(f"expected states with {2 * n} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("states contain NaN or infinity")
    return arr


def check_steps(steps):
    if isinstance(steps, bool) or not isinstance(steps, numbers.Integral) or steps < 0:
        raise ValueError(f"steps must be a non-negative integer, got {steps!r}")
    return int(steps)


def check_order(order):
    if order not in (0, 2):
        raise ValueError(f"BEA order must be 0 or 2, got {order!r}")
    return int(order)
