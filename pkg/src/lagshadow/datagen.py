"""Training data: Halton-sampled initial states integrated by Stormer-Verlet.

Only positions are kept.  Central differences rebuild velocities and
accelerations for the comparison learners that need them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .domain import BenchmarkSystem, State, Trajectory, TrajectoryDataset

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def radical_inverse(index, base):
    inv_base = 1.0 / base
    f = inv_base
    result = 0.0
    while index > 0:
        index, digit = divmod(index, base)
        result += digit * f
        f *= inv_base
    return result


def halton_point(index, dim):
    """Halton point number ``index`` (1-based) in ``[0, 1)^dim``."""
    if index < 1:
        raise ValueError("Halton index must be >= 1")
    if not 1 <= dim <= len(PRIMES):
        raise ValueError(f"dim must be in 1..{len(PRIMES)}")
    return np.array([radical_inverse(index, PRIMES[d]) for d in range(dim)])


def halton_sequence(count, dim, skip=0):
    return np.array([halton_point(skip + i + 1, dim) for i in range(count)]).reshape(count, dim)


def halton_velocities(count, bounds_1d):
    """Base-2 Halton points scaled to the interval ``bounds_1d``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    lo, hi = bounds_1d
    u = halton_sequence(count, 1)[:, 0]
    return lo + (hi - lo) * u


@dataclass(frozen=True)
class SamplerSpec:
    bounds: tuple  # ((lo, hi), ...) over (q_1..q_n, qdot_1..qdot_n)
    count: int
    skip: int = 0

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2:
            raise ValueError("bounds must be a sequence of (lower, upper) pairs")
        if np.any(b[:, 0] >= b[:, 1]):
            raise ValueError("every lower bound must be below its upper bound")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.skip < 0:
            raise ValueError("skip must be >= 0")
        object.__setattr__(self, "bounds", tuple(map(tuple, b.tolist())))

    def sample(self):
        b = np.asarray(self.bounds)
        u = halton_sequence(self.count, b.shape[0], self.skip)
        return b[:, 0] + (b[:, 1] - b[:, 0]) * u


@dataclass(frozen=True)
class GroundTruthSpec:
    h: float
    steps_per_sample: int
    h_fine: float = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.steps_per_sample < 3:
            raise ValueError("trajectories need at least 3 snapshots")
        if self.h_fine is None:
            object.__setattr__(self, "h_fine", self.h / 500)
        if not self.h_fine > 0:
            raise ValueError("h_fine must be positive")
        _ = self.substeps

    @property
    def substeps(self):
        """Integer ``m`` with ``h = m * h_fine``."""
        ratio = Fraction(repr(self.h)) / Fraction(repr(self.h_fine))
        m = round(ratio)
        if m < 1 or abs(ratio - m) > Fraction(1, 10 ** 9) * max(1, m):
            raise ValueError(f"h_fine={self.h_fine} does not divide h={self.h}")
        return int(m)


def stormer_verlet(system, q0, qdot0, h_fine, steps, acceleration=None):
    """Kick-drift-kick leapfrog for ``qddot = a(q)``.

    Returns arrays ``q`` and ``qdot`` of shape ``(steps + 1, n)``.
    ``acceleration`` overrides the system's force law (e.g. ``lambda q: 0*q``).
    """
    if not h_fine > 0:
        raise ValueError("h_fine must be positive")
    acc = system.acceleration if acceleration is None else acceleration
    q = np.array(q0, dtype=float, ndmin=1)
    v = np.array(qdot0, dtype=float, ndmin=1)
    Q = np.empty((steps + 1, q.size))
    V = np.empty((steps + 1, q.size))
    Q[0], V[0] = q, v
    a = acc(q)
    half = 0.5 * h_fine
    for j in range(1, steps + 1):
        v = v + half * a
        q = q + h_fine * v
        a = acc(q)
        v = v + half * a
        Q[j], V[j] = q, v
    return Q, V


def _verlet_batch(acc, Q0, V0, h_fine, m, n_out):
    """Integrate many initial states at once, keeping every m-th state."""
    q, v = Q0.copy(), V0.copy()
    Qs = np.empty((n_out,) + q.shape)
    Vs = np.empty_like(Qs)
    Qs[0], Vs[0] = q, v
    a = acc(q)
    half = 0.5 * h_fine
    for k in range(1, n_out):
        for _ in range(m):
            v = v + half * a
            q = q + h_fine * v
            a = acc(q)
            v = v + half * a
        Qs[k], Vs[k] = q, v
    return Qs, Vs


def batch_acceleration(system):
    """Acceleration vectorised over rows of ``q``."""
    if system.kind == "pendulum":
        return lambda q: -np.sin(q)
    a = system.alpha

    def acc(q):
        x, y = q[:, 0], q[:, 1]
        return -np.stack([x + 2 * a * x * y, y + a * (x * x - y * y)], axis=1)
    return acc


def generate_dataset(system, sampler, gt, acceleration=None, return_velocities=False):
    """Sample initial states, integrate on the fine grid and keep positions.

    Every ``h / h_fine``-th fine state is retained, giving trajectories of
    ``gt.steps_per_sample`` snapshots in Halton order.
    """
    n = system.n
    bounds = np.asarray(sampler.bounds)
    if bounds.shape[0] != 2 * n:
        raise ValueError(f"sampler bounds have {bounds.shape[0]} coordinates, expected {2 * n}")
    X0 = sampler.sample()
    m = gt.substeps
    acc = batch_acceleration(system) if acceleration is None else acceleration
    Qs, Vs = _verlet_batch(acc, X0[:, :n], X0[:, n:], gt.h_fine, m, gt.steps_per_sample)
    trajs = [Trajectory(Qs[:, i, :], gt.h) for i in range(sampler.count)]
    ds = TrajectoryDataset(trajs, gt.h, n, domain=bounds,
                           metadata={"system": system.kind, "alpha": system.alpha,
                                     "h_fine": gt.h_fine, "count": sampler.count,
                                     "length": gt.steps_per_sample, "skip": sampler.skip})
    if return_velocities:
        return ds, np.transpose(Vs, (1, 0, 2))
    return ds


def central_differences(traj, stencil="compact"):
    """States with second-order velocity/acceleration at interior snapshots.

    ``compact`` uses the three-point stencils and drops one snapshot per end.
    ``nested`` differentiates the central-difference velocities once more,
    i.e. ``qddot_j = (q_{j+2} - 2 q_j + q_{j-2}) / (4 h^2)``, and drops two
    snapshots per end.
    """
    p = traj.positions
    h = traj.h
    if stencil == "compact":
        if len(traj) < 3:
            raise ValueError("central differences need at least 3 snapshots")
        qdot = (p[2:] - p[:-2]) / (2 * h)
        qddot = (p[2:] - 2 * p[1:-1] + p[:-2]) / h ** 2
        return [State(p[j + 1], qdot[j], qddot[j]) for j in range(len(traj) - 2)]
    if stencil == "nested":
        if len(traj) < 5:
            raise ValueError("nested central differences need at least 5 snapshots")
        qdot = (p[2:] - p[:-2]) / (2 * h)
        qddot = (qdot[2:] - qdot[:-2]) / (2 * h)
        return [State(p[j + 2], qdot[j + 1], qddot[j]) for j in range(len(traj) - 4)]
    raise ValueError(f"unknown stencil {stencil!r}")


def _fmt(x):
    return float(format(float(x), ".17g"))


def dataset_to_dict(ds):
    return {
        "n": ds.n,
        "h": _fmt(ds.h),
        "domain": None if ds.domain is None else [[_fmt(v) for v in row] for row in ds.domain],
        "metadata": ds.metadata,
        "trajectories": [[[_fmt(v) for v in q] for q in tr.positions] for tr in ds.trajectories],
    }


def dataset_from_dict(d):
    h = float(d["h"])
    trajs = [Trajectory(np.asarray(t, dtype=float).reshape(len(t), d["n"]), h)
             for t in d["trajectories"]]
    return TrajectoryDataset(trajs, h, int(d["n"]), domain=d.get("domain"),
                             metadata=d.get("metadata") or {})


def save_dataset(ds, path):
    with open(path, "w") as fh:
        json.dump(dataset_to_dict(ds), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_dataset(path):
    with open(path) as fh:
        return dataset_from_dict(json.load(fh))


def system_from_metadata(ds):
    kind = ds.metadata.get("system")
    if kind is None:
        return None
    return BenchmarkSystem(kind, ds.metadata.get("alpha", 0.8))
