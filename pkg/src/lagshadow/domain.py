"""State and trajectory containers plus the two benchmark systems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fields import MechanicalLagrangian


@dataclass(frozen=True)
class State:
    q: np.ndarray
    qdot: Optional[np.ndarray] = None
    qddot: Optional[np.ndarray] = None

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if q.ndim != 1 or q.size < 1:
            raise ValueError("q must be a non-empty vector")
        object.__setattr__(self, "q", q)
        for name in ("qdot", "qddot"):
            v = getattr(self, name)
            if v is not None:
                v = np.atleast_1d(np.asarray(v, dtype=float))
                if v.shape != q.shape:
                    raise ValueError(f"{name} has length {v.size}, expected {q.size}")
                object.__setattr__(self, name, v)

    @property
    def n(self):
        return self.q.size


@dataclass(frozen=True)
class Trajectory:
    """Equally spaced position snapshots ``positions[j] = q(t0 + j h)``."""

    positions: np.ndarray
    h: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[0] < 2:
            raise ValueError("a trajectory needs at least 2 snapshots")
        if not self.h > 0:
            raise ValueError("step size h must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "h", float(self.h))

    @property
    def n(self):
        return self.positions.shape[1]

    def __len__(self):
        return self.positions.shape[0]

    def triples(self):
        p = self.positions
        return p[:-2], p[1:-1], p[2:]

    def pairs(self):
        return self.positions[:-1], self.positions[1:]


@dataclass
class TrajectoryDataset:
    trajectories: list
    h: float
    n: int
    domain: Optional[np.ndarray] = None  # shape (2n, 2): lower/upper per (q, qdot) coordinate
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.h = float(self.h)
        self.n = int(self.n)
        for tr in self.trajectories:
            if tr.n != self.n:
                raise ValueError(f"trajectory dimension {tr.n} != dataset dimension {self.n}")
            if not np.isclose(tr.h, self.h, rtol=1e-12, atol=0):
                raise ValueError(f"trajectory step {tr.h} != dataset step {self.h}")
        if self.domain is not None:
            self.domain = np.asarray(self.domain, dtype=float).reshape(2 * self.n, 2)

    def __len__(self):
        return len(self.trajectories)

    @property
    def n_triples(self):
        return sum(len(tr) - 2 for tr in self.trajectories)

    @property
    def n_positions(self):
        return sum(len(tr) for tr in self.trajectories)

    def triples(self):
        """Stacked ``(q_prev, q, q_next)`` arrays over all trajectories in order."""
        parts = [tr.triples() for tr in self.trajectories if len(tr) >= 3]
        if not parts:
            empty = np.empty((0, self.n))
            return empty, empty, empty
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))

    def pairs(self):
        parts = [tr.pairs() for tr in self.trajectories]
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(2))


class BenchmarkSystem:
    """Pendulum or Henon-Heiles with unit mass.

    Parameters
    ----------
    kind : {'pendulum', 'henon-heiles'}
    alpha : float
        Cubic coupling of the Henon-Heiles potential; ignored for the pendulum.
    """

    KINDS = ("pendulum", "henon-heiles")

    def __init__(self, kind, alpha=0.8):
        if kind not in self.KINDS:
            raise ValueError(f"unknown system {kind!r}; expected one of {self.KINDS}")
        self.kind = kind
        self.alpha = float(alpha)
        if kind == "henon-heiles" and self.alpha == 0:
            raise ValueError("Henon-Heiles needs alpha != 0")

    def __repr__(self):
        if self.kind == "pendulum":
            return "BenchmarkSystem('pendulum')"
        return f"BenchmarkSystem('henon-heiles', alpha={self.alpha!r})"

    @property
    def n(self):
        return 1 if self.kind == "pendulum" else 2

    def _check(self, q, qdot=None):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if q.shape != (self.n,):
            raise ValueError(f"{self.kind} expects positions of length {self.n}, got {q.shape}")
        if qdot is None:
            return q, None
        qdot = np.atleast_1d(np.asarray(qdot, dtype=float))
        if qdot.shape != (self.n,):
            raise ValueError(f"{self.kind} expects velocities of length {self.n}, got {qdot.shape}")
        return q, qdot

    def potential(self, q):
        q, _ = self._check(q)
        if self.kind == "pendulum":
            return -np.cos(q[0])
        a = self.alpha
        return 0.5 * (q[0] ** 2 + q[1] ** 2) + a * (q[0] ** 2 * q[1] - q[1] ** 3 / 3)

    def potential_gradient(self, q):
        q, _ = self._check(q)
        if self.kind == "pendulum":
            return np.array([np.sin(q[0])])
        a = self.alpha
        return np.array([q[0] + 2 * a * q[0] * q[1], q[1] + a * (q[0] ** 2 - q[1] ** 2)])

    def potential_hessian(self, q):
        q, _ = self._check(q)
        if self.kind == "pendulum":
            return np.array([[np.cos(q[0])]])
        a = self.alpha
        return np.array([[1 + 2 * a * q[1], 2 * a * q[0]],
                         [2 * a * q[0], 1 - 2 * a * q[1]]])

    def acceleration(self, q):
        """Velocity-independent acceleration ``-grad V(q)``."""
        return -self.potential_gradient(q)

    @property
    def critical_energy(self):
        """Escape energy of Henon-Heiles, ``1/(6 alpha^2)``."""
        if self.kind != "henon-heiles":
            raise AttributeError("only Henon-Heiles has an escape energy")
        return 1.0 / (6.0 * self.alpha ** 2)

    def lagrangian(self):
        """The reference Lagrangian as an analytic :class:`LagrangianField`."""
        return MechanicalLagrangian(self.n, self.potential, self.potential_gradient,
                                    self.potential_hessian)


def reference_lagrangian(system, q, qdot):
    q, qdot = system._check(q, qdot)
    return 0.5 * float(qdot @ qdot) - float(system.potential(q))


def reference_energy(system, q, qdot):
    q, qdot = system._check(q, qdot)
    return 0.5 * float(qdot @ qdot) + float(system.potential(q))


def reference_acceleration(system, q, qdot=None):
    q, qdot = system._check(q, qdot)
    return system.acceleration(q)
