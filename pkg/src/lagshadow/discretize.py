"""Variational midpoint/trapezoidal discretisations and Newton time stepping.

Both rules are written as quadratures ``L_d(a, b) = h * sum_i w_i L(x_i)``
with nodes ``x_i = (alpha_i a + (1 - alpha_i) b, (b - a) / h)``.  The same
node table drives the field-level stepping here and the kernel row assembly
in :mod:`lagshadow.learn`.
"""

from __future__ import annotations

import csv
import logging

import numpy as np

from .fields import join

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50
# Newton increments this small (relative to |q|) mean roundoff has been reached
STALL_RTOL = 1e-14
# a residual that stops shrinking while increments stay below this (relative)
# size is taken as the roundoff floor of the field
FLOOR_RTOL = 1e-6
FLOOR_PATIENCE = 3


class _Stagnation:
    """Detect a Newton iteration stuck at its roundoff floor."""

    def __init__(self, scale):
        self.scale = scale
        self.best = np.inf
        self.count = 0

    def __call__(self, rn, dx_max):
        if rn < 0.5 * self.best:
            self.best = rn
            self.count = 0
            return False
        self.best = min(self.best, rn)
        self.count += 1
        return self.count >= FLOOR_PATIENCE and dx_max <= FLOOR_RTOL * self.scale


class NonConvergence(RuntimeError):
    def __init__(self, iterations, residual_norm, where=""):
        self.iterations = iterations
        self.residual_norm = residual_norm
        super().__init__(
            f"Newton did not converge{where}: residual {residual_norm:.3e} "
            f"after {iterations} iterations")


class SingularJacobian(RuntimeError):
    pass


class DiscreteScheme:
    """A variational quadrature rule, ``'midpoint'`` or ``'trapezoidal'``."""

    NODES = {
        "midpoint": ((0.5, 1.0),),
        "trapezoidal": ((1.0, 0.5), (0.0, 0.5)),
    }

    def __init__(self, tag="midpoint"):
        if isinstance(tag, DiscreteScheme):
            tag = tag.tag
        if tag not in self.NODES:
            raise ValueError(f"unknown scheme {tag!r}; expected 'midpoint' or 'trapezoidal'")
        self.tag = tag

    def __repr__(self):
        return f"DiscreteScheme({self.tag!r})"

    def __eq__(self, other):
        return isinstance(other, DiscreteScheme) and other.tag == self.tag

    def __hash__(self):
        return hash(self.tag)

    @property
    def nodes(self):
        """Tuple of ``(alpha, weight)``."""
        return self.NODES[self.tag]

    def points(self, a, b, h):
        """Quadrature points in TQ for the pair ``(a, b)``; works on stacked rows."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        v = (b - a) / h
        return [np.concatenate([alpha * a + (1 - alpha) * b, v], axis=-1)
                for alpha, _ in self.nodes]


def _scheme(scheme):
    return scheme if isinstance(scheme, DiscreteScheme) else DiscreteScheme(scheme)


def _vec(q):
    return np.atleast_1d(np.asarray(q, dtype=float))


def _check_same(*qs):
    n = qs[0].shape
    for q in qs[1:]:
        if q.shape != n:
            raise ValueError(f"dimension mismatch: {q.shape} vs {n}")


def discrete_lagrangian(L, scheme, q0, q1, h):
    scheme = _scheme(scheme)
    q0, q1 = _vec(q0), _vec(q1)
    _check_same(q0, q1)
    if not h > 0:
        raise ValueError("h must be positive")
    return h * sum(w * L.value(x) for (_, w), x in zip(scheme.nodes, scheme.points(q0, q1, h)))


def grad_discrete_lagrangian(L, scheme, q0, q1, h, slot):
    """Gradient of the discrete Lagrangian in its first (slot=1) or second argument."""
    scheme = _scheme(scheme)
    q0, q1 = _vec(q0), _vec(q1)
    _check_same(q0, q1)
    if slot not in (1, 2):
        raise ValueError("slot must be 1 or 2")
    n = q0.size
    out = np.zeros(n)
    for (alpha, w), x in zip(scheme.nodes, scheme.points(q0, q1, h)):
        g = L.gradient(x)
        if slot == 1:
            out += w * (h * alpha * g[:n] - g[n:])
        else:
            out += w * (h * (1 - alpha) * g[:n] + g[n:])
    return out


def _grad1_and_jacobian(L, scheme, q0, q1, h):
    """``grad_1 L_d(q0, q1)`` and its Jacobian with respect to ``q1``."""
    n = q0.size
    r = np.zeros(n)
    J = np.zeros((n, n))
    for (alpha, w), x in zip(scheme.nodes, scheme.points(q0, q1, h)):
        _, g, H = L.derivatives(x)
        beta = 1 - alpha
        r += w * (h * alpha * g[:n] - g[n:])
        dgq = beta * H[:n, :n] + H[:n, n:] / h
        dgv = beta * H[n:, :n] + H[n:, n:] / h
        J += w * (h * alpha * dgq - dgv)
    return r, J


def del_residual(L, scheme, q_prev, q, q_next, h):
    """Discrete Euler-Lagrange residual at the middle snapshot."""
    return (grad_discrete_lagrangian(L, scheme, q_prev, q, h, 2)
            + grad_discrete_lagrangian(L, scheme, q, q_next, h, 1))


def discrete_momentum(L, scheme, q_prev, q, h):
    return grad_discrete_lagrangian(L, scheme, q_prev, q, h, 2)


def _newton_forward(L, scheme, q, target, guess, h, tol, maxiter, where):
    """Solve ``grad_1 L_d(q, x) + target = 0`` for ``x``."""
    x = guess.copy()
    scale = max(1.0, float(np.abs(q).max()))
    stuck = _Stagnation(scale)
    dx_max = np.inf
    for it in range(1, maxiter + 1):
        r, J = _grad1_and_jacobian(L, scheme, q, x, h)
        r += target
        rn = float(np.linalg.norm(r))
        if rn <= tol or stuck(rn, dx_max):
            return x, it - 1, rn
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"singular Newton Jacobian{where}") from exc
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian(f"non-finite Newton update{where}")
        x = x + dx
        dx_max = float(np.abs(dx).max())
        if dx_max <= STALL_RTOL * scale:
            r, _ = _grad1_and_jacobian(L, scheme, q, x, h)
            return x, it, float(np.linalg.norm(r + target))
    r, _ = _grad1_and_jacobian(L, scheme, q, x, h)
    rn = float(np.linalg.norm(r + target))
    if rn <= tol:
        return x, maxiter, rn
    raise NonConvergence(maxiter, rn, where)


def step(L, scheme, q_prev, q, h, tol=NEWTON_TOL, maxiter=NEWTON_MAXITER, return_info=False):
    """Advance one step of the discrete Euler-Lagrange map.

    The Newton start is the linear extrapolation ``2 q - q_prev``.
    """
    scheme = _scheme(scheme)
    q_prev, q = _vec(q_prev), _vec(q)
    _check_same(q_prev, q)
    p = discrete_momentum(L, scheme, q_prev, q, h)
    q_next, iters, rn = _newton_forward(L, scheme, q, p, 2 * q - q_prev, h, tol, maxiter, "")
    if return_info:
        return q_next, {"iterations": iters, "residual": rn, "momentum": p}
    return q_next


def initial_step(L_disc, L_cont, q0, qdot0, h, scheme="midpoint", tol=NEWTON_TOL,
                 maxiter=NEWTON_MAXITER):
    """First step from position and velocity.

    Returns ``(q1, p0)`` with ``p0 = dL_cont/dqdot(q0, qdot0)`` and ``q1`` solving
    ``grad_1 L_d(q0, q1) + p0 = 0`` for the discretisation of ``L_disc``.
    """
    scheme = _scheme(scheme)
    q0, qdot0 = _vec(q0), _vec(qdot0)
    _check_same(q0, qdot0)
    p0 = L_cont.gradient(join(q0, qdot0))[q0.size:]
    q1, _, _ = _newton_forward(L_disc, scheme, q0, p0, q0 + h * qdot0, h, tol, maxiter,
                               " in the initial step")
    return q1, p0


def recover_velocity(L_cont, q, p, tol=NEWTON_TOL, maxiter=NEWTON_MAXITER, guess=None):
    """Invert the Legendre map: find ``qdot`` with ``dL/dqdot(q, qdot) = p``."""
    q, p = _vec(q), _vec(p)
    _check_same(q, p)
    n = q.size
    v = p.copy() if guess is None else _vec(guess).copy()
    scale = max(1.0, float(np.abs(p).max()))
    stuck = _Stagnation(max(1.0, float(np.abs(v).max())))
    dv_max = np.inf
    for it in range(1, maxiter + 1):
        _, g, H = L_cont.derivatives(join(q, v))
        r = g[n:] - p
        rn = float(np.linalg.norm(r))
        if rn <= tol or stuck(rn, dv_max):
            return v
        try:
            dv = np.linalg.solve(H[n:, n:], -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian("velocity Hessian is singular") from exc
        v = v + dv
        dv_max = float(np.abs(dv).max())
        if dv_max <= STALL_RTOL * scale:
            return v
    rn = float(np.linalg.norm(L_cont.gradient(join(q, v))[n:] - p))
    if rn <= tol:
        return v
    raise NonConvergence(maxiter, rn, " in velocity recovery")


class PredictedTrajectory:
    """Positions, discrete momenta and (optionally) velocities of a prediction.

    ``failure`` holds the exception when integration stopped early; the
    arrays then contain the snapshots computed before the failure.
    """

    def __init__(self, h, positions, momenta, velocities=None, failure=None):
        self.h = float(h)
        self.positions = np.asarray(positions, dtype=float)
        self.momenta = np.asarray(momenta, dtype=float)
        self.velocities = None if velocities is None else np.asarray(velocities, dtype=float)
        self.failure = failure

    def __len__(self):
        return self.positions.shape[0]

    @property
    def times(self):
        return self.h * np.arange(len(self))

    def to_csv(self, path, with_velocities=None):
        write_trajectory_csv(path, self, with_velocities=with_velocities)


def integrate(L_disc, q0, qdot0, h, steps, scheme="midpoint", L_cont=None,
              with_velocities=False, tol=NEWTON_TOL, maxiter=NEWTON_MAXITER, stop=None):
    """Predict ``steps`` snapshots after ``(q0, qdot0)``.

    ``L_disc`` is discretised and stepped; ``L_cont`` (default ``L_disc``)
    provides the initial momentum and, when requested, the velocities.
    Newton failures are caught: the partial trajectory is returned with the
    exception stored in ``failure``.  ``stop(q)`` returning true ends the run
    after that snapshot.
    """
    scheme = _scheme(scheme)
    L_cont = L_disc if L_cont is None else L_cont
    q0, qdot0 = _vec(q0), _vec(qdot0)
    positions = [q0]
    momenta = [L_cont.gradient(join(q0, qdot0))[q0.size:]]
    failure = None
    if steps > 0:
        try:
            q1, _ = initial_step(L_disc, L_cont, q0, qdot0, h, scheme, tol, maxiter)
            positions.append(q1)
            momenta.append(discrete_momentum(L_disc, scheme, q0, q1, h))
            for j in range(1, steps):
                if stop is not None and stop(positions[-1]):
                    break
                q_next = step(L_disc, scheme, positions[-2], positions[-1], h, tol, maxiter)
                if not np.all(np.isfinite(q_next)):
                    raise NonConvergence(0, float("nan"), f" at step {j + 1}")
                positions.append(q_next)
                momenta.append(discrete_momentum(L_disc, scheme, positions[-2], q_next, h))
        except (NonConvergence, SingularJacobian) as exc:
            logger.warning("integration stopped after %d snapshots: %s", len(positions), exc)
            failure = exc
    velocities = None
    if with_velocities:
        velocities = [qdot0]
        for q, p in zip(positions[1:], momenta[1:]):
            try:
                velocities.append(recover_velocity(L_cont, q, p, tol, maxiter,
                                                   guess=velocities[-1]))
            except (NonConvergence, SingularJacobian) as exc:
                failure = failure or exc
                break
        k = len(velocities)
        positions, momenta = positions[:k], momenta[:k]
    return PredictedTrajectory(h, positions, momenta, velocities, failure)


def _fmt(x):
    return format(float(x), ".17g")


def write_trajectory_csv(path, traj, with_velocities=None):
    """``t,q1..qn[,qd1..qdn,p1..pn]`` with 17 significant digits."""
    if with_velocities is None:
        with_velocities = traj.velocities is not None
    n = traj.positions.shape[1]
    header = ["t"] + [f"q{i + 1}" for i in range(n)]
    if with_velocities:
        header += [f"qd{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for j in range(len(traj)):
            row = [_fmt(j * traj.h)] + [_fmt(v) for v in traj.positions[j]]
            if with_velocities:
                row += [_fmt(v) for v in traj.velocities[j]] + [_fmt(v) for v in traj.momenta[j]]
            w.writerow(row)


def read_trajectory_csv(path):
    """Inverse of :func:`write_trajectory_csv`; returns a :class:`PredictedTrajectory`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    n = sum(1 for c in header if c.startswith("q") and not c.startswith("qd"))
    t = data[:, 0]
    h = float(t[1] - t[0]) if len(t) > 1 else 1.0
    pos = data[:, 1:1 + n]
    vel = mom = None
    if len(header) > 1 + n:
        vel = data[:, 1 + n:1 + 2 * n]
        mom = data[:, 1 + 2 * n:1 + 3 * n]
    return PredictedTrajectory(h, pos, mom if mom is not None else np.zeros_like(pos), vel)
