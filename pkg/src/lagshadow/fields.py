"""Scalar Lagrangian fields on the tangent space TQ = R^{2n}.

A field is evaluated at a point ``x = (q, qdot)`` stored as one flat array of
length ``2n``.  Gradients and Hessians are taken with respect to the full
point, so ``gradient(x)[:n]`` is the q-gradient and ``hessian(x)[n:, :n]`` is
the block with entries d^2 L / (d qdot^a d q^b).
"""

from __future__ import annotations

import numpy as np

# relative steps for central differences of field values
FD_STEP_GRAD = 1e-5
FD_STEP_HESS = 1e-4


def _fd_steps(x, rel):
    return rel * np.maximum(1.0, np.abs(x))


class LagrangianField:
    """Base class for Lagrangians ``L(q, qdot)``.

    Subclasses implement :meth:`value` and, when they can, override
    :meth:`gradient` and :meth:`hessian` with analytic versions and set
    ``analytic = True``.  The defaults use central finite differences.
    """

    analytic = False

    def __init__(self, n):
        self.n = int(n)

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        steps = _fd_steps(x, FD_STEP_GRAD)
        g = np.empty_like(x)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = steps[i]
            g[i] = (self.value(x + e) - self.value(x - e)) / (2 * steps[i])
        return g

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        d = x.size
        steps = _fd_steps(x, FD_STEP_HESS)
        f0 = self.value(x)
        H = np.empty((d, d))
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = steps[i]
            H[i, i] = (self.value(x + ei) - 2 * f0 + self.value(x - ei)) / steps[i] ** 2
            for j in range(i):
                ej = np.zeros(d)
                ej[j] = steps[j]
                H[i, j] = H[j, i] = (
                    self.value(x + ei + ej)
                    - self.value(x + ei - ej)
                    - self.value(x - ei + ej)
                    + self.value(x - ei - ej)
                ) / (4 * steps[i] * steps[j])
        return H

    def derivatives(self, x):
        """Return ``(value, gradient, hessian)`` at ``x``."""
        return self.value(x), self.gradient(x), self.hessian(x)

    def __call__(self, q, qdot):
        return self.value(join(q, qdot))

    def momentum(self, q, qdot):
        """Conjugate momentum dL/dqdot."""
        return self.gradient(join(q, qdot))[self.n:]


class FunctionField(LagrangianField):
    """Wrap a plain callable ``f(q, qdot)``; derivatives by finite differences."""

    def __init__(self, func, n):
        super().__init__(n)
        self.func = func

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(self.func(x[: self.n], x[self.n:]))


class MechanicalLagrangian(LagrangianField):
    """``L = 1/2 m |qdot|^2 - V(q)`` with analytic derivatives.

    ``potential(q)``, ``potential_gradient(q)`` and ``potential_hessian(q)``
    must be supplied.
    """

    analytic = True

    def __init__(self, n, potential, potential_gradient, potential_hessian, mass=1.0):
        super().__init__(n)
        self.potential = potential
        self.potential_gradient = potential_gradient
        self.potential_hessian = potential_hessian
        self.mass = float(mass)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        q, v = x[: self.n], x[self.n:]
        return 0.5 * self.mass * float(v @ v) - float(self.potential(q))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        q, v = x[: self.n], x[self.n:]
        return np.concatenate([-np.atleast_1d(self.potential_gradient(q)), self.mass * v])

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        H = np.zeros((2 * n, 2 * n))
        H[:n, :n] = -np.atleast_2d(self.potential_hessian(x[:n]))
        H[n:, n:] = self.mass * np.eye(n)
        return H


def join(q, qdot):
    return np.concatenate([np.atleast_1d(np.asarray(q, dtype=float)),
                           np.atleast_1d(np.asarray(qdot, dtype=float))])


def hamiltonian(field, q, qdot):
    """Energy ``qdot . dL/dqdot - L`` of a Lagrangian field."""
    x = join(q, qdot)
    g = field.gradient(x)
    return float(x[field.n:] @ g[field.n:]) - field.value(x)


def euler_lagrange_residual(field, q, qdot, qddot):
    """``dL/dq - d/dt dL/dqdot`` evaluated along a curve with the given jets."""
    x = join(q, qdot)
    n = field.n
    g = field.gradient(x)
    H = field.hessian(x)
    return g[:n] - H[n:, :n] @ x[n:] - H[n:, n:] @ np.atleast_1d(qddot)
