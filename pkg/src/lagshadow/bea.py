"""Order-2 variational backward error analysis.

For a Lagrangian ``L`` write ``W = d^2L/dqdot^2``, ``g = grad_q L - M qdot``
with ``M_ab = d^2 L / dqdot^a dq^b`` (so ``W qddot = g`` on motions), and
``S = qdot^T (d^2L/dq^2) qdot``.  The order-2 corrections are

* midpoint:    ``C[L] = g^T W^{-1} g - S``
* trapezoidal: ``C[L] = g^T W^{-1} g + 2 S``

and the four directions add ``sign * h^2/24 * C[L]``:

==================  ====  ===============================================
direction           sign  meaning
==================  ====  ===============================================
exact-to-modified    +1   Lagrangian whose exact flow the integrator follows
modified-to-exact    -1   inverse of the above
exact-to-inverse     -1   Lagrangian the integrator must be fed to be exact
inverse-to-exact     +1   recover the true Lagrangian from a learned one
==================  ====  ===============================================

For ``n = 1`` these reduce to the scalar formulas with ``L^{(i,j)}``.
"""

from __future__ import annotations

import numpy as np

from .discretize import DiscreteScheme
from .fields import LagrangianField, hamiltonian

DIRECTIONS = {
    "exact-to-modified": 1.0,
    "modified-to-exact": -1.0,
    "exact-to-inverse": -1.0,
    "inverse-to-exact": 1.0,
}


SINGULAR_RTOL = 1e-8


class SingularVelocityHessian(ValueError):
    pass


def correction_term(L, x, scheme="midpoint"):
    """The bracket ``C[L](x)`` (without the ``h^2/24`` factor)."""
    scheme = DiscreteScheme(scheme)
    n = L.n
    x = np.asarray(x, dtype=float)
    _, grad, H = L.derivatives(x)
    v = x[n:]
    W = H[n:, n:]
    g = grad[:n] - H[n:, :n] @ v
    # finite-difference Hessians leave noise where W should vanish
    scale = max(np.linalg.norm(H), np.finfo(float).tiny)
    if np.linalg.svd(W, compute_uv=False).min() <= SINGULAR_RTOL * scale:
        raise SingularVelocityHessian(f"d^2L/dqdot^2 is singular at {x}")
    try:
        acc = np.linalg.solve(W, g)
    except np.linalg.LinAlgError as exc:
        raise SingularVelocityHessian(f"d^2L/dqdot^2 is singular at {x}") from exc
    S = float(v @ H[:n, :n] @ v)
    quad = float(g @ acc)
    if scheme.tag == "midpoint":
        return quad - S
    return quad + 2.0 * S


def correction_term_1d(L, x, scheme="midpoint"):
    """Scalar formula in terms of ``L^{(i,j)}``; only for ``n = 1``."""
    if L.n != 1:
        raise ValueError("scalar formula needs n = 1")
    _, g, H = L.derivatives(np.asarray(x, dtype=float))
    v = x[1]
    L10, L11, L02, L20 = g[0], H[0, 1], H[1, 1], H[0, 0]
    frac = (L10 - L11 * v) ** 2 / L02
    if DiscreteScheme(scheme).tag == "midpoint":
        return frac - L20 * v ** 2
    return 2 * L20 * v ** 2 + frac


class _Correction(LagrangianField):
    def __init__(self, owner):
        super().__init__(owner.n)
        self.owner = owner

    def value(self, x):
        return self.owner.correction(x)


class BeaField(LagrangianField):
    """``base + sign * h^2/24 * C[base]`` truncated at order ``order``.

    The base keeps its own derivatives; only the ``O(h^2)`` correction is
    differentiated by central differences, which keeps roundoff small.
    """

    analytic = False

    def __init__(self, base, scheme="midpoint", h=1.0, order=2, direction="inverse-to-exact"):
        if order not in (0, 2):
            raise ValueError("only truncation orders 0 and 2 are supported")
        if direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {direction!r}")
        super().__init__(base.n)
        self.base = base
        self.scheme = DiscreteScheme(scheme).tag
        self.h = float(h)
        self.order = order
        self.direction = direction
        self.sign = DIRECTIONS[direction]
        self._corr = _Correction(self)
        if order == 0:
            self.analytic = getattr(base, "analytic", False)

    def correction(self, x):
        if self.order == 0:
            return 0.0
        return self.sign * self.h ** 2 / 24.0 * correction_term(self.base, x, self.scheme)

    def value(self, x):
        return self.base.value(x) + self.correction(x)

    def gradient(self, x):
        g = self.base.gradient(x)
        if self.order == 0:
            return g
        return g + self._corr.gradient(x)

    def hessian(self, x):
        H = self.base.hessian(x)
        if self.order == 0:
            return H
        return H + self._corr.hessian(x)

    def derivatives(self, x):
        v, g, H = self.base.derivatives(x)
        if self.order == 0:
            return v, g, H
        return (v + self.correction(x), g + self._corr.gradient(x), H + self._corr.hessian(x))


def bea_correct(base, scheme="midpoint", h=1.0, order=2, direction="inverse-to-exact"):
    return BeaField(base, scheme, h, order, direction)


def modified_hamiltonian(field, q, qdot):
    """``sum_a qdot^a dL/dqdot^a - L`` for any Lagrangian field."""
    return hamiltonian(field, q, qdot)


def motion_lagrangian(model, order=2):
    """Lagrangian whose exact flow the variational integrator follows on ``model``.

    For an LSI model this is the recovered true Lagrangian (inverse-to-exact);
    for an LGP model it is the modified Lagrangian (exact-to-modified).  Both
    directions carry the same sign, so the fields coincide numerically.
    """
    direction = "inverse-to-exact" if model.kind == "lsi" else "exact-to-modified"
    return BeaField(model, model.scheme, model.h, order, direction)
