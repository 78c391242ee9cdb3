"""Scaled radial basis function kernel with derivatives in its first argument.

``k(x, y) = c_k * exp(-|x - y|^2 / epsilon^2)``

All batched routines take ``X`` of shape ``(p, d)`` and ``Y`` of shape
``(m, d)``; derivatives are always with respect to the rows of ``X``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelParams:
    epsilon: float = 1.0
    c_k: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.c_k > 0:
            raise ValueError(f"c_k must be positive, got {self.c_k}")


class RBFKernel:
    """Value and first/second derivatives of the scaled RBF kernel.

    Other kernels can be dropped in by providing the same four methods
    (``__call__``, ``gradient``, ``hessian``, ``derivative``).
    """

    def __init__(self, params=None, epsilon=None, c_k=None):
        if params is None:
            params = KernelParams(epsilon=1.0 if epsilon is None else epsilon,
                                  c_k=1.0 if c_k is None else c_k)
        self.params = params

    @property
    def epsilon(self):
        return self.params.epsilon

    @property
    def c_k(self):
        return self.params.c_k

    def _prep(self, X, Y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        return X, Y

    def _diff_and_value(self, X, Y):
        X, Y = self._prep(X, Y)
        D = X[:, None, :] - Y[None, :, :]
        K = self.c_k * np.exp(-np.einsum("pmd,pmd->pm", D, D) / self.epsilon ** 2)
        return D, K

    def __call__(self, X, Y):
        """Gram block ``k(X, Y)`` of shape ``(p, m)``."""
        X, Y = self._prep(X, Y)
        sq = (X ** 2).sum(1)[:, None] + (Y ** 2).sum(1)[None, :] - 2 * X @ Y.T
        np.maximum(sq, 0.0, out=sq)
        return self.c_k * np.exp(-sq / self.epsilon ** 2)

    def gradient(self, X, Y):
        """``(p, m, d)`` array of dk/dx_a."""
        D, K = self._diff_and_value(X, Y)
        return (-2.0 / self.epsilon ** 2) * D * K[:, :, None]

    def hessian(self, X, Y):
        """``(p, m, d, d)`` array of d^2 k / dx_a dx_b."""
        D, K = self._diff_and_value(X, Y)
        e2 = self.epsilon ** 2
        d = D.shape[-1]
        H = (4.0 / e2 ** 2) * D[..., :, None] * D[..., None, :]
        H -= (2.0 / e2) * np.eye(d)
        return H * K[:, :, None, None]

    def derivative(self, x, y, index):
        """Partial derivative of ``k(x, y)`` in the first argument.

        Parameters
        ----------
        index : sequence of int
            Coordinates to differentiate by; length 1 or 2.
        """
        index = tuple(index)
        if len(index) not in (1, 2):
            raise ValueError(f"unsupported derivative order {len(index)}")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape:
            raise ValueError("dimension mismatch")
        d = x - y
        e2 = self.epsilon ** 2
        k = self.c_k * np.exp(-float(d @ d) / e2)
        if len(index) == 1:
            (a,) = index
            return -2.0 * d[a] * k / e2
        a, b = index
        return ((-2.0 / e2) * (a == b) + 4.0 * d[a] * d[b] / e2 ** 2) * k


def kernel_value(x, y, params):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    d = x - y
    return params.c_k * np.exp(-float(d @ d) / params.epsilon ** 2)
