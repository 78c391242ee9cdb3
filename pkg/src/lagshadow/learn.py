"""Kernel learners for Lagrangians.

Three models are trained here:

* LSI: the inverse modified Lagrangian, fitted so that its discrete
  Euler-Lagrange equations hold on observed position triples.
* LGP: a Lagrangian fitted to the continuous Euler-Lagrange equations on
  ``(q, qdot, qddot)`` samples (finite-difference or exact derivatives).
* GPFlow: a structure-free kernel regression of the one-step flow map.

Kernel Lagrangians are represented through ``L(x) = k(x, Z) @ B`` where the
coefficient vector ``B`` stands for ``k(Z, Z)^{-1} L(Z)`` and is solved for
directly.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .datagen import central_differences, halton_sequence, halton_velocities
from .discretize import DiscreteScheme
from .domain import State
from .fields import LagrangianField
from .kernel import KernelParams, RBFKernel

logger = logging.getLogger(__name__)

KINDS = ("lsi", "lgp", "lgp-exact")


@dataclass
class TrainConfig:
    epsilon: float = 1.0
    c_k: float = 1.0
    scheme: str = "midpoint"
    c: float = 1.0
    normalisation_point: Optional[np.ndarray] = None  # default: origin of TQ
    rcond: Optional[float] = None  # default: machine epsilon * max(rows, columns)

    def __post_init__(self):
        self.scheme = DiscreteScheme(self.scheme).tag
        if self.c == 0:
            raise ValueError("normalisation constant c must be non-zero")
        if self.rcond is not None and not 0 < self.rcond < 1:
            raise ValueError("rcond must lie in (0, 1)")
        KernelParams(self.epsilon, self.c_k)

    @property
    def kernel(self):
        return RBFKernel(KernelParams(self.epsilon, self.c_k))

    def anchor(self, n):
        if self.normalisation_point is None:
            return np.zeros(2 * n)
        p = np.asarray(self.normalisation_point, dtype=float).ravel()
        if p.size != 2 * n:
            raise ValueError(f"normalisation point must have {2 * n} entries")
        return p


@dataclass
class SolveResult:
    B: np.ndarray
    rank: int
    residual: float
    singular_values: np.ndarray = field(repr=False, default=None)


class KernelModel(LagrangianField):
    """Kernel expansion ``L(x) = sum_i B_i k(x, z_i)`` with analytic derivatives."""

    analytic = True

    def __init__(self, centers, coefficients, params, scheme="midpoint", h=1.0, kind="lsi",
                 c=1.0, normalisation_point=None, diagnostics=None):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if centers.shape[1] % 2:
            raise ValueError("centers must have even dimension 2n")
        super().__init__(centers.shape[1] // 2)
        coefficients = np.asarray(coefficients, dtype=float).ravel()
        if coefficients.size != centers.shape[0]:
            raise ValueError(f"{coefficients.size} coefficients for {centers.shape[0]} centers")
        if kind not in KINDS:
            raise ValueError(f"unknown model kind {kind!r}")
        self.centers = centers
        self.coefficients = coefficients
        self.params = params
        self.scheme = DiscreteScheme(scheme).tag
        self.h = float(h)
        self.kind = kind
        self.c = float(c)
        self.normalisation_point = (np.zeros(2 * self.n) if normalisation_point is None
                                    else np.asarray(normalisation_point, dtype=float))
        self.diagnostics = dict(diagnostics or {})

    def _prep(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * self.n,):
            raise ValueError(f"expected a point of length {2 * self.n}, got shape {x.shape}")
        D = x - self.centers
        e2 = self.params.epsilon ** 2
        KB = self.params.c_k * np.exp(-np.einsum("md,md->m", D, D) / e2) * self.coefficients
        return D, KB, e2

    def value(self, x):
        _, KB, _ = self._prep(x)
        return float(KB.sum())

    def gradient(self, x):
        D, KB, e2 = self._prep(x)
        return (-2.0 / e2) * (KB @ D)

    def hessian(self, x):
        D, KB, e2 = self._prep(x)
        d = D.shape[1]
        return (4.0 / e2 ** 2) * (D.T * KB) @ D - (2.0 / e2) * KB.sum() * np.eye(d)

    def derivatives(self, x):
        D, KB, e2 = self._prep(x)
        s = KB.sum()
        g = (-2.0 / e2) * (KB @ D)
        H = (4.0 / e2 ** 2) * (D.T * KB) @ D - (2.0 / e2) * s * np.eye(D.shape[1])
        return float(s), g, H

    def to_dict(self):
        f = _f17
        return {
            "kind": self.kind,
            "scheme": self.scheme,
            "h": f(self.h),
            "n": self.n,
            "kernel": {"epsilon": f(self.params.epsilon), "c_k": f(self.params.c_k)},
            "c": f(self.c),
            "normalisation_point": [f(v) for v in self.normalisation_point],
            "centers": [[f(v) for v in z] for z in self.centers],
            "coefficients": [f(v) for v in self.coefficients],
            "diagnostics": {k: (f(v) if isinstance(v, float) else v)
                            for k, v in self.diagnostics.items()},
        }

    @classmethod
    def from_dict(cls, d):
        n = int(d["n"])
        return cls(np.asarray(d["centers"], dtype=float).reshape(-1, 2 * n),
                   np.asarray(d["coefficients"], dtype=float),
                   KernelParams(float(d["kernel"]["epsilon"]), float(d["kernel"]["c_k"])),
                   scheme=d["scheme"], h=float(d["h"]), kind=d["kind"], c=float(d["c"]),
                   normalisation_point=d.get("normalisation_point"),
                   diagnostics=d.get("diagnostics"))


def _f17(x):
    return float(format(float(x), ".17g"))


def model_eval(model, point, order=0):
    """Value (order 0), gradient (order 1) or Hessian (order 2) of a kernel model."""
    if order == 0:
        return model.value(point)
    if order == 1:
        return model.gradient(point)
    if order == 2:
        return model.hessian(point)
    raise ValueError(f"unsupported derivative order {order}")


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump({"model": model.to_dict()}, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        d = json.load(fh)
    if "flow" in d:
        return FlowMapGP.from_dict(d["flow"])
    return KernelModel.from_dict(d["model"])


# -- shared rows ---------------------------------------------------------------

def hypercube_corners(n):
    return np.array(list(itertools.product((0.0, 1.0), repeat=2 * n)))


def nontriviality_row(kernel, Z, n):
    """Corner-average of ``sum_a d k(v, Z) / d qdot^a`` over the unit hypercube."""
    G = kernel.gradient(hypercube_corners(n), Z)  # (2^{2n}, M, 2n)
    return G[:, :, n:].sum(axis=2).mean(axis=0)


def normalisation_row(kernel, Z, anchor):
    return kernel(anchor[None, :], Z)[0]


def nontriviality_value(field, n):
    """Quadrature of ``sum_a dL/dqdot^a`` over the unit hypercube corners."""
    return float(np.mean([field.gradient(v)[n:].sum() for v in hypercube_corners(n)]))


# -- least squares -------------------------------------------------------------

def default_rcond(shape):
    """Cutoff used by ``numpy.linalg.lstsq``: ``eps * max(rows, columns)``."""
    return float(np.finfo(float).eps * max(shape))


def solve_min_norm(A, b, rcond=None):
    """Minimum-norm least-squares solution by truncated SVD.

    Singular values below ``rcond * s_max`` are discarded; ``rcond=None``
    uses :func:`default_rcond`.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.size == 0:
        raise ValueError("empty system")
    if rcond is None:
        rcond = default_rcond(A.shape)
    try:
        U, s, Vt = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        U, s, Vt = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
    rank = int(np.sum(s > rcond * s[0])) if s.size and s[0] > 0 else 0
    B = Vt[:rank].T @ ((U[:, :rank].T @ b) / s[:rank])
    res = float(np.linalg.norm(A @ B - b))
    return SolveResult(B, rank, res, s)


# -- LSI -----------------------------------------------------------------------

def _pair_index(dataset):
    """Offsets mapping triple ``j`` of each trajectory to its left pair index."""
    left = []
    offset = 0
    for tr in dataset.trajectories:
        m = len(tr)
        left.extend(range(offset, offset + m - 2))
        offset += m - 1
    return np.asarray(left, dtype=int)


def lsi_centers(dataset, scheme="midpoint", h=None):
    """Evaluation points of the discrete Lagrangian over all consecutive pairs."""
    scheme = DiscreteScheme(scheme)
    h = dataset.h if h is None else h
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    a, b = dataset.pairs()
    pts = scheme.points(a, b, h)
    if scheme.tag == "midpoint":
        return pts[0]
    stacked = np.stack(pts, axis=1).reshape(-1, 2 * dataset.n)
    _, first = np.unique(stacked, axis=0, return_index=True)
    return stacked[np.sort(first)]


def _pair_gradients(kernel, scheme, a, b, h, Z, chunk=512):
    """Per pair, the kernel-feature gradients of ``L_d`` in both slots.

    Returns ``(G1, G2)`` each of shape ``(P, n, M)``.
    """
    n = a.shape[1]
    P, M = a.shape[0], Z.shape[0]
    G1 = np.zeros((P, n, M))
    G2 = np.zeros((P, n, M))
    for s in range(0, P, chunk):
        sl = slice(s, s + chunk)
        for (alpha, w), x in zip(scheme.nodes, scheme.points(a[sl], b[sl], h)):
            G = kernel.gradient(x, Z)  # (p, M, 2n)
            Gq = np.transpose(G[:, :, :n], (0, 2, 1))
            Gv = np.transpose(G[:, :, n:], (0, 2, 1))
            G1[sl] += w * (h * alpha * Gq - Gv)
            G2[sl] += w * (h * (1 - alpha) * Gq + Gv)
    return G1, G2


def assemble_lsi_system(dataset, config, Z=None):
    """Rows of the discrete Euler-Lagrange conditions plus the two scale rows.

    Each triple contributes ``n`` rows equal to the discrete Euler-Lagrange
    residual divided by ``h``; then one non-triviality row (rhs ``c``) and one
    normalisation row (rhs 0).
    """
    if dataset.n_triples < 1:
        raise ValueError("no data triples: trajectories need at least 3 snapshots")
    scheme = DiscreteScheme(config.scheme)
    kernel = config.kernel
    h, n = dataset.h, dataset.n
    if Z is None:
        Z = lsi_centers(dataset, scheme, h)
    a, b = dataset.pairs()
    G1, G2 = _pair_gradients(kernel, scheme, a, b, h, Z)
    left = _pair_index(dataset)
    rows = (G2[left] + G1[left + 1]) / h  # (K, n, M)
    K = rows.shape[0]
    A = np.empty((n * K + 2, Z.shape[0]))
    A[: n * K] = rows.reshape(n * K, -1)
    A[-2] = nontriviality_row(kernel, Z, n)
    A[-1] = normalisation_row(kernel, Z, config.anchor(n))
    rhs = np.zeros(n * K + 2)
    rhs[-2] = config.c
    return A, rhs, Z


def _finish(A, rhs, Z, config, kind, h, n, **extra):
    sol = solve_min_norm(A, rhs, config.rcond)
    body = A[:-2] @ sol.B - rhs[:-2]
    diag = {"rank": sol.rank, "residual": sol.residual,
            "del_residual_max": float(np.abs(body).max()) if body.size else 0.0,
            "rows": int(A.shape[0]), "unknowns": int(A.shape[1])}
    diag.update(extra)
    logger.info("%s trained: %d x %d system, rank %d, residual %.3e",
                kind, A.shape[0], A.shape[1], sol.rank, sol.residual)
    return KernelModel(Z, sol.B, KernelParams(config.epsilon, config.c_k), config.scheme, h,
                       kind, config.c, config.anchor(n), diag)


def train_lsi(dataset, config):
    A, rhs, Z = assemble_lsi_system(dataset, config)
    return _finish(A, rhs, Z, config, "lsi", dataset.h, dataset.n)


# -- LGP -----------------------------------------------------------------------

def assemble_lgp_system(states, config, chunk=256):
    """Continuous Euler-Lagrange rows at ``(q, qdot, qddot)`` samples.

    For sample ``j`` and center ``z_i`` the ``n`` rows are
    ``grad_q k - D_{qdot,q} k qdot_j - D_{qdot,qdot} k qddot_j``, where
    ``(D_{qdot,q} k)_{ab} = d^2 k / dqdot^a dq^b``.
    """
    if not states:
        raise ValueError("no states")
    for s in states:
        if s.qdot is None or s.qddot is None:
            raise ValueError("every state needs qdot and qddot")
    n = states[0].n
    Q = np.array([s.q for s in states])
    V = np.array([s.qdot for s in states])
    Acc = np.array([s.qddot for s in states])
    Z = np.concatenate([Q, V], axis=1)
    kernel = config.kernel
    K = Z.shape[0]
    R = np.empty((K, n, K))
    for s in range(0, K, chunk):
        sl = slice(s, s + chunk)
        G = kernel.gradient(Z[sl], Z)            # (p, K, 2n)
        H = kernel.hessian(Z[sl], Z)             # (p, K, 2n, 2n)
        blk = (G[:, :, :n]
               - np.einsum("pkab,pb->pka", H[:, :, n:, :n], V[sl])
               - np.einsum("pkab,pb->pka", H[:, :, n:, n:], Acc[sl]))
        R[sl] = np.transpose(blk, (0, 2, 1))
    A = np.empty((n * K + 2, K))
    A[: n * K] = R.reshape(n * K, K)
    A[-2] = nontriviality_row(kernel, Z, n)
    A[-1] = normalisation_row(kernel, Z, config.anchor(n))
    rhs = np.zeros(n * K + 2)
    rhs[-2] = config.c
    return A, rhs, Z


def lgp_states(dataset, mode="finite-difference", system=None, stencil="nested"):
    """Training samples for LGP.

    finite-difference: central differences at interior snapshots, with the
    given ``stencil`` (see :func:`central_differences`).
    exact: every stored position, Halton velocities on the dataset's velocity
    box (one Halton base per component) and the true
    acceleration of ``system`` (which must be velocity independent).
    """
    if mode == "finite-difference":
        states = []
        for tr in dataset.trajectories:
            if len(tr) >= (5 if stencil == "nested" else 3):
                states.extend(central_differences(tr, stencil))
        if not states:
            raise ValueError("no trajectory is long enough for the chosen stencil")
        return states
    if mode == "exact":
        if system is None:
            raise ValueError("exact LGP needs the benchmark system for accelerations")
        Q = np.concatenate([tr.positions for tr in dataset.trajectories])
        n = dataset.n
        if dataset.domain is not None:
            vb = [tuple(dataset.domain[n + i]) for i in range(n)]
        else:
            vb = [(-1.0, 1.0)] * n
        if n == 1:
            V = halton_velocities(Q.shape[0], vb[0])[:, None]
        else:
            lo, hi = np.array(vb).T
            V = lo + (hi - lo) * halton_sequence(Q.shape[0], n)
        return [State(q, v, system.acceleration(q)) for q, v in zip(Q, V)]
    raise ValueError(f"unknown LGP mode {mode!r}")


def train_lgp(dataset, config, mode="finite-difference", system=None, stencil="nested"):
    states = lgp_states(dataset, mode, system, stencil)
    A, rhs, Z = assemble_lgp_system(states, config)
    kind = "lgp" if mode == "finite-difference" else "lgp-exact"
    return _finish(A, rhs, Z, config, kind, dataset.h, dataset.n)


# -- GPFlow --------------------------------------------------------------------

class IllConditioned(RuntimeError):
    pass


class FlowMapGP:
    """Kernel ridge regression of ``(q, qdot)_j -> (q, qdot)_{j+1}``.

    Each output coordinate gets its own length scale, chosen from
    ``epsilons`` by the profiled log marginal likelihood.
    """

    def __init__(self, epsilons=(1.0, 2.0, 5.0, 10.0, 20.0), jitter=1e-10, h=None):
        self.epsilons = tuple(float(e) for e in epsilons)
        self.jitter = float(jitter)
        self.h = h

    @staticmethod
    def _log_ml(K, y, jitter):
        N = y.size
        try:
            cf = scipy.linalg.cho_factor(K + jitter * np.eye(N), lower=True)
        except np.linalg.LinAlgError:
            return -np.inf, None
        alpha = scipy.linalg.cho_solve(cf, y)
        scale = float(y @ alpha) / N
        if not scale > 0:
            return -np.inf, None
        logdet = 2 * np.log(np.diag(cf[0])).sum()
        return -0.5 * N * np.log(scale) - 0.5 * logdet - 0.5 * N * (1 + np.log(2 * np.pi)), alpha

    def fit(self, X, Y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
        self.X_ = X
        eps, alphas, lmls = [], [], []
        for j in range(Y.shape[1]):
            best = (-np.inf, None, None)
            for e in self.epsilons:
                K = RBFKernel(KernelParams(e, 1.0))(X, X)
                lml, alpha = self._log_ml(K, Y[:, j], self.jitter)
                if lml > best[0]:
                    best = (lml, e, alpha)
            if best[1] is None:
                raise IllConditioned("Gram matrix is not positive definite for any length scale")
            lmls.append(best[0])
            eps.append(best[1])
            alphas.append(best[2])
        self.epsilon_ = np.array(eps)
        self.alpha_ = np.stack(alphas, axis=1)
        self.log_marginal_likelihood_ = np.array(lmls)
        return self

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((X.shape[0], self.alpha_.shape[1]))
        for j, e in enumerate(self.epsilon_):
            out[:, j] = RBFKernel(KernelParams(e, 1.0))(X, self.X_) @ self.alpha_[:, j]
        return out

    def rollout(self, x0, steps, stop=None):
        """Iterate the learned map.

        Stops early if the state becomes non-finite or ``stop(x)`` is true.
        """
        xs = [np.asarray(x0, dtype=float)]
        for _ in range(steps):
            x = self.predict(xs[-1][None, :])[0]
            if not np.all(np.isfinite(x)):
                break
            xs.append(x)
            if stop is not None and stop(x):
                break
        return np.array(xs)

    def to_dict(self):
        f = _f17
        return {"kind": "gpflow", "h": None if self.h is None else f(self.h),
                "jitter": f(self.jitter), "epsilons": [f(e) for e in self.epsilons],
                "epsilon": [f(e) for e in self.epsilon_],
                "inputs": [[f(v) for v in x] for x in self.X_],
                "alpha": [[f(v) for v in a] for a in self.alpha_]}

    @classmethod
    def from_dict(cls, d):
        obj = cls(d["epsilons"], d["jitter"], d.get("h"))
        obj.X_ = np.asarray(d["inputs"], dtype=float)
        obj.alpha_ = np.asarray(d["alpha"], dtype=float).reshape(obj.X_.shape[0], -1)
        obj.epsilon_ = np.asarray(d["epsilon"], dtype=float)
        return obj

    @property
    def n(self):
        return self.X_.shape[1] // 2


def flow_map_samples(dataset):
    """Input/output pairs of consecutive central-difference states."""
    X, Y = [], []
    for tr in dataset.trajectories:
        if len(tr) < 4:
            continue
        st = central_differences(tr)
        z = np.array([np.concatenate([s.q, s.qdot]) for s in st])
        X.append(z[:-1])
        Y.append(z[1:])
    if not X:
        raise ValueError("flow-map data needs trajectories with at least 2 interior snapshots")
    return np.concatenate(X), np.concatenate(Y)


def train_gpflow(dataset, jitter=1e-10, epsilons=(1.0, 2.0, 5.0, 10.0, 20.0)):
    X, Y = flow_map_samples(dataset)
    return FlowMapGP(epsilons, jitter, dataset.h).fit(X, Y)


def save_flow_model(model, path):
    with open(path, "w") as fh:
        json.dump({"flow": model.to_dict()}, fh, sort_keys=True, indent=1)
        fh.write("\n")
