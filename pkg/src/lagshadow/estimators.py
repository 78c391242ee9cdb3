"""scikit-learn style wrappers around the learners.

Position data is passed to ``fit`` as an array of shape
``(n_trajectories, n_snapshots, n)`` (or a :class:`TrajectoryDataset`).
``predict`` takes initial states ``(q0, qdot0)`` row-wise and returns the
predicted positions.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_order, check_positions, check_states, check_steps
from .analysis import HamiltonianField
from .bea import motion_lagrangian
from .discretize import integrate
from .learn import FlowMapGP, TrainConfig, flow_map_samples, train_lgp, train_lsi


class _KernelLagrangianEstimator(BaseEstimator):

    def _config(self):
        return TrainConfig(epsilon=self.epsilon, c_k=self.c_k, scheme=self.scheme, c=self.c,
                           rcond=self.rcond)

    def _train(self, dataset):
        raise NotImplementedError

    def fit(self, X, y=None):
        """Learn a Lagrangian from position snapshots.

        Parameters
        ----------
        X : array-like of shape (n_trajectories, n_snapshots, n) or TrajectoryDataset
        y : ignored
        """
        ds = check_positions(X, self.h)
        check_order(self.bea_order)
        self.lagrangian_ = self._train(ds)
        self.n_features_in_ = ds.n
        self.h_ = ds.h
        self.field_ = motion_lagrangian(self.lagrangian_, self.bea_order)
        return self

    def predict(self, X, steps=1):
        """Integrate each initial state for ``steps`` steps.

        Returns
        -------
        positions : ndarray of shape (m, steps + 1, n)
            Rows after a Newton failure are NaN.
        """
        check_is_fitted(self, "lagrangian_")
        n = self.n_features_in_
        X = check_states(X, n)
        steps = check_steps(steps)
        out = np.full((X.shape[0], steps + 1, n), np.nan)
        for i, x in enumerate(X):
            tr = integrate(self.lagrangian_, x[:n], x[n:], self.h_, steps, self.scheme,
                           L_cont=self.field_)
            out[i, :len(tr)] = tr.positions
        return out

    def hamiltonian(self, X):
        """Modified energy ``H^[[k]]`` (``k = bea_order``) at the states ``X``."""
        check_is_fitted(self, "lagrangian_")
        X = check_states(X, self.n_features_in_)
        H = HamiltonianField(self.field_)
        return np.array([H.value(x) for x in X])


class LagrangianShadowIntegrator(_KernelLagrangianEstimator):
    """Learn an inverse modified Lagrangian from position-only trajectories.

    Parameters
    ----------
    h : float
        Time between snapshots.
    epsilon, c_k : float
        Length scale and amplitude of the radial basis kernel.
    scheme : {'midpoint', 'trapezoidal'}
    c : float
        Normalisation constant fixing the scale of the learned Lagrangian.
    rcond : float or None
        Relative singular value cutoff; None uses ``eps * max(rows, columns)``.
    bea_order : {0, 2}
        Truncation order of the correction used for initial momenta, velocity
        recovery and :meth:`hamiltonian`.

    Attributes
    ----------
    lagrangian_ : KernelModel
        The learned inverse modified Lagrangian.
    field_ : LagrangianField
        Its order-``bea_order`` correction, approximating the true Lagrangian.
    """

    def __init__(self, h=0.1, epsilon=1.0, c_k=1.0, scheme="midpoint", c=1.0, rcond=None,
                 bea_order=2):
        self.h = h
        self.epsilon = epsilon
        self.c_k = c_k
        self.scheme = scheme
        self.c = c
        self.rcond = rcond
        self.bea_order = bea_order

    def _train(self, dataset):
        return train_lsi(dataset, self._config())


class LagrangianGP(_KernelLagrangianEstimator):
    """Fit a Lagrangian to the continuous Euler-Lagrange equations.

    Velocities and accelerations come from central differences of the
    positions (``mode='finite-difference'``) or, with ``mode='exact'``, from the
    benchmark ``system``.  Parameters are as for
    :class:`LagrangianShadowIntegrator`, plus ``stencil`` for the differences.
    """

    def __init__(self, h=0.1, epsilon=1.0, c_k=1.0, scheme="midpoint", c=1.0, rcond=None,
                 bea_order=0, mode="finite-difference", system=None, stencil="nested"):
        self.h = h
        self.epsilon = epsilon
        self.c_k = c_k
        self.scheme = scheme
        self.c = c
        self.rcond = rcond
        self.bea_order = bea_order
        self.mode = mode
        self.system = system
        self.stencil = stencil

    def _train(self, dataset):
        return train_lgp(dataset, self._config(), self.mode, self.system, self.stencil)


class FlowMapRegressor(RegressorMixin, BaseEstimator):
    """Kernel regression of the one-step map ``(q, qdot)_j -> (q, qdot)_{j+1}``.

    ``fit(X, Y)`` takes state pairs directly; :meth:`fit_positions` builds them
    from position snapshots with central differences.
    """

    def __init__(self, epsilons=(1.0, 2.0, 5.0, 10.0, 20.0), jitter=1e-10):
        self.epsilons = epsilons
        self.jitter = jitter

    def fit(self, X, Y):
        X = check_states(X)
        Y = check_states(Y, X.shape[1] // 2)
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        self.model_ = FlowMapGP(self.epsilons, self.jitter).fit(X, Y)
        self.n_features_in_ = X.shape[1]
        return self

    def fit_positions(self, positions, h):
        ds = check_positions(positions, h)
        X, Y = flow_map_samples(ds)
        self.fit(X, Y)
        self.model_.h = ds.h
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(check_states(X, self.n_features_in_ // 2))

    def rollout(self, x0, steps):
        check_is_fitted(self, "model_")
        x0 = check_states(x0, self.n_features_in_ // 2)[0]
        return self.model_.rollout(x0, check_steps(steps))
