import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lagshadow import FlowMapRegressor, LagrangianGP, LagrangianShadowIntegrator


@pytest.fixture(scope="module")
def positions(small_pendulum_data):
    return np.stack([t.positions for t in small_pendulum_data.trajectories])


def test_get_params_and_clone():
    est = LagrangianShadowIntegrator(h=0.5, epsilon=5.0, rcond=1e-10)
    p = est.get_params()
    assert p["epsilon"] == 5.0 and p["rcond"] == 1e-10 and p["bea_order"] == 2
    c = clone(est)
    assert c.get_params() == p and c is not est
    est.set_params(epsilon=3.0)
    assert est.epsilon == 3.0
    assert LagrangianGP().get_params()["stencil"] == "nested"
    assert "LagrangianShadowIntegrator(" in repr(est)


def test_fit_predict(positions):
    est = LagrangianShadowIntegrator(h=0.5, epsilon=5.0).fit(positions)
    assert est.n_features_in_ == 1 and est.lagrangian_.centers.shape == (40 * 5, 2)
    out = est.predict([[0.3, 0.0], [-0.2, 0.1]], steps=4)
    assert out.shape == (2, 5, 1)
    np.testing.assert_allclose(out[:, 0, 0], [0.3, -0.2])
    assert np.all(np.isfinite(out))
    H = est.hamiltonian([[0.3, 0.0]])
    assert H.shape == (1,) and np.isfinite(H[0])


def test_fit_accepts_dataset(small_pendulum_data):
    est = LagrangianGP(h=0.5, epsilon=5.0).fit(small_pendulum_data)
    assert est.lagrangian_.kind == "lgp" and est.h_ == 0.5


def test_lgp_exact_mode(positions, pendulum):
    est = LagrangianGP(h=0.5, epsilon=5.0, mode="exact", system=pendulum).fit(positions)
    assert est.lagrangian_.kind == "lgp-exact"


def test_not_fitted():
    with pytest.raises(NotFittedError):
        LagrangianShadowIntegrator().predict([[0.0, 0.0]])


def test_input_validation(positions):
    est = LagrangianShadowIntegrator(h=0.5, epsilon=5.0)
    with pytest.raises(ValueError):
        est.fit(np.zeros((2, 3, 1, 1)))
    bad = positions.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        est.fit(bad)
    with pytest.raises(ValueError):
        LagrangianShadowIntegrator(h=-1.0).fit(positions)
    with pytest.raises(ValueError):
        LagrangianShadowIntegrator(h=0.5, bea_order=1).fit(positions)
    est.fit(positions)
    with pytest.raises(ValueError):
        est.predict([[0.0, 0.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        est.predict([[0.0, 0.0]], steps=-1)


def test_two_dimensional_input_is_one_degree_of_freedom(positions):
    a = LagrangianShadowIntegrator(h=0.5, epsilon=5.0).fit(positions[:, :, 0])
    b = LagrangianShadowIntegrator(h=0.5, epsilon=5.0).fit(positions)
    np.testing.assert_array_equal(a.lagrangian_.coefficients, b.lagrangian_.coefficients)


def test_flow_map_regressor(positions):
    reg = FlowMapRegressor().fit_positions(positions, 0.5)
    assert reg.n_features_in_ == 2
    r = reg.rollout([0.3, 0.0], 3)
    assert r.shape == (4, 2)
    X = np.random.default_rng(0).uniform(-1, 1, size=(30, 2))
    Y = X @ np.array([[0.9, -0.1], [0.1, 0.9]])
    reg2 = FlowMapRegressor(jitter=1e-10).fit(X, Y)
    assert reg2.score(X, Y) > 0.999
    with pytest.raises(ValueError):
        FlowMapRegressor().fit(X, Y[:5])
