import numpy as np
import pytest
from scipy.integrate import solve_ivp

from lagshadow.discretize import (DiscreteScheme, NonConvergence, del_residual,
                                  discrete_lagrangian, discrete_momentum,
                                  grad_discrete_lagrangian, initial_step, integrate,
                                  read_trajectory_csv, recover_velocity, step,
                                  write_trajectory_csv)
from lagshadow.fields import FunctionField, MechanicalLagrangian

SCHEMES = ("midpoint", "trapezoidal")


def exact_pendulum(q0, v0, times):
    sol = solve_ivp(lambda t, y: [y[1], -np.sin(y[0])], (0, max(times)), [q0, v0],
                    t_eval=times, rtol=1e-13, atol=1e-15, method="DOP853")
    return sol.y


@pytest.mark.parametrize("scheme", SCHEMES)
def test_discrete_lagrangian_of_constant(constant_field, scheme):
    assert discrete_lagrangian(constant_field, scheme, [0.2], [0.7], 0.3) == pytest.approx(0.3)


def test_discrete_lagrangian_examples(free_particle, pendulum):
    for scheme in SCHEMES:
        val = discrete_lagrangian(free_particle, scheme, [0.1], [0.4], 0.5)
        assert val == pytest.approx(0.3 ** 2 / (2 * 0.5), rel=1e-14)
    L = pendulum.lagrangian()
    val = discrete_lagrangian(L, "midpoint", [0.0], [0.5], 0.5)
    assert val == pytest.approx(0.5 * (0.5 + np.cos(0.25)), rel=1e-14)


def test_grad_discrete_lagrangian(free_particle, pendulum):
    g1 = grad_discrete_lagrangian(free_particle, "midpoint", [0.1], [0.4], 0.5, 1)
    g2 = grad_discrete_lagrangian(free_particle, "midpoint", [0.1], [0.4], 0.5, 2)
    assert g1[0] == pytest.approx(-0.3 / 0.5) and g2[0] == pytest.approx(0.3 / 0.5)
    L = pendulum.lagrangian()
    q0, q1, h, e = 0.3, 0.55, 0.5, 1e-6
    for scheme in SCHEMES:
        fd1 = (discrete_lagrangian(L, scheme, [q0 + e], [q1], h)
               - discrete_lagrangian(L, scheme, [q0 - e], [q1], h)) / (2 * e)
        fd2 = (discrete_lagrangian(L, scheme, [q0], [q1 + e], h)
               - discrete_lagrangian(L, scheme, [q0], [q1 - e], h)) / (2 * e)
        assert grad_discrete_lagrangian(L, scheme, [q0], [q1], h, 1)[0] == pytest.approx(fd1, abs=1e-6)
        assert grad_discrete_lagrangian(L, scheme, [q0], [q1], h, 2)[0] == pytest.approx(fd2, abs=1e-6)
    q = np.array([0.4])
    s = (grad_discrete_lagrangian(L, "midpoint", q, q, h, 1)
         + grad_discrete_lagrangian(L, "midpoint", q, q, h, 2))
    np.testing.assert_allclose(s, h * L.gradient(np.array([0.4, 0.0]))[:1], rtol=1e-14)
    with pytest.raises(ValueError):
        grad_discrete_lagrangian(L, "midpoint", q, q, h, 3)


def test_del_residual_trivial(free_particle, constant_field):
    assert del_residual(free_particle, "midpoint", [0.1], [0.3], [0.5], 0.2)[0] == pytest.approx(0, abs=1e-14)
    assert del_residual(constant_field, "trapezoidal", [0.1], [0.9], [-0.4], 0.2)[0] == 0.0


def test_del_residual_order_on_exact_flow(pendulum):
    L = pendulum.lagrangian()
    hs = [0.4, 0.2, 0.1, 0.05]
    res = []
    for h in hs:
        y = exact_pendulum(0.3, 0.4, [0.0, h, 2 * h])
        res.append(abs(del_residual(L, "midpoint", [y[0, 0]], [y[0, 1]], [y[0, 2]], h)[0]))
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert orders.min() >= 2.7


def test_step_free_particle_one_iteration(free_particle):
    q, info = step(free_particle, "midpoint", [0.1], [0.3], 0.2, return_info=True)
    assert q[0] == pytest.approx(0.5, abs=1e-15)
    assert info["iterations"] <= 1


def test_step_harmonic_closed_form(harmonic):
    # midpoint DEL for L = (v^2 - q^2)/2 reads
    # (q2 - 2 q1 + q0) / h^2 = -(q0 + 2 q1 + q2) / 4, linear in q2
    h, a, b = 0.3, 0.2, 0.35
    k = h * h / 4
    closed = (2 * b - a - k * (a + 2 * b)) / (1 + k)
    got = step(harmonic, "midpoint", [a], [b], h)[0]
    assert got == pytest.approx(closed, abs=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_step_residual_below_tolerance(pendulum, henon, scheme):
    for system, q0, v0 in ((pendulum, [0.3], [0.2]), (henon, [0.2, 0.1], [0.1, -0.2])):
        L = system.lagrangian()
        tr = integrate(L, q0, v0, 0.1, 50, scheme)
        assert tr.failure is None
        P = tr.positions
        for j in range(1, len(P) - 1):
            assert np.abs(del_residual(L, scheme, P[j - 1], P[j], P[j + 1], 0.1)).max() <= 1e-12


def test_initial_step_examples(free_particle, pendulum):
    q1, p0 = initial_step(free_particle, free_particle, [0.2], [0.7], 0.1)
    assert q1[0] == pytest.approx(0.2 + 0.07, abs=1e-15) and p0[0] == 0.7
    _, p0 = initial_step(pendulum.lagrangian(), pendulum.lagrangian(), [0.3], [0.0], 0.5)
    assert p0[0] == 0.0


def test_discrete_momentum_consistency(free_particle, pendulum):
    assert discrete_momentum(free_particle, "midpoint", [0.1], [0.4], 0.5)[0] == pytest.approx(0.6)
    L = pendulum.lagrangian()
    P = integrate(L, [0.3], [0.1], 0.2, 20).positions
    for j in range(1, len(P) - 1):
        p = discrete_momentum(L, "midpoint", P[j - 1], P[j], 0.2)
        m = -grad_discrete_lagrangian(L, "midpoint", P[j], P[j + 1], 0.2, 1)
        np.testing.assert_allclose(p, m, atol=1e-12)


def test_recover_velocity_examples(free_particle, pendulum):
    assert recover_velocity(free_particle, [0.3], [0.8])[0] == pytest.approx(0.8)
    for m in (0.5, 2.0):
        L = MechanicalLagrangian(1, lambda q: 0.0, lambda q: np.zeros(1),
                                 lambda q: np.zeros((1, 1)), mass=m)
        assert recover_velocity(L, [0.0], [0.6])[0] == pytest.approx(0.6 / m, rel=1e-14)
    L = pendulum.lagrangian()
    for v in (-1.0, 0.3, 0.9):
        p = L.momentum([0.4], [v])
        assert abs(recover_velocity(L, [0.4], p, guess=[0.0])[0] - v) <= 1e-10


def test_recover_velocity_nonlinear_round_trip():
    L = FunctionField(lambda q, v: np.cosh(v[0]) + 0.1 * v[0] ** 4 - np.cos(q[0]), 1)
    for v in (-0.8, 0.2, 1.1):
        p = L.momentum([0.1], [v])
        assert abs(recover_velocity(L, [0.1], p, guess=[0.0])[0] - v) <= 1e-8


def test_midpoint_global_order(pendulum):
    L = pendulum.lagrangian()
    T = 2.0
    errs = []
    hs = [0.2, 0.1, 0.05, 0.025]
    y = exact_pendulum(0.5, 0.0, [T])
    for h in hs:
        tr = integrate(L, [0.5], [0.0], h, int(round(T / h)))
        errs.append(abs(tr.positions[-1, 0] - y[0, -1]))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders >= 1.8) & (orders <= 2.2))


def test_integrate_stops_and_reports_failure():
    L = FunctionField(lambda q, v: 0.5 * v[0] ** 2 - 1e3 * q[0] ** 4, 1)
    tr = integrate(L, [0.5], [10.0], 1.0, 20, maxiter=3)
    assert tr.failure is not None
    assert isinstance(tr.failure, (NonConvergence, Exception))
    assert len(tr) < 21


def test_integrate_stop_predicate(free_particle):
    tr = integrate(free_particle, [0.0], [1.0], 0.5, 100, stop=lambda q: abs(q[0]) > 2)
    assert len(tr) == 6 and tr.positions[-1, 0] == pytest.approx(2.5)


def test_scheme_validation():
    with pytest.raises(ValueError):
        DiscreteScheme("leapfrog")
    assert DiscreteScheme("midpoint") == DiscreteScheme(DiscreteScheme("midpoint"))


def test_trajectory_csv_round_trip(tmp_path, pendulum):
    tr = integrate(pendulum.lagrangian(), [0.3], [0.0], 0.5, 13, with_velocities=True)
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, tr)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,q1,qd1,p1" and len(lines) == 15
    back = read_trajectory_csv(path)
    np.testing.assert_array_equal(back.positions, tr.positions)
    np.testing.assert_array_equal(back.velocities, tr.velocities)
    assert back.h == 0.5
