import numpy as np
import pytest

from lagshadow.analysis import (ContourGrid, FunctionOnTQ, GridSpec, HamiltonianField,
                                as_scalar_field, contour_grid, divergence_time, energy_trace,
                                nu_metric, pendulum_grid)


def ref_H(x):
    return 0.5 * x[1] ** 2 - np.cos(x[0])


def test_hamiltonian_field_matches_reference(pendulum):
    H = HamiltonianField(pendulum.lagrangian())
    for x in np.random.default_rng(0).uniform(-1, 1, size=(5, 2)):
        assert H.value(x) == pytest.approx(ref_H(x), abs=1e-12)
        np.testing.assert_allclose(H.gradient(x), [np.sin(x[0]), x[1]], atol=1e-10)


def test_nu_identical_is_zero(pendulum):
    H = HamiltonianField(pendulum.lagrangian())
    r = nu_metric(H, H, pendulum_grid(10))
    assert r.nu == 0.0 and r.used + r.skipped == 100


def test_nu_scale_invariant():
    g = GridSpec(2, {0: (-1, 1, 7), 1: (-1, 1, 7)})
    f = FunctionOnTQ(ref_H, 1)
    r = nu_metric(f, FunctionOnTQ(lambda x: 3.7 * ref_H(x) + 2.0, 1), g)
    assert r.nu <= 1e-8


def test_nu_orthogonal_fields_give_one():
    g = GridSpec(2, {0: (0.1, 1, 5), 1: (0.1, 1, 5)})
    a = FunctionOnTQ(lambda x: x[0], 1, grad=lambda x: np.array([1.0, 0.0]))
    b = FunctionOnTQ(lambda x: x[1], 1, grad=lambda x: np.array([0.0, 1.0]))
    assert nu_metric(a, b, g).nu == pytest.approx(1.0)


def test_nu_skips_flat_points():
    g = GridSpec(2, {0: (-1, 1, 3), 1: (-1, 1, 3)})
    f = FunctionOnTQ(lambda x: x @ x, 1, grad=lambda x: 2 * x)
    r = nu_metric(f, f, g)
    assert r.skipped == 1 and r.used == 8


def test_nu_rejects_lagrangians(pendulum):
    with pytest.raises(TypeError):
        nu_metric(pendulum.lagrangian(), pendulum.lagrangian(), pendulum_grid(3))
    with pytest.raises(ValueError):
        as_scalar_field(lambda x: 0.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(2, {0: (0, 1, 1), 1: (0, 1, 3)})
    with pytest.raises(ValueError):
        GridSpec(2, {0: (1, 0, 3), 1: (0, 1, 3)})
    with pytest.raises(ValueError):
        GridSpec(4, {0: (0, 1, 3)}, {1: 0.0})
    g = GridSpec(4, {1: (0, 1, 3), 3: (0, 2, 2)}, {0: 0.5, 2: -1})
    pts = g.points()
    assert pts.shape == (6, 4)
    np.testing.assert_array_equal(pts[:, 0], 0.5)
    np.testing.assert_array_equal(pts[:2, 1], 0.0)
    np.testing.assert_array_equal(pts[:2, 3], [0.0, 2.0])


def test_energy_trace_band_and_drift():
    t = np.arange(100)
    tr = energy_trace(lambda x: x[0] * 0.0 + np.sin(x[0]), t[:, None] * 0.1, np.zeros(100), 0.5)
    assert tr.t[-1] == pytest.approx(49.5)
    assert not tr.has_drift
    # a jump halfway: fitted slope times duration is 1.5 times the band
    step = energy_trace(lambda x: x[0], (t >= 50) * 1e-3, np.zeros(100), 1.0)
    assert step.has_drift and step.band == pytest.approx(1e-3)
    with pytest.raises(ValueError):
        energy_trace(ref_H, t, None, 1.0)


def test_energy_trace_csv(tmp_path):
    tr = energy_trace(ref_H, np.linspace(0, 1, 4), np.ones(4), 0.1)
    tr.to_csv(tmp_path / "e.csv")
    rows = (tmp_path / "e.csv").read_text().splitlines()
    assert rows[0] == "t,H" and len(rows) == 5
    assert float(rows[2].split(",")[1]) == tr.H[1]


def test_contour_grid_orientation_and_round_trip(tmp_path):
    g = GridSpec(2, {0: (0, 1, 3), 1: (0, 2, 4)})
    f = FunctionOnTQ(lambda x: x[0] + 10 * x[1], 1)
    c = contour_grid(f, g)
    assert c.values.shape == (4, 3)
    assert c.values[2, 1] == pytest.approx(c.x[1] + 10 * c.y[2])
    c.to_csv(tmp_path / "c.csv")
    back = ContourGrid.from_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(back.values, c.values)
    np.testing.assert_array_equal(back.x, c.x)


def test_contour_components():
    g = GridSpec(2, {0: (-2, 2, 41), 1: (-1, 1, 21)})
    wells = contour_grid(FunctionOnTQ(lambda x: (x[0] ** 2 - 1) ** 2 + x[1] ** 2, 1), g)
    assert wells.level_components(0.5) == 2
    assert wells.level_components(2.0) == 1
    with pytest.raises(ValueError):
        contour_grid(FunctionOnTQ(lambda x: 0.0, 2), GridSpec(4, {i: (0, 1, 2) for i in range(3)},
                                                              {3: 0.0}))


def test_divergence_time():
    q = np.array([[0.0, 0.0], [1.0, 0.0], [1.5, 1.5], [0.1, 0.0]])
    assert divergence_time(q, 2.0, 0.1) == pytest.approx(0.2)
    assert divergence_time(q, 5.0, 0.1) is None
    assert divergence_time(np.array([0.0, np.nan]), 1.0, 1.0) == 1.0
    with pytest.raises(ValueError):
        divergence_time(q, 0.0, 0.1)
