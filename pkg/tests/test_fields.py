import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lakevortex.fields import METHODS, ScalarField, interpolate
from lakevortex.geometry import build_grid

from conftest import DOMAINS, observed_orders, smooth_test_function


def interior_points(kind, rng, n=400):
    spec = DOMAINS[kind]
    pts = rng.uniform(-1, 1, size=(4 * n, 2))
    return pts[spec.contains(pts)][:n]


@pytest.mark.parametrize("kind", sorted(DOMAINS))
@pytest.mark.parametrize("method", sorted(METHODS))
@pytest.mark.parametrize("n", [8, 24])
def test_reproduces_node_values(kind, method, n):
    grid = build_grid(DOMAINS[kind], (n, n) if kind == "rectangle" else n)
    v = grid.sample(smooth_test_function)
    got = interpolate(grid, v, grid.points, method=method)
    assert np.max(np.abs(got - v)) < 1e-12


@pytest.mark.parametrize("kind", sorted(DOMAINS))
@pytest.mark.parametrize("method,order", [("linear", 1.8), ("cubic", 3.5), ("spline3", 3.5),
                                          ("spline5", 3.5)])
def test_convergence_order(kind, method, order, rng):
    pts = interior_points(kind, rng)
    exact = smooth_test_function(pts[:, 0], pts[:, 1])
    errs = []
    for n in (16, 32, 64):
        grid = build_grid(DOMAINS[kind], n)
        got = interpolate(grid, grid.sample(smooth_test_function), pts, method=method)
        errs.append(np.max(np.abs(got - exact)))
    assert observed_orders(errs)[-1] >= order


def test_pole_crossing_is_smooth():
    grid = build_grid(DOMAINS["disk"], 32)
    v = grid.sample(smooth_test_function)
    s = np.linspace(-0.1, 0.1, 41)
    pts = np.stack([s * 0.6, s * 0.8], axis=-1)
    for method in ("cubic", "spline5"):
        got = interpolate(grid, v, pts, method=method)
        assert np.max(np.abs(got - smooth_test_function(pts[:, 0], pts[:, 1]))) < 1e-5


def test_batched_values_and_shapes(rng):
    grid = build_grid(DOMAINS["rectangle"], 20)
    v = np.stack([grid.sample(smooth_test_function), grid.x ** 2])
    pts = interior_points("rectangle", rng, 12).reshape(3, 4, 2)
    out = interpolate(grid, v, pts)
    assert out.shape == (2, 3, 4)
    assert np.allclose(out[1], pts[..., 0] ** 2, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(kind=st.sampled_from(sorted(DOMAINS)), seed=st.integers(0, 2 ** 31),
       mode=st.sampled_from([True, "lower"]))
def test_clipping_bounds(kind, seed, mode):
    rng = np.random.default_rng(seed)
    grid = build_grid(DOMAINS[kind], 16)
    v = grid.sample(lambda x, y: rng.random(x.shape))
    pts = interior_points(kind, rng, 200)
    out, raw = interpolate(grid, v, pts, monotone=mode, method="spline5", return_raw=True)
    assert out.min() >= v.min() - 1e-14
    if mode is True:
        assert out.max() <= v.max() + 1e-14
    else:
        assert np.all(out >= raw) and np.all((out == raw) | (out > raw))


def test_nonnegative_data_stays_nonnegative_with_lower_clip(rng):
    grid = build_grid(DOMAINS["disk"], 32)
    v = grid.sample(lambda x, y: np.maximum(0, 1 - ((x - 0.3) ** 2 + y ** 2) / 0.01))
    pts = interior_points("disk", rng, 2000)
    assert interpolate(grid, v, pts, monotone="lower", method="spline5").min() >= 0
    assert interpolate(grid, v, pts, monotone=False, method="spline5").min() < 0


def test_bad_arguments():
    grid = build_grid(DOMAINS["disk"], 16)
    with pytest.raises(ValueError):
        interpolate(grid, grid.x, [[0.1, 0.1]], method="sinc")
    with pytest.raises(ValueError):
        interpolate(grid, grid.x, [[0.1, 0.1]], monotone="upper")


def test_scalar_field_contract():
    grid = build_grid(DOMAINS["rectangle"], 16)
    with pytest.raises(ValueError):
        ScalarField(grid, np.zeros((3, 3)))
    bad = np.zeros(grid.shape)
    bad[2, 2] = np.nan
    with pytest.raises(ValueError):
        ScalarField(grid, bad)
    f = ScalarField.from_function(grid, lambda x, y: 1 + 0 * x)
    assert f.integral() == pytest.approx(2.0, abs=1e-13)
    assert (2 * f + f).integral() == pytest.approx(6.0, abs=1e-12)
    assert f(np.array([[0.1, 0.2]]))[0] == pytest.approx(1.0, abs=1e-14)
