import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lakevortex.kernels import (SingularityError, check_green_bounds, grad_green, green,
                                green_disk, green_half_plane, random_disk_points,
                                regular_part_disk, selftest, symmetric_gradient_sum)


def test_half_plane_goldens():
    assert green_half_plane((0, 1), (0, 2)) == pytest.approx(math.log(9) / (4 * math.pi), abs=1e-10)
    assert green_half_plane((0, 1), (0, 2)) == pytest.approx(0.17485, abs=1e-5)
    assert green_half_plane((0, 1), (5, 1)) == pytest.approx(math.log(29 / 25) / (4 * math.pi),
                                                             abs=1e-10)
    assert green_half_plane((0, 1), (0.3, 1e-14)) == pytest.approx(0.0, abs=1e-13)


def test_disk_goldens():
    assert green_disk((0.5, 0), (0, 0)) == pytest.approx(math.log(2) / (2 * math.pi), abs=1e-10)
    assert green_disk((0.5, 0), (0, 0)) == pytest.approx(0.1103178, abs=1e-7)
    assert green_disk((1.0, 0), (0.2, 0.3)) == 0.0
    assert regular_part_disk((0.5, 0), (0, 0)) == pytest.approx(0.0, abs=1e-15)


def test_symmetric_gradient_goldens():
    s = symmetric_gradient_sum("half_plane", (0, 1), (0, 2))
    assert s[0] == 0.0 and s[1] == pytest.approx(1 / (3 * math.pi), abs=1e-12)
    assert np.all(symmetric_gradient_sum("disk", (0.5, 0), (-0.5, 0)) == 0.0)


def test_singular_pair_rejected():
    for kind in ("half_plane", "disk"):
        with pytest.raises(SingularityError):
            green(kind, (0.2, 0.3), (0.2, 0.3))
        with pytest.raises(SingularityError):
            symmetric_gradient_sum(kind, (0.2, 0.3), (0.2, 0.3))


def test_points_outside_rejected():
    with pytest.raises(ValueError):
        green_half_plane((0, -1), (0, 1))
    with pytest.raises(ValueError):
        green_disk((1.2, 0), (0, 0))


def _pairs(kind, rng, n, sep):
    if kind == "disk":
        xs, ys = random_disk_points(rng, 4 * n, 0.95), random_disk_points(rng, 4 * n, 0.95)
    else:
        xs = np.stack([rng.uniform(-2, 2, 4 * n), rng.uniform(0.05, 2, 4 * n)], axis=-1)
        ys = np.stack([rng.uniform(-2, 2, 4 * n), rng.uniform(0.05, 2, 4 * n)], axis=-1)
    keep = np.linalg.norm(xs - ys, axis=-1) > sep
    return xs[keep][:n], ys[keep][:n]


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(["half_plane", "disk"]), seed=st.integers(0, 2 ** 31))
def test_symmetric_and_nonnegative(kind, seed):
    xs, ys = _pairs(kind, np.random.default_rng(seed), 50, 1e-3)
    g = green(kind, xs, ys)
    assert np.all(g >= 0)
    assert np.allclose(g, green(kind, ys, xs), rtol=1e-13, atol=0)


@pytest.mark.parametrize("kind", ["half_plane", "disk"])
def test_gradient_matches_finite_differences(kind, rng):
    xs, ys = _pairs(kind, rng, 100, 0.1)
    h = 1e-6
    fd = np.stack([(green(kind, xs + e, ys) - green(kind, xs - e, ys)) / (2 * h)
                   for e in (np.array([h, 0]), np.array([0, h]))], axis=-1)
    got = grad_green(kind, xs, ys)
    rel = np.linalg.norm(got - fd, axis=-1) / np.linalg.norm(got, axis=-1)
    assert np.max(rel) < 1e-5


@pytest.mark.parametrize("kind", ["half_plane", "disk"])
def test_symmetric_sum_matches_gradients(kind, rng):
    xs, ys = _pairs(kind, rng, 100, 0.05)
    want = grad_green(kind, xs, ys) + grad_green(kind, ys, xs)
    assert np.allclose(symmetric_gradient_sum(kind, xs, ys), want, atol=1e-12)
    if kind == "half_plane":
        assert np.all(symmetric_gradient_sum(kind, xs, ys)[:, 0] == 0.0)


@pytest.mark.parametrize("kind,y", [("half_plane", (0.1, 0.7)), ("disk", (0.2, -0.3))])
def test_five_point_laplacian_vanishes_at_second_order(kind, y):
    y = np.array(y)
    base = np.array([[0.6, 0.5], [-0.3, 0.2], [0.1, 0.35]])
    errs = []
    for h in (0.02, 0.01, 0.005):
        lap = sum(green(kind, base + e, np.broadcast_to(y, base.shape)) for e in
                  (np.array([h, 0]), np.array([-h, 0]), np.array([0, h]), np.array([0, -h])))
        lap = (lap - 4 * green(kind, base, np.broadcast_to(y, base.shape))) / h ** 2
        errs.append(np.max(np.abs(lap)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_symmetric_sum_tangential_part_bounded_near_boundary():
    # pairs sliding into the wall with separation equal to their depth
    for d in (1e-1, 1e-2, 1e-3, 1e-4):
        x, y = np.array([0.0, d]), np.array([d, d])
        assert symmetric_gradient_sum("half_plane", x, y)[0] == 0.0
        assert np.linalg.norm(grad_green("half_plane", x, y)) * d == pytest.approx(
            math.sqrt(5) / (5 * math.pi), rel=1e-12)
        xd, yd = np.array([1 - d, 0.0]), (1 - d) * np.array([math.cos(d), math.sin(d)])
        mid = (xd + yd) / np.linalg.norm(xd + yd)
        tangent = np.array([-mid[1], mid[0]])
        s = symmetric_gradient_sum("disk", xd, yd)
        sep = np.linalg.norm(xd - yd)
        assert abs(s @ tangent) < 1e-12
        assert np.linalg.norm(grad_green("disk", xd, yd)) * sep > 0.14


def test_bounds_report_disk(rng):
    xs, ys = random_disk_points(rng, 10_000, 0.999), random_disk_points(rng, 10_000, 0.999)
    rep = check_green_bounds("disk", xs, ys)
    assert rep.log_bound_holds and rep.nonnegative
    assert rep.sharp_bound_constant <= 4.0
    again = check_green_bounds("disk", random_disk_points(rng, 10_000, 0.999),
                               random_disk_points(rng, 10_000, 0.999))
    c1, c2 = rep.gradient_bound_constant, again.gradient_bound_constant
    assert np.isfinite(c1) and abs(c1 - c2) <= 0.2 * c1


def test_bounds_report_log_golden():
    rep = check_green_bounds("disk", [(0.5, 0.0)], [(0.0, 0.0)])
    assert rep.log_bound_min_margin == pytest.approx(math.log(4) / (2 * math.pi) - 0.1103178,
                                                     abs=1e-6)


def test_bounds_report_counts_degenerate_pairs():
    rep = check_green_bounds("half_plane", [(0, 1), (0, 1), (1, 0)], [(0, 2), (0, 1), (0, 1)])
    assert rep.n_pairs == 1 and rep.n_skipped == 2 and rep.log_bound_min_margin is None


def test_selftest_passes():
    rows = selftest()
    assert rows and all(ok for _, ok, _ in rows)
