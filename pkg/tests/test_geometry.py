import warnings

import numpy as np
import pytest

from bbmlab.geometry import (
    EXTENSION,
    NON_EXTENSION,
    UNKNOWN,
    Ball,
    Box,
    EmptyDomain,
    FullSpace,
    InnerRegionParams,
    csg,
    cusp_domain,
    make_primitive,
    omega_lambda,
    sample_inside,
    smooth_inner_approximation,
)


def grid(lo, hi, n=81):
    ax = np.linspace(lo, hi, n)
    return np.stack([g.ravel() for g in np.meshgrid(ax, ax, indexing="ij")], axis=-1)


def test_primitives():
    b = make_primitive("ball", [0, 0], 1)
    assert b.contains([0.5, 0]) and b.boundary_distance([0.5, 0]) == pytest.approx(0.5)
    assert not b.contains([1.0, 0.0])  # open set: boundary is outside
    box = make_primitive("box", [0, 0], [1, 1])
    assert box.boundary_distance([0.2, 0.5]) == pytest.approx(0.2)
    assert b.extension_flag == EXTENSION
    with pytest.raises(ValueError):
        make_primitive("ball", [0, 0], 0)
    with pytest.raises(ValueError):
        make_primitive("box", [0, 0], [1, 0])
    hs = make_primitive("halfspace", [1, 0], 0.5)
    assert hs.contains([0.2, 7]) and not hs.contains([0.6, 0]) and not hs.bounded


def test_csg_examples():
    d = csg("difference", Box([-1, -1], [1, 1]), Ball([0, 0], 0.5))
    assert d.contains([0.75, 0]) and not d.contains([0.25, 0])
    assert not d.contains([0.5, 0])  # closure of the ball is removed
    c = csg("complement_of_closure", Ball([0, 0], 1))
    assert c.contains([2, 0]) and not c.contains([1, 0])
    assert d.extension_flag == UNKNOWN
    with pytest.raises(ValueError):
        csg("union", Ball([0], 1), Ball([0, 0], 1))


def test_csg_soundness(rng):
    a, b = Ball([0.2, 0], 0.7), Box([-0.5, -0.3], [0.6, 0.9])
    pts = rng.uniform(-1.2, 1.2, (10_000, 2))
    ia, ib = a.contains(pts), b.contains(pts)
    assert np.array_equal(csg("union", a, b).contains(pts), ia | ib)
    assert np.array_equal(csg("intersection", a, b).contains(pts), ia & ib)
    closed_b = b.depth(pts) >= 0
    assert np.array_equal(csg("difference", a, b).contains(pts), ia & ~closed_b)


def test_composite_distance_is_lower_bound(rng):
    d = csg("difference", Box([-1, -1], [1, 1]), csg("union", Ball([-0.4, 0], 0.3),
                                                    Ball([0.4, 0.1], 0.25)))
    pts = sample_inside(d, 2000, rng)
    # empirical boundary distance from dense rays
    t = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    dirs = np.stack([np.cos(t), np.sin(t)], -1)
    steps = np.linspace(0, 2, 801)[1:]
    for x in pts[:200]:
        ray = x + steps[None, :, None] * dirs[:, None, :]
        out = ~d.contains(ray.reshape(-1, 2)).reshape(ray.shape[:2])
        first = np.where(out.any(1), steps[np.argmax(out, 1)], np.inf)
        assert d.boundary_distance(x) <= first.min() + 2.5e-3


def test_cusp_domain():
    d = cusp_domain()
    assert not d.contains([-0.5, 0.0])
    assert d.contains([-0.5, 0.1])
    assert d.contains([0.5, 0.0]) and not d.contains([2.0, 0.0])
    assert not d.contains([-0.5, 0.5**7 * 0.99])
    assert d.extension_flag == NON_EXTENSION


def test_omega_lambda_examples(rng):
    pts = grid(-1.5, 1.5)
    ol = omega_lambda(Ball([0, 0], 1), 0.5)
    assert np.array_equal(ol.contains(pts), Ball([0, 0], 0.5).contains(pts))
    box = omega_lambda(Box([0, 0], [1, 1]), 0.1)
    p2 = grid(-0.05, 1.05, 113)
    assert np.array_equal(box.contains(p2), Box([0.1, 0.1], [0.9, 0.9]).contains(p2))
    full = omega_lambda(FullSpace(2), 0.25)
    p3 = grid(-5, 5)
    assert np.array_equal(full.contains(p3), Ball([0, 0], 4).contains(p3))
    assert full.bounded


def test_omega_lambda_monotone_and_exhausting(rng):
    d = csg("difference", Box([-1, -1], [1, 1]), Ball([0.3, 0.2], 0.3))
    pts = rng.uniform(-1, 1, (5000, 2))
    lams = [0.4, 0.2, 0.1, 0.05, 0.01, 0.001]
    member = [omega_lambda(d, lam).contains(pts) for lam in lams]
    for coarse, fine in zip(member, member[1:]):
        assert np.all(fine[coarse])
    inside = d.depth(pts) > 1e-3
    assert np.all(member[-1][inside])


def test_smooth_inner_ball(rng):
    d = Ball([0, 0], 1)
    star = smooth_inner_approximation(d, InnerRegionParams(0.2, 0.02))
    inner = sample_inside(omega_lambda(d, 0.2), 10_000, rng)
    assert np.all(star.contains(inner))
    pts = sample_inside(star, 10_000, rng)
    assert np.all(omega_lambda(d, 0.05).contains(pts))


def test_smooth_inner_box_has_no_corner(rng):
    d = Box([-1, -1], [1, 1])
    star = smooth_inner_approximation(d, InnerRegionParams(0.2, 0.02))
    assert np.all(star.contains(sample_inside(omega_lambda(d, 0.2), 5000, rng)))
    assert np.all(omega_lambda(d, 0.05).contains(sample_inside(star, 5000, rng)))
    jumps = []
    for n_rays in (1024, 4096):
        _, normals = star.boundary_normals([0.0, 0.0], n_rays)
        turn = np.arccos(np.clip(np.sum(normals * np.roll(normals, -1, 0), 1), -1, 1))
        jumps.append(turn.max())
    # a corner keeps a normal jump of about pi/2 however fine the rays are
    assert jumps[1] < 0.3
    assert jumps[1] < 0.6 * jumps[0]


def test_smooth_inner_empty():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = smooth_inner_approximation(Ball([0, 0], 1), InnerRegionParams(2.0, 0.1))
    assert isinstance(out, EmptyDomain)
    assert out.warning and caught


def test_inner_params_validation():
    with pytest.raises(ValueError):
        InnerRegionParams(0.2, 0.05)
    with pytest.raises(ValueError):
        InnerRegionParams(-1, 0.01)
