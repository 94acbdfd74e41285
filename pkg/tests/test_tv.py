import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from supercg.operators import Image
from supercg.tv import (PerturbationSchedule, SmoothingParams, differences, differences_adjoint,
                        nonascending_direction, perturbed, smoothed_tv, tv_norm,
                        tv_smoothed_gradient)


def tv_enumerated(img):
    """Pixel-by-pixel isotropic TV with zero difference past the last row/column."""
    H, W = img.shape
    terms = []
    for i in range(H):
        for j in range(W):
            dh = img[i, j + 1] - img[i, j] if j + 1 < W else 0.0
            dv = img[i + 1, j] - img[i, j] if i + 1 < H else 0.0
            terms.append(math.sqrt(dh * dh + dv * dv))
    return math.fsum(terms)


images = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                elements=st.floats(-100, 100, allow_nan=False))


def test_tv_of_step_edge():
    assert tv_norm(np.array([[0.0, 1.0], [0.0, 1.0]])) == 2.0
    assert tv_norm(np.full((5, 4), 3.0)) == 0.0


def test_tv_matches_enumeration_exactly():
    rng = np.random.default_rng(0)
    for shape in ((1, 1), (1, 7), (9, 1), (13, 17), (64, 64)):
        img = rng.standard_normal(shape)
        assert tv_norm(img) == tv_enumerated(img)


@settings(max_examples=100, deadline=None)
@given(images)
def test_tv_enumeration_property(img):
    assert tv_norm(img) == tv_enumerated(img)


def test_tv_accepts_flat_with_shape_and_image():
    img = np.random.default_rng(1).random((4, 6))
    v = tv_norm(img)
    assert tv_norm(img.ravel(), shape=(4, 6)) == v
    assert tv_norm(Image.from_array(img)) == v
    with pytest.raises(ValueError):
        tv_norm(img.ravel())


def test_difference_adjoint_identity():
    rng = np.random.default_rng(2)
    x, ph, pv = rng.standard_normal((3, 7, 5))
    dh, dv = differences(x)
    lhs = np.sum(dh * ph) + np.sum(dv * pv)
    rhs = np.sum(x * differences_adjoint(ph, pv))
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("kappa", [1e-4, 1e-2, 1.0])
def test_smoothed_gradient_matches_finite_differences(kappa):
    rng = np.random.default_rng(3)
    img = rng.random((6, 7))
    prm = SmoothingParams(kappa)
    g = tv_smoothed_gradient(img, prm)
    h = 1e-7
    fd = np.zeros_like(img)
    for idx in np.ndindex(img.shape):
        e = np.zeros_like(img)
        e[idx] = h
        fd[idx] = (smoothed_tv(img + e, prm) - smoothed_tv(img - e, prm)) / (2 * h)
    np.testing.assert_allclose(g, fd, atol=1e-5)


def test_gradient_layout_follows_input():
    img = np.random.default_rng(4).random((3, 4))
    assert tv_smoothed_gradient(img).shape == (3, 4)
    assert tv_smoothed_gradient(img.ravel(), shape=(3, 4)).shape == (12,)


def test_nonascending_direction_is_unit_descent():
    img = np.random.default_rng(5).random((8, 8))
    v = nonascending_direction(img)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.sum(v * tv_smoothed_gradient(img)) < 0
    assert not np.any(nonascending_direction(np.ones((4, 4))))


def test_schedule_validation():
    with pytest.raises(ValueError):
        PerturbationSchedule(-1.0)
    with pytest.raises(ValueError):
        PerturbationSchedule(1.0, a=1.0)
    assert PerturbationSchedule(2.0, 0.5, ell=3).gamma() == 0.25


def test_perturbed_step_edge_example():
    x = np.array([[0.0, 1.0], [0.0, 1.0]])
    out, sched = perturbed(x, PerturbationSchedule(0.1, 0.975))
    assert tv_norm(out) <= 2.0
    assert sched.ell >= 1


def test_perturbed_zero_direction_consumes_one_ell():
    x = np.full((4, 4), 2.0)
    out, sched = perturbed(x, PerturbationSchedule(1.0, ell=5))
    np.testing.assert_array_equal(out, x)
    assert sched.ell == 6


def test_perturbed_never_reuses_ell():
    rng = np.random.default_rng(6)
    sched = PerturbationSchedule(0.5)
    seen = 0
    for _ in range(10):
        _, sched = perturbed(rng.random((5, 5)), sched)
        assert sched.ell > seen
        seen = sched.ell


def test_perturbed_gives_up_after_max_attempts():
    # a huge gamma always overshoots, so every draw is rejected
    x = np.random.default_rng(7).random((6, 6))
    out, sched = perturbed(x, PerturbationSchedule(1e6, a=0.5, max_attempts=3))
    np.testing.assert_array_equal(out, x)
    assert sched.ell == 3


def test_perturbed_zero_gamma_is_identity():
    x = np.random.default_rng(8).random(36)
    out, _ = perturbed(x, PerturbationSchedule(0.0), shape=(6, 6))
    np.testing.assert_array_equal(out, x)


@settings(max_examples=100, deadline=None)
@given(images, st.floats(0, 50), st.floats(0.05, 0.99), st.integers(0, 200))
def test_perturbed_is_monotone_in_tv(img, g0, a, ell):
    out, sched = perturbed(img, PerturbationSchedule(g0, a, ell))
    assert tv_norm(out) <= tv_norm(img)
    assert sched.ell > ell
