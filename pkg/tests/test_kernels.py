import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from bbmlab.kernels import (
    KernelParams,
    MollifierParams,
    SingularityError,
    bbm_constant,
    gagliardo_kernel,
    kappa,
    kappa_quadrature,
    rho_eps,
    rho_eps_radial,
    sphere_area,
)


@pytest.mark.parametrize("N, expected", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi),
                                         (4, 2 * math.pi**2)])
def test_sphere_area(N, expected):
    assert sphere_area(N) == pytest.approx(expected, rel=1e-14)


def test_kappa_special_values():
    for N in range(1, 6):
        assert kappa(N, 2) == pytest.approx(1.0 / N, abs=1e-12)
    for p in (1, 1.5, 2, 3):
        assert kappa(1, p) == 1.0
    assert kappa(2, 1) == pytest.approx(2 / math.pi, abs=1e-12)
    assert kappa(3, 1) == pytest.approx(0.5, abs=1e-12)


def test_kappa_against_monte_carlo(rng):
    # independent oracle: average of |omega_1|^p over uniform sphere samples
    pts = rng.standard_normal((400_000, 3))
    omega = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    assert np.mean(np.abs(omega[:, 0]) ** 1.5) == pytest.approx(kappa(3, 1.5), rel=5e-3)


@settings(max_examples=30, deadline=None)
@given(N=st.integers(2, 6), p=st.floats(1.0, 6.0))
def test_kappa_closed_form_matches_quadrature(N, p):
    assert kappa(N, p) == pytest.approx(kappa_quadrature(N, p), rel=1e-9)


def test_bbm_constant_one_dimensional_p2():
    assert bbm_constant(1, 2) == pytest.approx(1.0)
    assert bbm_constant(2, 2) == pytest.approx(math.pi / 2)
    assert bbm_constant(2, 1) == pytest.approx(4.0)


def test_kernel_params_validation():
    with pytest.raises(ValueError):
        KernelParams(1.0, 2, 1)
    with pytest.raises(ValueError):
        KernelParams(0.5, 0.5, 1)
    with pytest.raises(ValueError):
        KernelParams(0.5, 2, 0)
    assert KernelParams(0.5, 2, 2).exponent == 3.0


def test_kernel_symmetric_and_singular():
    params = KernelParams(0.7, 2, 2)
    x, y = np.array([0.1, 0.3]), np.array([-0.4, 0.9])
    assert gagliardo_kernel(x, y, params) == gagliardo_kernel(y, x, params)
    with pytest.raises(SingularityError):
        gagliardo_kernel(x, x, params)


def test_mollifier_validation_and_shape():
    with pytest.raises(ValueError):
        MollifierParams(0.6, 2, 1, 1)
    m = MollifierParams(0.1, 1, 2, 1)
    assert m.s == pytest.approx(0.9)
    assert rho_eps([2.5], m) == 0.0
    assert rho_eps([0.5], m) == pytest.approx(rho_eps_radial(0.5, m))
    with pytest.raises(SingularityError):
        rho_eps([0.0], m)


@pytest.mark.parametrize("N", [1, 2])
@pytest.mark.parametrize("p", [1, 2])
@pytest.mark.parametrize("eps", [0.05, 0.1])
@pytest.mark.parametrize("R", [1, 2])
def test_mollifier_normalised(N, p, eps, R):
    m = MollifierParams(eps, p, R, N)
    ep = eps * p
    # algebraic weight r^{ep-1} handles the integrable singularity at 0;
    # the remaining factor extends continuously to r = 0
    def smooth_part(r):
        r = max(r, 1e-12 * R)
        return rho_eps_radial(r, m) * r ** (N - ep)

    val, _ = integrate.quad(smooth_part, 0, R,
                            weight="alg", wvar=(ep - 1, 0), epsabs=0, epsrel=1e-13)
    assert sphere_area(N) * val == pytest.approx(1.0, abs=1e-10)
