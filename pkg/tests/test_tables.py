import math

import numpy as np
import pytest
from scipy import integrate

from bbmlab.quadrature.tables import near_table, pair_table, radial_integral, stencil


def cube_autocorr(v):
    return np.prod(np.clip(1 - np.abs(v), 0, None), axis=-1)


@pytest.mark.parametrize("a", [0.02, 0.2, 1.0, 1.7])
def test_self_table_1d(a):
    # int_{-1}^{1} |u|^{a-1} (1 - |u|) du
    assert float(pair_table([0], 1.0, a)) == pytest.approx(2 / (a * (a + 1)), rel=1e-12)


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("q,a", [(2.0, 1.0), (1.0, 0.3), (2.0, 0.05)])
def test_offset_table_1d(k, q, a):
    # q cancels in 1-D: |u|^q |u|^{-(1+q-a)} = |u|^{a-1}
    if k == 1:
        # u^{a-1} is singular at the left end of the support [0, 2]
        ref, _ = integrate.quad(lambda u: 1 - abs(u - 1), 0, 2, weight="alg", wvar=(a - 1, 0),
                                epsabs=0, epsrel=1e-12)
    else:
        ref, _ = integrate.quad(lambda u: u ** (a - 1) * (1 - abs(u - k)), k - 1, k + 1,
                                points=[k], epsabs=0, epsrel=1e-12)
    assert float(pair_table([k], q, a)) == pytest.approx(ref, rel=1e-9)


def test_radial_integral_against_quad():
    a = 0.4
    for phi in (0.1, 0.7, 1.3):
        omega = np.array([[math.cos(phi), math.sin(phi)]])
        k = np.array([1, 1])
        ref, _ = integrate.quad(
            lambda r: r ** (a - 1) * cube_autocorr(r * omega[0] - k), 0, 4,
            points=[1, 2], limit=200, epsabs=0, epsrel=1e-11)
        assert radial_integral(omega, k, a)[0] == pytest.approx(ref, rel=1e-9)


def test_2d_table_against_dblquad():
    # k = (1, 0), gradient along x, q = 2, a = 1: the integrand is bounded
    q, a = 2.0, 1.0

    def integrand(y, x):
        r2 = x * x + y * y
        return abs(x) ** q * r2 ** (-(2 + q - a) / 2) * (1 - abs(x - 1)) * (1 - abs(y))

    ref, _ = integrate.dblquad(integrand, 0, 2, -1, 1, epsabs=0, epsrel=1e-10)
    assert pair_table([1, 0], q, a)[0] == pytest.approx(ref, rel=1e-7)


def test_2d_self_table_polar_oracle():
    q, a = 2.0, 0.3

    def ang(phi):
        r, _ = integrate.quad(
            lambda t: t ** (a - 1) * cube_autocorr(t * np.array([math.cos(phi), math.sin(phi)])),
            0, 2, limit=200, epsabs=0, epsrel=1e-11,
            points=[min(1 / abs(math.cos(phi) + 1e-300), 2), min(1 / abs(math.sin(phi) + 1e-300), 2)])
        return abs(math.cos(phi)) ** q * r

    ref, _ = integrate.quad(ang, 0, 2 * math.pi, points=[math.pi / 4 * j for j in range(1, 8)],
                            limit=400, epsabs=0, epsrel=1e-10)
    assert pair_table([0, 0], q, a)[0] == pytest.approx(ref, rel=1e-7)


def test_table_symmetries():
    tab = near_table(2, 2.0, 0.5, 2.0)
    g = np.array([[0.3, -1.1], [2.0, 0.5]])
    for k in tab.offsets:
        i, j = tab.index(k), tab.index(-k)
        assert np.allclose(tab.contribution(i, g), tab.contribution(j, g), rtol=1e-12)
    # homogeneity of degree q in the gradient
    i = tab.index((1, 1))
    assert np.allclose(tab.contribution(i, 3 * g), 9 * tab.contribution(i, g))
    # swapping axes maps T_(1,0) at angle psi to T_(0,1) at pi/2 - psi
    v = tab.contribution(tab.index((1, 0)), np.array([[math.cos(0.3), math.sin(0.3)]]))
    w = tab.contribution(tab.index((0, 1)), np.array([[math.sin(0.3), math.cos(0.3)]]))
    assert v == pytest.approx(w, rel=1e-6)


def test_tables_sum_to_linear_model():
    # for large radius the table sum approaches the full-space integral of a
    # linear field against a truncated kernel; check positivity and growth instead
    tab = near_table(1, 2.0, 0.5, 2.0)
    assert np.all(tab.values > 0)
    assert len(stencil(2, 2.0)) == 13
    with pytest.raises(ValueError):
        pair_table([0], 2.0, 0.0)
