import numpy as np
import pytest

from bbmlab.fields import affine, bump
from bbmlab.geometry import Box
from bbmlab.kernels import bbm_constant, kappa
from bbmlab.limits import (
    CONVERGENT,
    DIVERGENT,
    INCONCLUSIVE,
    InsufficientData,
    SweepResult,
    SweepRow,
    _classify,
    bbm_report,
    bbm_sweep,
    cells_schedule,
    extrapolate_limit,
    finiteness_probe,
)
from bbmlab.quadrature import QuadratureMesh, bv_seminorm, local_seminorm_w1p

UNIT = Box([0.0], [1.0])
SQUARE = Box([0.0, 0.0], [1.0, 1.0])


def synthetic(g, s_values, err=1e-3):
    rows = [SweepRow(s, g(s) / (1 - s), g(s), err, 0.01) for s in s_values]
    return SweepResult(rows, 2.0)


def test_extrapolate_generating_function():
    fit = extrapolate_limit(synthetic(lambda s: 1 / (3 - 2 * s), [0.9, 0.95, 0.99]))
    assert fit.limit == pytest.approx(1.0, abs=0.01)


def test_extrapolate_constant_and_linear():
    fit = extrapolate_limit(synthetic(lambda s: 1.7, [0.8, 0.9, 0.95, 0.99]))
    assert fit.limit == pytest.approx(1.7, rel=1e-12)
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert fit.residual == 0.0
    fit = extrapolate_limit(synthetic(lambda s: 2 + 5 * (1 - s), [0.8, 0.9, 0.95, 0.99]))
    assert fit.limit == pytest.approx(2.0, rel=1e-12)
    assert fit.model == "A+B(1-s)"


def test_extrapolate_reproduces_own_model():
    sweep = synthetic(lambda s: 1 / (3 - 2 * s), [0.8, 0.85, 0.9, 0.95, 0.975, 0.99])
    fit = extrapolate_limit(sweep)
    again = extrapolate_limit(synthetic(lambda s: float(fit.predict(s)), list(sweep.s)))
    assert again.limit == pytest.approx(fit.limit, rel=1e-12)
    assert again.residual == 0.0


def test_extrapolate_needs_three_rows():
    with pytest.raises(InsufficientData):
        extrapolate_limit(synthetic(lambda s: 1.0, [0.5, 0.9, 0.95]))


def test_sweep_rows_validated():
    with pytest.raises(ValueError):
        synthetic(lambda s: 1.0, [0.9, 0.8])
    with pytest.raises(ValueError):
        bbm_sweep(affine([1.0], 0.0), UNIT, 2.0, [0.5, 1.0], cells_schedule(UNIT, 32))
    with pytest.raises(ValueError):
        bbm_sweep(affine([1.0], 0.0), UNIT, 2.0, [0.9995], cells_schedule(UNIT, 32))


@pytest.mark.parametrize("est,verdict", [
    ([1.0, 1.2, 1.45, 1.75, 2.1], DIVERGENT),
    ([1.0, 1.05, 1.06, 1.062], CONVERGENT),
    ([1.0, 1.2, 1.3, 1.35], INCONCLUSIVE),
    ([1.0, 1.2, 1.05, 1.25], INCONCLUSIVE),
    ([2.0, 2.0, 2.0, 2.0], CONVERGENT),
])
def test_classify(est, verdict):
    assert _classify(est)[0] == verdict


def test_probe_validates_pitches():
    with pytest.raises(ValueError):
        finiteness_probe(affine([1.0], 0.0), UNIT, 0.5, [0.1, 0.05, 0.025])
    with pytest.raises(ValueError):
        finiteness_probe(affine([1.0], 0.0), UNIT, 0.5, [0.1, 0.05, 0.02, 0.01])


def test_sweep_affine_closed_form():
    sweep = bbm_sweep(affine([1.0], 0.0), UNIT, 2.0, [0.9, 0.95, 0.99], cells_schedule(UNIT, 64),
                      QuadratureMesh.for_domain(UNIT, cells=256))
    ref = 1 / (3 - 2 * sweep.s)
    assert np.all(np.abs(sweep.scaled - ref) / ref < 0.01)
    assert sweep.local_seminorm == pytest.approx(1.0)
    assert sweep.target == pytest.approx(bbm_constant(1, 2))


def test_sweep_constant_is_zero():
    sweep = bbm_sweep(affine([0.0], 4.0), UNIT, 2.0, [0.9, 0.95, 0.99], cells_schedule(UNIT, 32),
                      QuadratureMesh.for_domain(UNIT, cells=64))
    assert np.all(sweep.scaled == 0.0) and sweep.target == 0.0


def test_sweep_bump_increases_toward_target():
    f = bump([0.5, 0.5], 0.4, 1.0)
    sweep = bbm_sweep(f, SQUARE, 2.0, [0.8, 0.9, 0.95], cells_schedule(SQUARE, 16),
                      QuadratureMesh.for_domain(SQUARE, cells=256))
    assert np.all(np.diff(sweep.scaled) > 0)
    assert sweep.scaled[-1] < sweep.target


def test_bump_probe_convergent():
    f = bump([0.5, 0.5], 0.4, 1.0)
    for s in (0.5, 0.9):
        probe = finiteness_probe(f, SQUARE, s, [1 / 16, 1 / 32, 1 / 64, 1 / 128])
        assert probe.verdict == CONVERGENT, probe.as_dict()


def test_p1_routes_agree():
    f = bump([0.5, 0.5], 0.4, 1.0)
    m = QuadratureMesh.for_domain(SQUARE, cells=128)
    bv = bv_seminorm(f, SQUARE, m)
    loc = local_seminorm_w1p(f, SQUARE, 1.0, m)
    assert abs(kappa(2, 1) * (bv.value - loc.value)) <= kappa(2, 1) * (bv.error_estimate + 1e-12)


def test_report_affine_passes():
    rep = bbm_report(affine([1.0], 0.0), UNIT, 2.0, s_grid=[0.8, 0.85, 0.9, 0.95, 0.975, 0.99],
                     mesh_schedule=cells_schedule(UNIT, 64),
                     target_mesh=QuadratureMesh.for_domain(UNIT, cells=256), tolerance=0.02)
    assert rep["passed"] and rep["deviation"] < 0.02
    with pytest.raises(ValueError):
        bbm_report(affine([1.0], 0.0), UNIT, 2.0, constant="other")
