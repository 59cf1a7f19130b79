"""s-sweeps, s -> 1 extrapolation and finiteness probes.

The sweep records ``(1 - s) [f]_{W^{s,p}}`` on a grid of ``s`` values,
each Richardson-paired in the mesh pitch, and compares the extrapolated
limit with a constant times ``int |grad f|^p`` (or the BV seminorm at
``p = 1``).

Two constants are reported. ``kappa(N, p)`` is the sphere average of
``|omega . e|^p``. The exact limit of ``(1 - s)[f]_{W^{s,p}}`` for smooth
``f`` is ``sigma_{N-1} kappa(N, p) / p`` times ``int |grad f|^p`` (see
:func:`bbmlab.kernels.bbm_constant`); both coincide only for ``N = 1``,
``p = 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .fields import Indicator, ScalarField
from .geometry import NON_EXTENSION, Domain
from .kernels import KernelParams, bbm_constant, kappa
from .quadrature import (
    QuadratureMesh,
    SeminormEstimate,
    bv_seminorm,
    gagliardo_seminorm,
    local_seminorm_w1p,
)

__all__ = [
    "DEFAULT_S_GRID",
    "InsufficientData",
    "SweepRow",
    "SweepResult",
    "LimitFit",
    "FinitenessVerdict",
    "cells_schedule",
    "bbm_sweep",
    "extrapolate_limit",
    "finiteness_probe",
    "bbm_target",
    "bbm_report",
]

DEFAULT_S_GRID = (0.80, 0.85, 0.90, 0.95, 0.975, 0.99)
MAX_S = 0.999
GROWTH_THRESHOLD = 0.10
CAUCHY_THRESHOLD = 0.02
MIN_REFINEMENTS = 3

CONVERGENT, DIVERGENT, INCONCLUSIVE = "convergent", "divergent", "inconclusive"


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class SweepRow:
    s: float
    estimate: float
    scaled: float
    error: float
    pitch: float


@dataclass
class SweepResult:
    """Scaled seminorms along an s-grid.

    ``target`` is ``bbm_constant(N, p)`` times the local seminorm and
    ``kappa_target`` is ``kappa(N, p)`` times the same quantity.
    """

    rows: list
    p: float
    target: Optional[float] = None
    kappa_target: Optional[float] = None
    target_error: float = 0.0
    local_seminorm: Optional[float] = None
    field_expr: str = ""
    domain_expr: str = ""

    def __post_init__(self):
        s = [r.s for r in self.rows]
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError("sweep rows must have strictly increasing s")
        if any(not 0 < v < 1 for v in s):
            raise ValueError("sweep s values must lie in (0, 1)")

    @property
    def s(self) -> np.ndarray:
        return np.array([r.s for r in self.rows])

    @property
    def scaled(self) -> np.ndarray:
        return np.array([r.scaled for r in self.rows])

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.rows])


@dataclass(frozen=True)
class LimitFit:
    limit: float
    slope: float
    curvature: Optional[float]
    residual: float
    model: str
    n_rows: int

    def predict(self, s) -> np.ndarray:
        x = 1.0 - np.asarray(s, dtype=float)
        out = self.limit + self.slope * x
        if self.curvature is not None:
            out = out + self.curvature * x**2
        return out


@dataclass
class FinitenessVerdict:
    verdict: str
    s: float
    pitches: list
    estimates: list
    growth_ratios: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "s": self.s,
            "pitches": list(self.pitches),
            "estimates": list(self.estimates),
            "errors": list(self.errors),
            "growth_ratios": list(self.growth_ratios),
        }


MeshSchedule = Union[Callable[[float], QuadratureMesh], Sequence[QuadratureMesh]]


def cells_schedule(d: Domain, cells: int, fine_cells: Optional[int] = None,
                   fine_from: float = 0.95) -> Callable[[float], QuadratureMesh]:
    """Coarse mesh per s: ``cells`` across the box, ``fine_cells`` from ``s >= fine_from``."""
    fine_cells = cells if fine_cells is None else fine_cells

    def schedule(s: float) -> QuadratureMesh:
        return QuadratureMesh.for_domain(d, cells=fine_cells if s >= fine_from else cells)

    return schedule


def _mesh_for(schedule: MeshSchedule, i: int, s: float) -> QuadratureMesh:
    if callable(schedule):
        return schedule(s)
    return schedule[i]


def bbm_target(f: ScalarField, d: Domain, p: float, mesh: QuadratureMesh) -> SeminormEstimate:
    """The local seminorm entering the limit: BV route at p = 1, else int |grad f|^p."""
    if p == 1.0:
        return bv_seminorm(f, d, mesh)
    if isinstance(f, Indicator):
        return SeminormEstimate(math.inf, 0.0, mesh.h, None, p)
    return local_seminorm_w1p(f, d, p, mesh)


def bbm_sweep(f: ScalarField, d: Domain, p: float, s_grid: Sequence[float],
              mesh_schedule: MeshSchedule, target_mesh: Optional[QuadratureMesh] = None,
              method: str = "auto", threads: Optional[int] = None) -> SweepResult:
    """Richardson-paired scaled seminorms ``(1 - s)[f]_{W^{s,p}}`` along ``s_grid``.

    Each ``s`` is evaluated on its scheduled mesh (pitch ``h``) and on the
    halved mesh; ``2 E_{h/2} - E_h`` is recorded with error
    ``|E_{h/2} - E_h|`` plus the fine run's own estimate.
    """
    s_grid = [float(s) for s in s_grid]
    if any(not 0 < s < 1 for s in s_grid):
        raise ValueError("s_grid values must lie in (0, 1)")
    if any(s > MAX_S for s in s_grid):
        raise ValueError(f"s values above {MAX_S} are refused")
    rows = []
    for i, s in enumerate(s_grid):
        coarse = _mesh_for(mesh_schedule, i, s)
        params = KernelParams(s, p, d.dim)
        e1 = gagliardo_seminorm(f, d, params, coarse, method, threads)
        e2 = gagliardo_seminorm(f, d, params, coarse.refined(2), method, threads)
        value = 2.0 * e2.value - e1.value
        if not value >= 0:
            value = e2.value
        err = abs(e2.value - e1.value) + e2.error_estimate
        rows.append(SweepRow(s, value, (1.0 - s) * value, (1.0 - s) * err, e2.mesh_pitch))

    target = kt = local = None
    terr = 0.0
    if target_mesh is not None:
        est = bbm_target(f, d, p, target_mesh)
        local, terr = est.value, est.error_estimate
        target = bbm_constant(d.dim, p) * local
        kt = kappa(d.dim, p) * local
    return SweepResult(rows, p, target, kt, terr, local, f.expr, d.expr)


def _weights(y, err):
    scale = max(float(np.max(np.abs(y))), 1e-300)
    floor = 1e-12 * scale
    e = np.maximum(np.asarray(err, dtype=float), floor)
    return 1.0 / e**2


def _fit(x, y, w, order):
    A = np.vander(x, order + 1, increasing=True)
    sw = np.sqrt(w / np.max(w))
    coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    resid = y - A @ coef
    return coef, float(np.sqrt(np.mean(resid**2)))


def extrapolate_limit(sweep: SweepResult, min_s: float = 0.8) -> LimitFit:
    """Weighted least-squares fit of scaled values against ``1 - s``.

    The linear model is used unless a quadratic (fitted only with at least
    four rows) halves the residual.
    """
    keep = sweep.s >= min_s - 1e-12
    x = 1.0 - sweep.s[keep]
    y = sweep.scaled[keep]
    if len(x) < 3:
        raise InsufficientData(f"need at least 3 rows with s >= {min_s}, got {len(x)}")
    w = _weights(y, sweep.errors[keep])
    coef, res = _fit(x, y, w, 1)
    model, curv = "A+B(1-s)", None
    if len(x) >= 4:
        coef2, res2 = _fit(x, y, w, 2)
        if res2 <= 0.5 * res:
            coef, res, model, curv = coef2, res2, "A+B(1-s)+C(1-s)^2", float(coef2[2])
    scale = max(float(np.max(np.abs(y))), 1.0)
    if res < 1e-13 * scale:
        res = 0.0
    return LimitFit(float(coef[0]), float(coef[1]), curv, res, model, int(len(x)))


def _classify(estimates) -> tuple[str, list]:
    est = np.asarray(estimates, dtype=float)
    ratios = [float(b / a) if a > 0 else math.inf for a, b in zip(est, est[1:])]
    tail = ratios[-MIN_REFINEMENTS:]
    if len(tail) >= MIN_REFINEMENTS and all(r > 1.0 + GROWTH_THRESHOLD for r in tail):
        return DIVERGENT, ratios
    changes = [abs(r - 1.0) for r in ratios]
    if changes and changes[-1] < CAUCHY_THRESHOLD and (len(changes) < 2 or changes[-1] <= changes[-2]):
        return CONVERGENT, ratios
    return INCONCLUSIVE, ratios


def finiteness_probe(f: ScalarField, d: Domain, s: float, pitch_schedule: Sequence[float],
                     p: float = 2.0, method: str = "auto",
                     threads: Optional[int] = None) -> FinitenessVerdict:
    """Track ``[f]_{W^{s,p}(d)}`` under successive halving of the pitch.

    ``divergent``: the last three refinements each grow the estimate by
    more than 10%. ``convergent``: the last relative change is below 2%
    and not larger than the one before it. Otherwise ``inconclusive``.
    """
    pitches = [float(h) for h in pitch_schedule]
    if len(pitches) < 4:
        raise ValueError("a finiteness probe needs at least 4 pitches")
    for a, b in zip(pitches, pitches[1:]):
        if not math.isclose(b, 0.5 * a, rel_tol=1e-9):
            raise ValueError("each pitch must be half the previous one")
    params = KernelParams(s, p, d.dim)
    estimates, errors = [], []
    for h in pitches:
        mesh = QuadratureMesh.for_domain(d, h=h)
        est = gagliardo_seminorm(f, d, params, mesh, method, threads)
        estimates.append(est.value)
        errors.append(est.error_estimate)
    verdict, ratios = _classify(estimates)
    return FinitenessVerdict(verdict, s, pitches, estimates, ratios, errors)


def bbm_report(f: ScalarField, d: Domain, p: float, *, s_grid: Sequence[float] = DEFAULT_S_GRID,
               mesh_schedule: Optional[MeshSchedule] = None, target_mesh: Optional[QuadratureMesh] = None,
               tolerance: float = 0.02, constant: str = "bbm", probe_s: Optional[float] = None,
               probe_pitches: Optional[Sequence[float]] = None, method: str = "auto",
               threads: Optional[int] = None) -> dict:
    """Sweep, extrapolate and compare with the target; probe finiteness first when asked.

    A probe runs when ``probe_s`` is given or the domain is flagged as a
    non-extension domain. If it reports divergence no limit is claimed.

    Parameters
    ----------
    constant : {'bbm', 'kappa'}
        ``'bbm'`` compares with ``bbm_constant(N, p)`` times the local
        seminorm, ``'kappa'`` with ``kappa(N, p)`` times it.
    """
    if constant not in ("bbm", "kappa"):
        raise ValueError(f"unknown target constant {constant!r}")
    out: dict = {"p": p, "constant": constant, "tolerance": tolerance}
    if probe_s is not None or d.extension_flag == NON_EXTENSION:
        ps = 0.9 if probe_s is None else probe_s
        pitches = probe_pitches or [float(np.max(np.subtract(*d.bounding_box[::-1]))) / n
                                    for n in (16, 32, 64, 128)]
        probe = finiteness_probe(f, d, ps, pitches, p, method, threads)
        out["probe"] = probe.as_dict()
        if probe.verdict == DIVERGENT:
            out.update(sweep=None, fit=None, target=None, deviation=None, passed=None,
                       verdict=DIVERGENT)
            return out
    if mesh_schedule is None:
        mesh_schedule = cells_schedule(d, 16 if d.dim == 2 else 64)
    if target_mesh is None:
        target_mesh = QuadratureMesh.for_domain(d, cells=512 if d.dim == 2 else 8192)
    sweep = bbm_sweep(f, d, p, s_grid, mesh_schedule, target_mesh, method, threads)
    fit = extrapolate_limit(sweep)
    target = sweep.target if constant == "bbm" else sweep.kappa_target
    if target is None or not math.isfinite(target):
        deviation = None
        passed = False
    elif target == 0:
        deviation = abs(fit.limit)
        passed = deviation <= tolerance
    else:
        deviation = abs(fit.limit - target) / abs(target)
        passed = deviation <= tolerance
    out.update(sweep=sweep, fit=fit, target=target, deviation=deviation, passed=passed,
               verdict=CONVERGENT if out.get("probe") is None else out["probe"]["verdict"])
    return out
