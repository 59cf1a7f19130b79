"""Seminorm operations built on the pair-summation engine.

All Gagliardo-type values are un-rooted: ``[f]`` is the double integral
itself, not its ``1/p``-th power.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy.special import gammaln

from ..fields import Indicator, ScalarField
from ..geometry import Domain, UnsupportedError
from ..kernels import KernelParams, MollifierParams, SingularityError, sphere_area
from .engine import MISMATCH, POWER, far_kernel, far_rows, near_rows_interface, near_rows_linear
from .mesh import MeshTooCoarse, QuadratureMesh, SeminormEstimate
from .tables import near_table

__all__ = [
    "NEAR_RADIUS",
    "DomainsNotDisjoint",
    "local_seminorm_w1p",
    "gagliardo_seminorm",
    "cross_term",
    "mollified_functional",
    "bv_seminorm",
    "tail_correction",
    "translation_difference",
    "lp_norm_p",
]

NEAR_RADIUS = 2.0
MIN_CONDITIONING = 1e-6
FRACTION_SUBSAMPLES = 8


class DomainsNotDisjoint(ValueError):
    pass


def _values(f: ScalarField, pts: np.ndarray) -> np.ndarray:
    shape = pts.shape[:-1]
    return np.asarray(f.eval(pts.reshape(-1, pts.shape[-1]))).reshape(shape)


def _grads(f: ScalarField, pts: np.ndarray) -> np.ndarray:
    return np.asarray(f.grad(pts.reshape(-1, pts.shape[-1]))).reshape(pts.shape)


def _ball_volume(dim: int, r: float) -> float:
    return math.exp(0.5 * dim * math.log(math.pi) - gammaln(0.5 * dim + 1)) * r**dim


def _box(mesh: QuadratureMesh):
    lo = np.asarray(mesh.lo)
    return lo, lo + mesh.h * np.asarray(mesh.shape)


def tail_correction(x, d_exclusion: float, params: KernelParams) -> float:
    """int_{|y - x| > d} |y - x|^{-(N + s p)} dy = sigma_{N-1} d^{-sp} / (s p).

    The value does not depend on ``x``; the argument is kept for call-site clarity.
    """
    if not d_exclusion > 0:
        raise ValueError(f"exclusion radius must be positive, got {d_exclusion}")
    sp = params.s * params.p
    return sphere_area(params.dim) * d_exclusion ** (-sp) / sp


def _tail_bound(f: ScalarField, domains, mesh, s, p, cutoff=None) -> float:
    """Bound on pairs lost by clipping unbounded domains to the mesh box."""
    if all(d.bounded for d in domains):
        return 0.0
    lo, hi = _box(mesh)
    gap = min(float(np.min(-lo)), float(np.min(hi))) - f.support_radius
    if not math.isfinite(gap) or gap <= 0 or not math.isfinite(f.sup_norm):
        return math.inf
    if cutoff is not None and gap >= cutoff:
        return 0.0
    params = KernelParams(s, p, mesh.dim)
    vol = _ball_volume(mesh.dim, f.support_radius)
    return 2.0**p * f.sup_norm**p * vol * tail_correction(np.zeros(mesh.dim), gap, params)


def _cell_fractions(domain: Domain, mesh: QuadratureMesh) -> np.ndarray:
    """Volume fraction of each cell inside ``domain`` (centre value away from the boundary)."""
    centers = mesh.centers()
    frac = (domain._depth(centers.reshape(-1, mesh.dim)) > 0).astype(float).reshape(mesh.shape)
    cut = mesh.cut_cells(domain)
    if np.any(cut):
        m = FRACTION_SUBSAMPLES
        offs = (np.arange(m) + 0.5) / m - 0.5
        grid = np.stack(np.meshgrid(*([offs] * mesh.dim), indexing="ij"), -1).reshape(-1, mesh.dim)
        c = centers[cut]
        pts = c[:, None, :] + mesh.h * grid[None, :, :]
        inside = domain._depth(pts.reshape(-1, mesh.dim)) > 0
        frac[cut] = inside.reshape(len(c), -1).mean(axis=1)
    return frac


def _interface_samples(f: Indicator, h: float):
    try:
        per = f.perimeter()
    except UnsupportedError:
        raise UnsupportedError(
            f"indicator of {f.domain.expr!r} has no boundary parametrisation") from None
    n = max(64, int(math.ceil(8 * per / h)))
    return f.interface(n)


def _near_overlap(a_mask, b_mask, radius) -> bool:
    """True when some cell of ``a_mask`` lies within the near stencil of ``b_mask``."""
    from .engine import offset_slices
    from .tables import stencil

    for k in stencil(a_mask.ndim, radius):
        rs, cs = offset_slices(a_mask.shape, k)
        if np.any(a_mask[rs] & b_mask[cs]):
            return True
    return False


def _far_rule_error(a_mask, b_mask, f_sub, g_sub, h, sub, p, s, beta, near_radius, cutoff):
    """Midpoint-rule error of the far field, measured on the first shell outside the stencil.

    On the shell ``near_radius < |k| <= near_radius + 1`` the exact
    linear-model integral is compared with the midpoint rule. Shell errors
    decay like ``|k|^{a-3}`` with ``a = p (1 - s)``; the sum over later
    shells is bounded by the integral of that decay.
    """
    from .tables import stencil

    outer = near_radius + 1.0
    if cutoff is not None and cutoff <= (outer + math.sqrt(a_mask.ndim)) * h:
        return 0.0
    a_exp = p * (1.0 - s)
    shell = stencil(a_mask.ndim, outer)
    shell = shell[np.sum(shell**2, axis=1) > near_radius**2 + 1e-12]
    table = near_table(a_mask.ndim, float(p), a_exp, outer)
    exact, _ = near_rows_linear(a_mask, b_mask, f_sub, g_sub, h, sub, table, p, beta, shell)
    mid, _ = near_rows_linear(a_mask, b_mask, f_sub, g_sub, h, sub, table, p, beta, shell,
                              midpoint=True)
    return abs(float(exact.sum() - mid.sum())) * (1.0 + outer / (2.0 - a_exp))


def _separated_rule_error(f, a_dom, b_dom, mesh, value, beta, p, near_radius, cutoff, method,
                          threads) -> float:
    """Midpoint-rule error for two domains separated by more than the stencil.

    The far sum is repeated on the mesh of pitch ``2h``; for a smooth
    integrand the rule is second order, so ``|E_h - E_2h| / 3`` estimates
    the error of ``E_h``.
    """
    shape = tuple(-(-n // 2) for n in mesh.shape)
    if max(shape) < 4:
        return abs(value)
    coarse = QuadratureMesh(mesh.lo, 2.0 * mesh.h, shape)
    a_mask, b_mask = coarse.mask(a_dom), coarse.mask(b_dom)
    if _near_overlap(a_mask, b_mask, near_radius):
        return abs(value)
    kern = far_kernel(coarse.shape, coarse.h, beta, near_radius, cutoff)
    if isinstance(f, Indicator):
        vals, mode = _cell_fractions(f.domain, coarse), MISMATCH
    else:
        vals, mode = _values(f, coarse.centers()), POWER
    rows = far_rows(a_mask, b_mask, vals, kern, mode, p, method, threads)
    return abs(value - float(rows.sum()) * coarse.weight**2) / 3.0


def _pair_sum(f: ScalarField, a_dom: Domain, b_dom: Optional[Domain], mesh: QuadratureMesh,
              s: float, p: float, cutoff: Optional[float] = None, method: str = "auto",
              threads: Optional[int] = None, near_radius: float = NEAR_RADIUS) -> SeminormEstimate:
    dim, h = mesh.dim, mesh.h
    if f.dim != dim:
        raise ValueError(f"field has dimension {f.dim}, mesh has {dim}")
    if (1.0 - s) * p < MIN_CONDITIONING:
        raise SingularityError(
            f"(1 - s) p = {(1.0 - s) * p:.3g} is below {MIN_CONDITIONING}; the quadrature is "
            "ill-conditioned this close to s = 1")
    if cutoff is not None and cutoff <= (near_radius + math.sqrt(dim)) * h:
        raise MeshTooCoarse(f"kernel cutoff {cutoff} is inside the near-field stencil at h={h}")
    beta = dim + s * p
    same = b_dom is None or b_dom is a_dom
    a_mask = mesh.mask(a_dom)
    b_mask = a_mask if same else mesh.mask(b_dom)
    if not same and np.any(a_mask & b_mask):
        raise DomainsNotDisjoint(f"{a_dom.expr!r} and {b_dom.expr!r} share mesh cells")
    kern = far_kernel(mesh.shape, h, beta, near_radius, cutoff)

    if isinstance(f, Indicator):
        a_exp = 1.0 - s * p
        if a_exp <= 0:
            raise SingularityError(
                f"the seminorm of an indicator is infinite for s p >= 1 (s={s}, p={p})")
        vals = _cell_fractions(f.domain, mesh)
        rows = far_rows(a_mask, b_mask, vals, kern, MISMATCH, p, method, threads) * mesh.weight**2
        if same:
            table = near_table(dim, 1.0, a_exp, near_radius)
            pts, normals, weights, curv = _interface_samples(f, h)
            inside = a_dom._depth(pts) > 0
            near = near_rows_interface(mesh.lo, h, a_mask, pts[inside], normals[inside],
                                       weights[inside], table)
            # the flat model is exact to first order; curvature enters at O((h k)^2)
            near_curv = near_rows_interface(mesh.lo, h, a_mask, pts[inside], normals[inside],
                                            weights[inside] * (h * curv[inside]) ** 2, table)
            diag_err = float(near_curv.sum())
        else:
            if _near_overlap(a_mask, b_mask, near_radius):
                raise UnsupportedError("indicator cross-terms need domains separated by the stencil")
            near = np.zeros(mesh.shape)
            diag_err = 0.0
        far_err = 0.0
    else:
        if not f.has_gradient:
            raise UnsupportedError(f"field {f.expr!r} has no gradient")
        sub = 2**mesh.refinement_depth
        sub_centers = mesh.centers(sub)
        f_sub = _values(f, sub_centers)
        g_sub = _grads(f, sub_centers)
        vals = f_sub if sub == 1 else _values(f, mesh.centers())
        rows = far_rows(a_mask, b_mask, vals, kern, POWER, p, method, threads) * mesh.weight**2
        table = near_table(dim, float(p), p * (1.0 - s), near_radius)
        near, remainder = near_rows_linear(a_mask, b_mask, f_sub, g_sub, h, sub, table, p, beta)
        diag_err = float(remainder.sum())
        far_err = _far_rule_error(a_mask, b_mask, f_sub, g_sub, h, sub, p, s, beta, near_radius,
                                  cutoff)

    rows = rows + near
    value = float(rows.sum())
    if not same and not _near_overlap(a_mask, b_mask, near_radius):
        far_err += _separated_rule_error(f, a_dom, b_dom, mesh, value, beta, p, near_radius,
                                         cutoff, method, threads)
    cut = mesh.cut_cells(a_dom) & a_mask
    boundary = float(np.abs(rows[cut]).sum())
    tail = _tail_bound(f, [a_dom] if same else [a_dom, b_dom], mesh, s, p, cutoff)
    components = {"diagonal": diag_err, "far_rule": far_err, "boundary": boundary, "tail": tail}
    return SeminormEstimate(
        value=max(value, 0.0), error_estimate=float(sum(components.values())), mesh_pitch=h,
        s=s, p=p, diagonal_contribution=float(near.sum()), components=components)


def gagliardo_seminorm(f: ScalarField, d: Domain, params: KernelParams, mesh: QuadratureMesh,
                       method: str = "auto", threads: Optional[int] = None) -> SeminormEstimate:
    """Un-rooted Gagliardo seminorm of ``f`` on ``d``.

    Parameters
    ----------
    f : ScalarField
        Field with exact gradient, or an indicator of a primitive set.
    d : Domain
        Integration domain; unbounded domains are clipped to the mesh box.
    params : KernelParams
    mesh : QuadratureMesh
    method : {'auto', 'fft', 'direct'}
        Far-field summation. ``'fft'`` requires ``p = 2`` or an indicator.
    threads : int, optional
        Worker cap. Results do not depend on it.

    Returns
    -------
    SeminormEstimate
    """
    if params.dim != mesh.dim:
        raise ValueError(f"kernel dimension {params.dim} does not match mesh dimension {mesh.dim}")
    return _pair_sum(f, d, None, mesh, params.s, params.p, None, method, threads)


def cross_term(f: ScalarField, d1: Domain, d2: Domain, params: KernelParams,
               mesh: QuadratureMesh, method: str = "auto", threads: Optional[int] = None,
               n_check: int = 4096, seed: int = 0) -> SeminormEstimate:
    """int_{d1} int_{d2} |f(x) - f(y)|^p |x - y|^{-(N + s p)} dy dx for disjoint domains.

    ``mesh`` must cover both domains (see :meth:`QuadratureMesh.covering`).
    """
    lo, hi = d1.bounding_box
    rng = np.random.default_rng(seed)
    pts = lo + (hi - lo) * rng.random((n_check, d1.dim))
    if np.any((d1._depth(pts) > 0) & (d2._depth(pts) > 0)):
        raise DomainsNotDisjoint(f"{d1.expr!r} and {d2.expr!r} overlap")
    return _pair_sum(f, d1, d2, mesh, params.s, params.p, None, method, threads)


def mollified_functional(f: ScalarField, d: Domain, moll: MollifierParams, p: float,
                         mesh: QuadratureMesh, method: str = "auto",
                         threads: Optional[int] = None) -> SeminormEstimate:
    """int int |f(x) - f(y)|^p / |x - y|^p rho_eps(x - y) dx dy over ``d``.

    With the truncated power mollifier this is ``prefactor`` times the
    order ``1 - eps`` Gagliardo integral restricted to ``|x - y| < R``.
    """
    if abs(moll.p - p) > 0:
        raise ValueError(f"mollifier was built for p={moll.p}, got p={p}")
    if moll.dim != mesh.dim:
        raise ValueError("mollifier dimension does not match the mesh")
    est = _pair_sum(f, d, None, mesh, moll.s, p, moll.R, method, threads)
    return est.scaled(moll.prefactor)


def local_seminorm_w1p(f: ScalarField, d: Domain, p: float, mesh: QuadratureMesh) -> SeminormEstimate:
    """int_d |grad f|^p by the midpoint rule on participating cells.

    The value uses 2^N midpoints per cell; the coarse one-point rule
    supplies a Richardson-style error term.
    """
    if not f.has_gradient:
        raise UnsupportedError("indicator fields have no gradient; use bv_seminorm")
    mask = mesh.mask(d)
    coarse = np.linalg.norm(_grads(f, mesh.centers()), axis=-1) ** p
    fine = np.linalg.norm(_grads(f, mesh.centers(2)), axis=-1) ** p
    for axis in range(mesh.dim):
        fine = np.add.reduceat(fine, np.arange(0, fine.shape[axis], 2), axis=axis)
    fine = fine / 2**mesh.dim
    v1 = float(coarse[mask].sum()) * mesh.weight
    v2 = float(fine[mask].sum()) * mesh.weight
    cut = mesh.cut_cells(d) & mask
    boundary = float(fine[cut].sum()) * mesh.weight
    components = {"quadrature": abs(v2 - v1) / 3.0, "boundary": boundary}
    return SeminormEstimate(v2, float(sum(components.values())), mesh.h, None, p, 0.0, components)


def bv_seminorm(f: ScalarField, d: Domain, mesh: Optional[QuadratureMesh] = None,
                n_samples: int = 4096) -> SeminormEstimate:
    """Total variation of ``f`` on ``d`` through the available equivalence.

    Indicators of primitive sets use the perimeter of the set clipped to
    ``d``; fields with a gradient use ``int |grad f|``.
    """
    if isinstance(f, Indicator):
        if not f.is_primitive:
            raise UnsupportedError(f"no analytic perimeter for {f.domain.expr!r}")
        pts, _, w, _ = f.interface(n_samples)
        inside = d._depth(pts) > 0
        pitch = mesh.h if mesh is not None else 0.0
        if np.all(inside):
            return SeminormEstimate(f.perimeter(), 0.0, pitch, None, 1.0, 0.0, {"perimeter": 0.0})
        err = 2.0 * float(np.max(w))
        return SeminormEstimate(float(w[inside].sum()), err, pitch, None, 1.0, 0.0,
                                {"perimeter": err})
    if mesh is None:
        raise ValueError("a mesh is needed for the gradient route")
    return local_seminorm_w1p(f, d, 1.0, mesh)


def translation_difference(f: ScalarField, shift, p: float, mesh: QuadratureMesh) -> float:
    """Midpoint value of int |f(x + shift) - f(x)|^p over the mesh box."""
    shift = np.asarray(shift, dtype=float)
    c = mesh.centers(2)
    diff = np.abs(_values(f, c + shift) - _values(f, c)) ** p
    return float(diff.sum()) * mesh.weight / 2**mesh.dim


def lp_norm_p(f: ScalarField, d: Domain, p: float, mesh: QuadratureMesh) -> float:
    """int_d |f|^p by the midpoint rule."""
    mask = mesh.mask(d)
    return float((np.abs(_values(f, mesh.centers())) ** p)[mask].sum()) * mesh.weight
