"""Open subsets of R^N described by a signed depth function.

Every domain exposes a *signed depth*: positive inside, nonpositive
outside, 1-Lipschitz, and bounded in absolute value by the true distance
to the boundary. Primitives (ball, box, halfspace) carry the exact signed
distance. Boolean combinations use the usual min/max rules, which keep
the 1-Lipschitz and lower-bound properties but are no longer exact.

Membership uses open-set semantics: a point with depth exactly zero is
outside.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernels import sphere_area

__all__ = [
    "Domain",
    "Ball",
    "Box",
    "HalfSpace",
    "FullSpace",
    "EmptyDomain",
    "CompositeDomain",
    "CuspDomain",
    "OmegaLambda",
    "SmoothInnerDomain",
    "InnerRegionParams",
    "ConstructionFailed",
    "UnsupportedError",
    "make_primitive",
    "csg",
    "cusp_domain",
    "omega_lambda",
    "smooth_inner_approximation",
    "sample_inside",
    "EXTENSION",
    "NON_EXTENSION",
    "UNKNOWN",
]

EXTENSION = "extension"
NON_EXTENSION = "non_extension"
UNKNOWN = "unknown"
_FLAGS = (EXTENSION, NON_EXTENSION, UNKNOWN)

# boxes of unbounded domains default to this half-width around the origin
DEFAULT_TRUNCATION = 2.0


class ConstructionFailed(RuntimeError):
    """A constructive approximation failed its sampled verification."""


class UnsupportedError(NotImplementedError):
    """The requested quantity has no implementation for this object."""


def _points(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[-1] != dim:
        raise ValueError(f"expected points with {dim} coordinates, got shape {arr.shape}")
    return arr, single


class Domain:
    """Base class. Subclasses implement :meth:`_depth` on ``(M, N)`` arrays."""

    def __init__(self, dim: int, lo, hi, bounded: bool, extension: str = UNKNOWN,
                 expr: str = "?"):
        if int(dim) != dim or dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {dim}")
        if extension not in _FLAGS:
            raise ValueError(f"extension flag must be one of {_FLAGS}, got {extension!r}")
        self.dim = int(dim)
        self._lo = np.asarray(lo, dtype=float).reshape(self.dim)
        self._hi = np.asarray(hi, dtype=float).reshape(self.dim)
        self.bounded = bool(bounded)
        self.extension_flag = extension
        self.expr = expr

    def _depth(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def depth(self, x):
        """Signed depth: > 0 inside, <= 0 outside, |depth| <= dist(x, boundary)."""
        pts, single = _points(x, self.dim)
        d = self._depth(pts)
        return float(d[0]) if single else d

    def contains(self, x):
        """Open-set membership."""
        d = self.depth(x)
        return bool(d > 0) if np.isscalar(d) else d > 0

    def boundary_distance(self, x):
        """Distance to the boundary (exact for primitives, a lower bound otherwise)."""
        d = self.depth(x)
        return abs(d) if np.isscalar(d) else np.abs(d)

    @property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Box containing the domain, or its truncation box when unbounded."""
        return self._lo.copy(), self._hi.copy()

    def with_truncation(self, lo, hi) -> "Domain":
        """Copy of an unbounded domain with a different truncation box."""
        if self.bounded:
            raise ValueError("truncation boxes apply to unbounded domains only")
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone._lo = np.asarray(lo, dtype=float).reshape(self.dim)
        clone._hi = np.asarray(hi, dtype=float).reshape(self.dim)
        return clone

    def with_extension_flag(self, flag: str) -> "Domain":
        if flag not in _FLAGS:
            raise ValueError(f"extension flag must be one of {_FLAGS}, got {flag!r}")
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.extension_flag = flag
        return clone

    def perimeter(self) -> float:
        raise UnsupportedError(f"no analytic perimeter for domain {self.expr!r}")

    def boundary_samples(self, n: int = 256):
        """Quadrature of the boundary: points, outward normals, weights, curvature."""
        raise UnsupportedError(f"no boundary parametrisation for domain {self.expr!r}")

    def __repr__(self):
        return f"<{type(self).__name__} {self.expr}>"


class Ball(Domain):
    def __init__(self, center, radius: float):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if not radius > 0:
            raise ValueError(f"ball radius must be positive, got {radius}")
        dim = center.size
        super().__init__(dim, center - radius, center + radius, True, EXTENSION,
                         "ball " + " ".join(_fmt(v) for v in (*center, radius)))
        self.center = center
        self.radius = float(radius)

    def _depth(self, pts):
        return self.radius - np.linalg.norm(pts - self.center, axis=-1)

    def perimeter(self) -> float:
        return sphere_area(self.dim) * self.radius ** (self.dim - 1)

    def boundary_samples(self, n: int = 256):
        if self.dim == 1:
            normals = np.array([[-1.0], [1.0]])
            return self.center + self.radius * normals, normals, np.ones(2), np.zeros(2)
        if self.dim != 2:
            raise UnsupportedError("ball boundary samples implemented for N <= 2")
        t = 2 * np.pi * (np.arange(n) + 0.5) / n
        normals = np.stack([np.cos(t), np.sin(t)], axis=-1)
        pts = self.center + self.radius * normals
        w = np.full(n, 2 * np.pi * self.radius / n)
        return pts, normals, w, np.full(n, 1.0 / self.radius)


class Box(Domain):
    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("box corners must have equal dimension")
        if not np.all(lo < hi):
            raise ValueError(f"box needs lo < hi componentwise, got {lo} and {hi}")
        super().__init__(lo.size, lo, hi, True, EXTENSION,
                         "box " + " ".join(_fmt(v) for v in (*lo, *hi)))
        self.lo = lo
        self.hi = hi

    def _depth(self, pts):
        inner = np.minimum(pts - self.lo, self.hi - pts).min(axis=-1)
        gap = np.maximum(np.maximum(self.lo - pts, pts - self.hi), 0.0)
        outer = np.linalg.norm(gap, axis=-1)
        return np.where(inner > 0, inner, -outer)

    def perimeter(self) -> float:
        side = self.hi - self.lo
        if self.dim == 1:
            return 2.0
        return float(sum(2.0 * np.prod(np.delete(side, i)) for i in range(self.dim)))

    def boundary_samples(self, n: int = 256):
        if self.dim == 1:
            pts = np.array([[self.lo[0]], [self.hi[0]]])
            normals = np.array([[-1.0], [1.0]])
            return pts, normals, np.ones(2), np.zeros(2)
        if self.dim != 2:
            raise UnsupportedError("box boundary samples implemented for N <= 2")
        x, w = np.polynomial.legendre.leggauss(max(n // 4, 2))
        pts, normals, weights = [], [], []
        for axis in range(2):
            other = 1 - axis
            a, b = self.lo[other], self.hi[other]
            along = 0.5 * (a + b) + 0.5 * (b - a) * x
            for side, sign in ((self.lo[axis], -1.0), (self.hi[axis], 1.0)):
                p = np.empty((x.size, 2))
                p[:, axis] = side
                p[:, other] = along
                nrm = np.zeros((x.size, 2))
                nrm[:, axis] = sign
                pts.append(p)
                normals.append(nrm)
                weights.append(0.5 * (b - a) * w)
        pts = np.concatenate(pts)
        return pts, np.concatenate(normals), np.concatenate(weights), np.zeros(len(pts))


class HalfSpace(Domain):
    """{x : normal . x < offset}; unbounded."""

    def __init__(self, normal, offset: float, truncation: float = DEFAULT_TRUNCATION):
        normal = np.atleast_1d(np.asarray(normal, dtype=float))
        norm = np.linalg.norm(normal)
        if norm == 0:
            raise ValueError("halfspace normal must be nonzero")
        dim = normal.size
        super().__init__(dim, -truncation * np.ones(dim), truncation * np.ones(dim), False,
                         EXTENSION, "halfspace " + " ".join(_fmt(v) for v in (*normal, offset)))
        self.normal = normal / norm
        self.offset = float(offset) / norm

    def _depth(self, pts):
        return self.offset - pts @ self.normal


class FullSpace(Domain):
    def __init__(self, dim: int, truncation: float = DEFAULT_TRUNCATION):
        super().__init__(dim, -truncation * np.ones(dim), truncation * np.ones(dim), False,
                         EXTENSION, "full")

    def _depth(self, pts):
        return np.full(len(pts), np.inf)


class EmptyDomain(Domain):
    def __init__(self, dim: int, warning: Optional[str] = None):
        super().__init__(dim, np.zeros(dim), np.zeros(dim), True, UNKNOWN, "empty")
        self.warning = warning

    def _depth(self, pts):
        return np.full(len(pts), -np.inf)


class CompositeDomain(Domain):
    """Boolean combination of two domains (or the complement of one)."""

    def __init__(self, op: str, a: Domain, b: Optional[Domain] = None,
                 extension: str = UNKNOWN):
        if op not in ("union", "difference", "complement_of_closure", "intersection"):
            raise ValueError(f"unknown CSG operation {op!r}")
        if op == "complement_of_closure":
            if b is not None:
                raise ValueError("complement_of_closure takes a single operand")
        elif b is None:
            raise ValueError(f"{op} needs two operands")
        elif a.dim != b.dim:
            raise ValueError(f"CSG dimension mismatch: {a.dim} vs {b.dim}")
        self.op, self.a, self.b = op, a, b
        lo, hi, bounded = _combine_boxes(op, a, b)
        name = {"union": "union", "difference": "diff", "intersection": "inter",
                "complement_of_closure": "complC"}[op]
        expr = f"{name} {a.expr}" + (f" {b.expr}" if b is not None else "")
        super().__init__(a.dim, lo, hi, bounded, extension, expr)

    def _depth(self, pts):
        da = self.a._depth(pts)
        if self.op == "complement_of_closure":
            return -da
        db = self.b._depth(pts)
        if self.op == "union":
            return np.maximum(da, db)
        if self.op == "intersection":
            return np.minimum(da, db)
        return np.minimum(da, -db)


def _combine_boxes(op, a, b):
    alo, ahi = a.bounding_box
    if op == "complement_of_closure":
        width = ahi - alo
        return alo - width, ahi + width, False
    blo, bhi = b.bounding_box
    if op == "union":
        return np.minimum(alo, blo), np.maximum(ahi, bhi), a.bounded and b.bounded
    if op == "intersection":
        if a.bounded and not b.bounded:
            return alo, ahi, True
        if b.bounded and not a.bounded:
            return blo, bhi, True
        lo, hi = np.maximum(alo, blo), np.minimum(ahi, bhi)
        return lo, np.maximum(hi, lo), a.bounded or b.bounded
    return alo, ahi, a.bounded


class CuspDomain(Domain):
    """Unit disc with the closed cusp {x1 <= 0, |x2| <= |x1|^7} removed."""

    DEGREE = 7

    def __init__(self):
        super().__init__(2, (-1.0, -1.0), (1.0, 1.0), True, NON_EXTENSION, "cusp")

    def _cusp_clearance(self, pts):
        # 1-Lipschitz lower bound for the signed distance to the cusp set
        x1, x2 = pts[..., 0], pts[..., 1]
        profile = np.maximum(-x1, 0.0) ** self.DEGREE
        slope = math.sqrt(1.0 + self.DEGREE**2)
        graph = (np.abs(x2) - profile) / slope
        return np.where(x1 > 0, np.maximum(x1, graph), graph)

    def _depth(self, pts):
        disc = 1.0 - np.linalg.norm(pts, axis=-1)
        return np.minimum(disc, self._cusp_clearance(pts))


class OmegaLambda(Domain):
    """Points of ``base`` deeper than ``lam`` and with |x| lam < 1."""

    def __init__(self, base: Domain, lam: float):
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        lo, hi = base.bounding_box
        r = 1.0 / lam
        lo = np.maximum(lo, -r)
        hi = np.minimum(hi, r)
        super().__init__(base.dim, lo, np.maximum(hi, lo), True, UNKNOWN,
                         f"olambda {base.expr} {_fmt(lam)}")
        self.base = base
        self.lam = float(lam)

    def _depth(self, pts):
        inner = self.base._depth(pts) - self.lam
        return np.minimum(inner, 1.0 / self.lam - np.linalg.norm(pts, axis=-1))


@dataclass(frozen=True)
class InnerRegionParams:
    """Depth ``lam`` of the inner region and width of the smoothing kernel.

    ``level_value`` pins the superlevel used for the smooth boundary; when
    ``None`` a regular level is searched for.
    """

    lam: float
    mollification_width: float
    level_value: Optional[float] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not 0 < self.mollification_width < self.lam / 8:
            raise ValueError(
                f"mollification width must lie in (0, lambda/8) = (0, {self.lam / 8}),"
                f" got {self.mollification_width}"
            )
        if self.level_value is not None and not abs(self.level_value) < self.lam / 8:
            raise ValueError("level_value must lie in (-lambda/8, lambda/8)")


def _mollifier_stencil(dim: int, n: int = 12) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(len(pts))
    for wg in np.meshgrid(*([w] * dim), indexing="ij"):
        wts = wts * wg.ravel()
    r2 = np.sum(pts**2, axis=-1)
    inside = r2 < 1.0
    bump = np.zeros_like(r2)
    bump[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    wts = wts * bump
    keep = wts > 0
    return pts[keep], wts[keep] / wts[keep].sum()


class SmoothInnerDomain(Domain):
    """Superlevel set {g > t} of a mollified signed distance.

    ``g`` is the signed depth of the inner region at depth lam/2, averaged
    against a radial bump of the given width. Because the depth is
    1-Lipschitz so is ``g``, and |g - depth| <= width.
    """

    def __init__(self, base: Domain, params: InnerRegionParams, level: float):
        self.base = base
        self.params = params
        self.level = float(level)
        self._half = OmegaLambda(base, params.lam / 2)
        self._stencil, self._weights = _mollifier_stencil(base.dim)
        lo, hi = OmegaLambda(base, params.lam / 4).bounding_box
        super().__init__(base.dim, lo, hi, True, EXTENSION,
                         f"smooth {base.expr} {_fmt(params.lam)} {_fmt(params.mollification_width)}")
        self.warning: Optional[str] = None

    def smoothed_distance(self, pts: np.ndarray, chunk: int = 4096) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.empty(len(pts))
        offsets = self.params.mollification_width * self._stencil
        for start in range(0, len(pts), chunk):
            block = pts[start:start + chunk]
            shifted = block[:, None, :] + offsets[None, :, :]
            vals = self._half._depth(shifted.reshape(-1, self.dim)).reshape(len(block), -1)
            out[start:start + chunk] = vals @ self._weights
        return out

    def gradient(self, pts: np.ndarray, step: Optional[float] = None) -> np.ndarray:
        step = step or self.params.mollification_width / 16
        grads = np.empty_like(pts)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = step
            grads[:, i] = (self.smoothed_distance(pts + e) - self.smoothed_distance(pts - e)) / (2 * step)
        return grads

    def _depth(self, pts):
        return self.smoothed_distance(pts) - self.level

    def boundary_normals(self, center, n_rays: int = 720) -> tuple[np.ndarray, np.ndarray]:
        """Boundary points and unit normals along rays from an interior ``center`` (N = 2)."""
        if self.dim != 2:
            raise UnsupportedError("boundary normals implemented for N = 2")
        center = np.asarray(center, dtype=float)
        t = 2 * np.pi * np.arange(n_rays) / n_rays
        dirs = np.stack([np.cos(t), np.sin(t)], axis=-1)
        lo, hi = self.bounding_box
        far = np.full(n_rays, float(np.linalg.norm(hi - lo)) + 1.0)
        near = np.zeros(n_rays)
        for _ in range(50):
            mid = 0.5 * (near + far)
            inside = self._depth(center + mid[:, None] * dirs) > 0
            near = np.where(inside, mid, near)
            far = np.where(inside, far, mid)
        pts = center + near[:, None] * dirs
        g = self.gradient(pts)
        normals = -g / np.linalg.norm(g, axis=-1, keepdims=True)
        return pts, normals


def _fmt(v) -> str:
    return repr(float(v)).rstrip("0").rstrip(".") if float(v) != int(v) else str(int(v))


def make_primitive(kind: str, *args, **kwargs) -> Domain:
    """Build ``ball(center, radius)``, ``box(lo, hi)`` or ``halfspace(normal, offset)``."""
    builders: dict[str, Callable[..., Domain]] = {
        "ball": Ball, "box": Box, "halfspace": HalfSpace}
    try:
        builder = builders[kind]
    except KeyError:
        raise ValueError(f"unknown primitive {kind!r}") from None
    return builder(*args, **kwargs)


def csg(op: str, a: Domain, b: Optional[Domain] = None, extension: str = UNKNOWN) -> Domain:
    """Boolean combination; ``difference`` removes the closure of ``b``."""
    return CompositeDomain(op, a, b, extension)


def cusp_domain() -> Domain:
    return CuspDomain()


def omega_lambda(d: Domain, lam: float) -> Domain:
    return OmegaLambda(d, lam)


def sample_inside(domain: Domain, n: int, rng: np.random.Generator,
                  max_rounds: int = 200) -> np.ndarray:
    """Rejection-sample up to ``n`` points of ``domain`` from its bounding box."""
    lo, hi = domain.bounding_box
    if np.any(hi <= lo):
        return np.empty((0, domain.dim))
    found = []
    total = 0
    for _ in range(max_rounds):
        cand = rng.uniform(lo, hi, size=(max(n, 1024), domain.dim))
        keep = cand[domain._depth(cand) > 0]
        found.append(keep)
        total += len(keep)
        if total >= n:
            break
    pts = np.concatenate(found) if found else np.empty((0, domain.dim))
    return pts[:n]


def smooth_inner_approximation(d: Domain, params: InnerRegionParams, n_samples: int = 10_000,
                               seed: int = 0) -> Domain:
    """Smooth bounded open set between the inner regions at depth lam and lam/4.

    The construction is verified by rejection sampling: every sampled point
    of the depth-lam region must lie in the result, and every sampled point
    of the result must lie in the depth-lam/4 region.

    Raises
    ------
    ConstructionFailed
        If either sampled inclusion is violated or no regular level exists.
    """
    lam = params.lam
    rng = np.random.default_rng(seed)
    inner = OmegaLambda(d, lam)
    outer = OmegaLambda(d, lam / 4)
    inner_pts = sample_inside(inner, n_samples, rng)
    if len(inner_pts) == 0:
        warnings.warn(f"inner region of {d.expr!r} at depth {lam} is empty", RuntimeWarning)
        return EmptyDomain(d.dim, warning="empty_inner_region")

    probe = SmoothInnerDomain(d, params, 0.0)
    lo, hi = probe.bounding_box
    box_pts = rng.uniform(lo, hi, size=(n_samples, d.dim))
    g_box = probe.smoothed_distance(box_pts)

    eps = lam / 8
    if params.level_value is not None:
        candidates = [params.level_value]
    else:
        steps = np.arange(0, 8)
        candidates = [0.0] + [sgn * k * eps / 8 for k in steps[1:] for sgn in (1.0, -1.0)]
    level = None
    for t in candidates:
        near = box_pts[np.abs(g_box - t) < eps / 4]
        if len(near) == 0:
            continue
        if np.min(np.linalg.norm(probe.gradient(near), axis=-1)) > 1e-3:
            level = t
            break
    if level is None:
        raise ConstructionFailed("no regular level found for the smoothed distance")

    result = SmoothInnerDomain(d, params, level)
    miss = result._depth(inner_pts) <= 0
    if np.any(miss):
        raise ConstructionFailed(
            f"{int(miss.sum())} sampled points of the depth-{lam} region fall outside"
            " the smooth approximation; retry with a smaller mollification width")
    star_pts = box_pts[g_box - level > 0]
    leak = outer._depth(star_pts) <= 0
    if np.any(leak):
        raise ConstructionFailed(
            f"{int(leak.sum())} sampled points of the smooth approximation leave the"
            f" depth-{lam / 4} region; retry with a smaller mollification width")
    return result
