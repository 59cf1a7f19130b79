"""Analytic scalar fields with exact gradients.

Fields are vectorised: ``eval`` and ``grad`` accept a single point of
shape ``(N,)`` or a batch of shape ``(M, N)``.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .geometry import Ball, Box, Domain, UnsupportedError, _fmt

__all__ = [
    "ScalarField",
    "Affine",
    "Bump",
    "CuspField",
    "Indicator",
    "affine",
    "bump",
    "cusp_field",
    "indicator",
    "SMOOTH_COMPACT",
    "W1P",
    "W11_ONLY",
    "INDICATOR",
    "CUSP_SPECIAL",
]

SMOOTH_COMPACT = "smooth_compact"
W1P = "w1p"
W11_ONLY = "w11_only"
INDICATOR = "indicator"
CUSP_SPECIAL = "cusp_special"


class ScalarField:
    """Base class for fields; subclasses implement ``_eval`` and ``_grad``.

    Attributes
    ----------
    support_radius : float
        ``f`` vanishes outside the origin-centred ball of this radius;
        ``math.inf`` means unbounded support.
    lipschitz_bound : float or None
        A global Lipschitz constant, or None when none is declared.
    sup_norm : float
        Bound on |f|; ``math.inf`` when unbounded.
    """

    regularity: str = W1P

    def __init__(self, dim: int, support_radius: float = math.inf,
                 lipschitz_bound: Optional[float] = None, sup_norm: float = math.inf,
                 expr: str = "?"):
        self.dim = int(dim)
        self.support_radius = support_radius
        self.lipschitz_bound = lipschitz_bound
        self.sup_norm = sup_norm
        self.expr = expr

    def _eval(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _grad(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _batch(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.shape[-1] != self.dim:
            raise ValueError(f"expected points with {self.dim} coordinates, got shape {arr.shape}")
        return arr, single

    def eval(self, x):
        pts, single = self._batch(x)
        v = self._eval(pts)
        return float(v[0]) if single else v

    def grad(self, x):
        pts, single = self._batch(x)
        g = self._grad(pts)
        return g[0] if single else g

    __call__ = eval

    @property
    def has_gradient(self) -> bool:
        return self.regularity != INDICATOR

    def __repr__(self):
        return f"<{type(self).__name__} {self.expr}>"


class Affine(ScalarField):
    regularity = W1P

    def __init__(self, a, b: float):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        slope = float(np.linalg.norm(a))
        sup = abs(float(b)) if slope == 0 else math.inf
        super().__init__(a.size, math.inf, slope, sup,
                         "affine " + " ".join(_fmt(v) for v in (*a, b)))
        self.a = a
        self.b = float(b)

    def _eval(self, pts):
        return pts @ self.a + self.b

    def _grad(self, pts):
        return np.broadcast_to(self.a, pts.shape).copy()


class Bump(ScalarField):
    """height * exp(1 - 1/(1 - |x-c|^2/r^2)) inside the ball, zero outside."""

    regularity = SMOOTH_COMPACT

    def __init__(self, center, radius: float, height: float = 1.0):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if not radius > 0:
            raise ValueError(f"bump radius must be positive, got {radius}")
        self.center = center
        self.radius = float(radius)
        self.height = float(height)
        # max of |d/drho exp(1 - 1/(1-rho^2))| / r, sampled densely with 1% margin
        rho = np.linspace(0.0, 1.0, 20001)[1:-1]
        q = 1.0 - rho**2
        slope = np.max(2 * rho / q**2 * np.exp(1.0 - 1.0 / q))
        lip = 1.01 * abs(self.height) * slope / self.radius
        super().__init__(center.size, float(np.linalg.norm(center)) + self.radius, lip,
                         abs(self.height),
                         "bump " + " ".join(_fmt(v) for v in (*center, radius, height)))

    def _profile(self, pts):
        rho2 = np.sum((pts - self.center) ** 2, axis=-1) / self.radius**2
        inside = rho2 < 1.0
        q = np.where(inside, 1.0 - rho2, 1.0)
        val = np.where(inside, self.height * np.exp(1.0 - 1.0 / q), 0.0)
        return val, q, inside

    def _eval(self, pts):
        return self._profile(pts)[0]

    def _grad(self, pts):
        val, q, inside = self._profile(pts)
        factor = np.where(inside, -2.0 * val / (self.radius**2 * q**2), 0.0)
        return factor[:, None] * (pts - self.center)


class CuspField(ScalarField):
    """f = r theta on the plane, theta in (-pi, pi] cut along the negative x1-axis.

    On the cut the value from the upper side (r pi) is returned; see
    :meth:`on_cut`. The gradient has |grad f|^2 = theta^2 + 1.
    """

    regularity = CUSP_SPECIAL

    def __init__(self):
        super().__init__(2, math.inf, None, math.inf, "cuspfield")

    @staticmethod
    def on_cut(pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (pts[:, 1] == 0.0) & (pts[:, 0] < 0.0)

    def _theta(self, pts):
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        return np.where(self.on_cut(pts), math.pi, theta)

    def _eval(self, pts):
        return np.linalg.norm(pts, axis=-1) * self._theta(pts)

    def _grad(self, pts):
        r = np.linalg.norm(pts, axis=-1)
        theta = self._theta(pts)
        safe = np.where(r > 0, r, 1.0)
        radial = pts / safe[:, None]
        tangential = np.stack([-pts[:, 1], pts[:, 0]], axis=-1) / safe[:, None]
        g = theta[:, None] * radial + tangential
        return np.where((r > 0)[:, None], g, 0.0)


class Indicator(ScalarField):
    """Characteristic function of a bounded domain; no pointwise gradient."""

    regularity = INDICATOR

    def __init__(self, domain: Domain):
        if not domain.bounded:
            raise ValueError("indicator fields need a bounded domain")
        lo, hi = domain.bounding_box
        radius = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
        super().__init__(domain.dim, radius, None, 1.0, f"indicator {domain.expr}")
        self.domain = domain

    def _eval(self, pts):
        return (self.domain._depth(pts) > 0).astype(float)

    def _grad(self, pts):
        raise UnsupportedError("indicator fields have no pointwise gradient; use the BV route")

    @property
    def is_primitive(self) -> bool:
        return isinstance(self.domain, (Ball, Box))

    def perimeter(self) -> float:
        """Analytic perimeter of the indicated set (primitives only)."""
        return self.domain.perimeter()

    def interface(self, n: int = 256):
        """Boundary quadrature of the indicated set (points, normals, weights, curvature)."""
        return self.domain.boundary_samples(n)


def affine(a, b: float) -> ScalarField:
    return Affine(a, b)


def bump(center, radius: float, height: float = 1.0) -> ScalarField:
    return Bump(center, radius, height)


def cusp_field() -> ScalarField:
    return CuspField()


def indicator(d: Domain) -> ScalarField:
    return Indicator(d)
