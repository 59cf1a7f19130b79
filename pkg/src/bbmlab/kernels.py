"""Scalar ingredients: sphere areas, the kappa constant, the Gagliardo
weight and the truncated power mollifier.

All seminorms in this package are stored *without* the 1/p-th root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

__all__ = [
    "KernelParams",
    "MollifierParams",
    "InternalConsistencyError",
    "SingularityError",
    "sphere_area",
    "kappa",
    "kappa_quadrature",
    "bbm_constant",
    "gagliardo_kernel",
    "rho_eps",
]

KAPPA_CROSSCHECK_TOL = 1e-8


class SingularityError(ValueError):
    """Raised when a singular kernel is evaluated on the diagonal."""


class InternalConsistencyError(RuntimeError):
    """Raised when two independent routes to the same constant disagree."""


@dataclass(frozen=True)
class KernelParams:
    """Fractional order ``s`` in (0, 1), integrability ``p >= 1`` and dimension."""

    s: float
    p: float
    dim: int

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not self.p >= 1.0:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")

    @property
    def exponent(self) -> float:
        """Total kernel exponent N + s p."""
        return self.dim + self.s * self.p


@dataclass(frozen=True)
class MollifierParams:
    """Parameters of the truncated power mollifier rho_eps."""

    eps: float
    p: float
    R: float
    dim: int

    def __post_init__(self):
        if self.p < 1.0:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not 0.0 < self.eps * self.p < 1.0:
            raise ValueError(f"need 0 < eps*p < 1, got eps={self.eps}, p={self.p}")
        if self.R <= 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")

    @property
    def s(self) -> float:
        """Fractional order tied to this mollifier, s = 1 - eps."""
        return 1.0 - self.eps

    @property
    def prefactor(self) -> float:
        """eps p / (sigma_{N-1} R^{eps p})."""
        ep = self.eps * self.p
        return ep / (sphere_area(self.dim) * self.R**ep)


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere S^{N-1} in R^N.

    ``N = 1`` gives the counting measure of {-1, +1}, i.e. 2.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"sphere_area needs a positive integer dimension, got {N}")
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def _kappa_closed_form(N: int, p: float) -> float:
    # Beta-function evaluation of the sphere average of |omega . e|^p
    lg = (
        special.gammaln((p + 1.0) / 2.0)
        + special.gammaln(N / 2.0)
        - 0.5 * math.log(math.pi)
        - special.gammaln((N + p) / 2.0)
    )
    return float(math.exp(lg))


def kappa_quadrature(N: int, p: float) -> float:
    """Sphere average of |omega . e|^p by one-dimensional angular quadrature.

    Uses the polar angle phi from e, so that the average equals
    int_0^pi |cos phi|^p sin^{N-2} phi dphi / int_0^pi sin^{N-2} phi dphi.
    Only valid for N >= 2.
    """
    if N < 2:
        raise ValueError("angular quadrature needs N >= 2")

    def num(phi):
        return abs(math.cos(phi)) ** p * math.sin(phi) ** (N - 2)

    def den(phi):
        return math.sin(phi) ** (N - 2)

    # split at pi/2 where |cos| has a kink
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=200)
    top = integrate.quad(num, 0.0, math.pi / 2, **opts)[0]
    top += integrate.quad(num, math.pi / 2, math.pi, **opts)[0]
    bottom = integrate.quad(den, 0.0, math.pi, **opts)[0]
    return top / bottom


@lru_cache(maxsize=256)
def kappa(N: int, p: float) -> float:
    """Average of |omega . e|^p over the unit sphere S^{N-1}.

    Computed in closed form and cross-checked against
    :func:`kappa_quadrature` for N >= 2.

    Raises
    ------
    InternalConsistencyError
        If the two routes disagree by more than 1e-8.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"kappa needs a positive integer dimension, got {N}")
    if p < 1.0:
        raise ValueError(f"kappa needs p >= 1, got {p}")
    N = int(N)
    if N == 1:
        return 1.0
    value = _kappa_closed_form(N, float(p))
    check = kappa_quadrature(N, float(p))
    if abs(value - check) > KAPPA_CROSSCHECK_TOL * max(1.0, abs(value)):
        raise InternalConsistencyError(
            f"kappa({N}, {p}): closed form {value!r} vs quadrature {check!r}"
        )
    return value


def bbm_constant(N: int, p: float) -> float:
    """Constant C with (1-s)[f]_{W^{s,p}} -> C [f]_{W^{1,p}} as s -> 1.

    Equals sigma_{N-1} kappa(N, p) / p. It coincides with ``kappa`` only
    when sigma_{N-1} = p (for example N = 1, p = 2).
    """
    return sphere_area(N) * kappa(N, p) / p


def gagliardo_kernel(x, y, params: KernelParams) -> float:
    """Weight |x - y|^{-(N + s p)}; symmetric in its arguments."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.linalg.norm(x - y))
    if r == 0.0:
        raise SingularityError("Gagliardo kernel evaluated on the diagonal x = y")
    return r ** (-params.exponent)


def rho_eps(x, params: MollifierParams) -> float:
    """Truncated power mollifier eps p / (sigma R^{eps p} |x|^{N - eps p}) on |x| < R."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise SingularityError("rho_eps evaluated at the origin")
    if r >= params.R:
        return 0.0
    ep = params.eps * params.p
    return params.prefactor * r ** (ep - params.dim)


def rho_eps_radial(r, params: MollifierParams):
    """Vectorised radial profile of :func:`rho_eps` for r > 0."""
    r = np.asarray(r, dtype=float)
    ep = params.eps * params.p
    out = params.prefactor * np.power(r, ep - params.dim, where=r > 0, out=np.full_like(r, np.inf))
    return np.where(r < params.R, out, 0.0)
