"""Near-field cell-pair integrals of the local linear model.

For two lattice cells of unit side whose centres differ by the integer
offset ``k``, and a linear field with unit gradient ``e``, the pair
integral is

    T_k(e) = int |e . u|^q |u|^{-(N + q - a)} Lambda(u - k) du,

where ``Lambda(v) = prod_i (1 - |v_i|)_+`` is the autocorrelation of the
unit cube and ``a > 0`` is the radial exponent (``a = p(1 - s)`` for the
Gagliardo kernel). In polar coordinates the radial integrand is
``r^{a-1}`` times a piecewise polynomial in ``r``, so the radial integral
is evaluated in closed form; the angular integral uses Gauss-Legendre
nodes between the directions of lattice points, where the radial pieces
change structure. A cell of side ``h`` scales the result by ``h^{N+q-...}``;
callers apply that factor.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = ["radial_integral", "pair_table", "NearFieldTable", "stencil"]

GAUSS_NODES = 24
N_PSI = 256


def _power_diff(r0, r1, e):
    """(r1^e - r0^e) / e, stable for small e and r0 >= 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        safe0 = np.where(r0 > 0, r0, 1.0)
        ratio = np.where(r0 > 0, r1 / safe0, 1.0)
        stable = safe0**e * np.expm1(e * np.log(ratio)) / e
        from_zero = np.where(r1 > 0, r1, 0.0) ** e / e
    return np.where(r0 > 0, stable, from_zero)


def radial_integral(omega: np.ndarray, k, a: float) -> np.ndarray:
    """int_0^inf r^{a-1} Lambda(r omega - k) dr for each row of ``omega``."""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    k = np.asarray(k, dtype=float).reshape(-1)
    Q, N = omega.shape
    rmax = float(np.linalg.norm(k)) + math.sqrt(N) + 1.0
    t = np.array([-1.0, 0.0, 1.0])
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = (k[None, :, None] + t[None, None, :]) / omega[:, :, None]
    cand = np.where(np.isfinite(cand) & (cand > 0), np.minimum(cand, rmax), 0.0)
    bounds = np.concatenate(
        [np.zeros((Q, 1)), cand.reshape(Q, 3 * N), np.full((Q, 1), rmax)], axis=1)
    bounds.sort(axis=1)

    total = np.zeros(Q)
    for j in range(bounds.shape[1] - 1):
        r0, r1 = bounds[:, j], bounds[:, j + 1]
        live = r1 > r0
        if not np.any(live):
            continue
        rm = 0.5 * (r0 + r1)
        coef = [np.ones(Q)]
        for i in range(N):
            v = rm * omega[:, i] - k[i]
            active = np.abs(v) < 1.0
            sgn = np.sign(v)
            c0 = np.where(active, 1.0 + sgn * k[i], 0.0)
            c1 = np.where(active, -sgn * omega[:, i], 0.0)
            nxt = [np.zeros(Q) for _ in range(len(coef) + 1)]
            for m, c in enumerate(coef):
                nxt[m] = nxt[m] + c * c0
                nxt[m + 1] = nxt[m + 1] + c * c1
            coef = nxt
        piece = np.zeros(Q)
        for m, c in enumerate(coef):
            nz = live & (c != 0)
            if np.any(nz):
                piece[nz] += c[nz] * _power_diff(r0[nz], r1[nz], a + m)
        total += piece
    return total


def _lattice_angles(k) -> np.ndarray:
    k = np.asarray(k, dtype=int)
    angles = [0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi]
    for du in range(-1, 2):
        for dv in range(-1, 2):
            u = (k[0] + du, k[1] + dv)
            if u != (0, 0):
                angles.append(math.atan2(u[1], u[0]) % (2 * math.pi))
    return np.unique(np.array(angles))


def pair_table(k, q: float, a: float, n_psi: int = N_PSI) -> np.ndarray:
    """T_k on the gradient angles ``psi = pi * j / n_psi`` (N = 2), or a scalar (N = 1)."""
    k = tuple(int(v) for v in np.atleast_1d(k))
    if a <= 0:
        raise ValueError(f"radial exponent must be positive, got {a}")
    if len(k) == 1:
        omega = np.array([[1.0], [-1.0]])
        return np.array(radial_integral(omega, k, a).sum())
    if len(k) != 2:
        raise NotImplementedError("near-field tables are implemented for N <= 2")

    x, w = np.polynomial.legendre.leggauss(GAUSS_NODES)
    base = _lattice_angles(k)
    psi = math.pi * np.arange(n_psi) / n_psi
    kinks = np.stack([(psi + 0.5 * math.pi) % (2 * math.pi), (psi + 1.5 * math.pi) % (2 * math.pi)], 1)
    br = np.concatenate(
        [np.broadcast_to(base, (n_psi, base.size)), kinks,
         np.zeros((n_psi, 1)), np.full((n_psi, 1), 2 * math.pi)], axis=1)
    br.sort(axis=1)
    lo, hi = br[:, :-1], br[:, 1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, :, None] + half[:, :, None] * x[None, None, :]
    weights = half[:, :, None] * w[None, None, :]
    phi = nodes.reshape(-1)
    omega = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    radial = radial_integral(omega, k, a).reshape(nodes.shape)
    ang = np.abs(np.cos(nodes - psi[:, None, None])) ** q
    return np.sum(weights * ang * radial, axis=(1, 2))


def stencil(dim: int, radius: float) -> np.ndarray:
    """Integer offsets with Euclidean length <= radius, in lexicographic order."""
    r = int(math.floor(radius))
    axes = [np.arange(-r, r + 1)] * dim
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    keep = np.sum(grid**2, axis=-1) <= radius**2 + 1e-12
    return grid[keep]


class NearFieldTable:
    """Pair integrals T_k for all offsets of a stencil at fixed (q, a)."""

    def __init__(self, dim: int, q: float, a: float, radius: float):
        self.dim, self.q, self.a, self.radius = dim, float(q), float(a), float(radius)
        self.offsets = stencil(dim, radius)
        self._index = {tuple(o): i for i, o in enumerate(self.offsets)}
        if dim == 1:
            self.values = np.array([float(pair_table(o, q, a)) for o in self.offsets])
            self._splines = None
        else:
            cache: dict[tuple, np.ndarray] = {}
            vals = []
            for o in self.offsets:
                # T_k is invariant under k -> -k; reuse reflected offsets
                canon = tuple(int(v) for v in (o if tuple(o) >= tuple(-o) else -o))
                if canon not in cache:
                    cache[canon] = pair_table(canon, q, a)
                vals.append(cache[canon])
            self.values = np.array(vals)
            psi = math.pi * np.arange(N_PSI + 1) / N_PSI
            self._splines = [
                CubicSpline(psi, np.append(v, v[0]), bc_type="periodic") for v in self.values]

    def index(self, k) -> int:
        return self._index[tuple(int(v) for v in k)]

    def __contains__(self, k) -> bool:
        return tuple(int(v) for v in k) in self._index

    def contribution(self, idx: int, g: np.ndarray) -> np.ndarray:
        """|g|^q T_k(g / |g|) for gradients ``g`` of shape (M, N)."""
        g = np.asarray(g, dtype=float)
        mag = np.linalg.norm(g, axis=-1)
        if self.dim == 1:
            return mag**self.q * self.values[idx]
        psi = np.arctan2(g[:, 1], g[:, 0]) % math.pi
        return mag**self.q * self._splines[idx](psi)


@lru_cache(maxsize=64)
def near_table(dim: int, q: float, a: float, radius: float) -> NearFieldTable:
    return NearFieldTable(dim, q, a, radius)
