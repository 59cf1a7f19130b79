"""Cell-pair summation on a lattice.

Ordered cell pairs ``(i, j)`` split into a near field (integer offset of
Euclidean length at most ``near_radius``) and a far field. Far pairs use
the midpoint rule. Near pairs use the exact cell-pair integral of the
local linear model (see :mod:`.tables`), optionally after dyadic
subdivision of both cells.

Sums are accumulated per row cell: each row is summed sequentially in a
fixed column order, then rows are reduced with ``numpy.sum`` in a fixed
order. The result does not depend on how many threads computed the rows.
"""

from __future__ import annotations

import warnings
from typing import Optional

import numba
import numpy as np
from scipy import fft

from .tables import NearFieldTable

__all__ = ["far_kernel", "far_rows", "near_rows_linear", "near_rows_interface", "offset_slices"]

POWER, MISMATCH = 0, 1

# an outdated system TBB only disables that backend; numba falls back to OpenMP/workqueue
warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)


def far_kernel(shape, h: float, beta: float, near_radius: float,
               cutoff: Optional[float] = None) -> np.ndarray:
    """|k h|^{-beta} on all lattice offsets, zero on the near stencil and beyond ``cutoff``."""
    axes = [np.arange(-(n - 1), n) for n in shape]
    r2 = np.zeros([2 * n - 1 for n in shape])
    for i, ax in enumerate(axes):
        sh = [1] * len(shape)
        sh[i] = -1
        r2 = r2 + (ax.reshape(sh) ** 2)
    far = r2 > near_radius**2 + 1e-12
    dist = h * np.sqrt(r2)
    if cutoff is not None:
        far &= dist < cutoff
    kern = np.zeros_like(dist)
    kern[far] = dist[far] ** (-beta)
    return kern


@numba.njit(parallel=True, cache=True)
def _direct_rows(ri, rv, ci, cv, kern, kstride, kcenter, mode, p):
    n_rows, dim = ri.shape
    n_cols = ci.shape[0]
    out = np.zeros(n_rows)
    for a in numba.prange(n_rows):
        acc = 0.0
        va = rv[a]
        for b in range(n_cols):
            pos = 0
            for d in range(dim):
                pos += (ci[b, d] - ri[a, d] + kcenter[d]) * kstride[d]
            w = kern[pos]
            if w == 0.0:
                continue
            vb = cv[b]
            if mode == 0:
                diff = abs(va - vb)
                if p == 1.0:
                    t = diff
                elif p == 2.0:
                    t = diff * diff
                else:
                    t = diff**p
            else:
                t = va * (1.0 - vb) + vb * (1.0 - va)
            acc += t * w
        out[a] = acc
    return out


def _direct(a_mask, b_mask, vals, kern, mode, p):
    shape = a_mask.shape
    ri = np.argwhere(a_mask).astype(np.int64)
    ci = np.argwhere(b_mask).astype(np.int64)
    rv = np.ascontiguousarray(vals[a_mask], dtype=float)
    cv = np.ascontiguousarray(vals[b_mask], dtype=float)
    kshape = kern.shape
    kstride = np.array([int(np.prod(kshape[d + 1:])) for d in range(len(kshape))], dtype=np.int64)
    kcenter = np.array([n - 1 for n in shape], dtype=np.int64)
    rows = _direct_rows(ri, rv, ci, cv, np.ascontiguousarray(kern.ravel()), kstride, kcenter,
                        mode, float(p))
    out = np.zeros(shape)
    out[a_mask] = rows
    return out


def _fft(a_mask, b_mask, vals, kern, mode, workers=None):
    shape = a_mask.shape
    size = [fft.next_fast_len(3 * n - 2, real=True) for n in shape]
    kf = fft.rfftn(kern, s=size, workers=workers)
    window = tuple(slice(n - 1, 2 * n - 1) for n in shape)

    def conv(x):
        return fft.irfftn(fft.rfftn(x, s=size, workers=workers) * kf, s=size,
                          workers=workers)[window]

    a = a_mask.astype(float)
    b = b_mask.astype(float)
    v = np.where(a_mask | b_mask, vals, 0.0)
    bv = b * v
    if mode == POWER:
        rows = a * (v * v * conv(b) - 2.0 * v * conv(bv) + conv(bv * v))
    else:
        rows = a * (v * conv(b) + (1.0 - 2.0 * v) * conv(bv))
    return rows


def far_rows(a_mask, b_mask, vals, kern, mode=POWER, p=2.0, method="auto", threads=None):
    """Per-row far-field sums sum_j K(j - i) t(v_i, v_j) (without cell weights).

    ``method='fft'`` needs a bilinear pair term: ``mode=MISMATCH`` or ``p == 2``.
    """
    bilinear = mode == MISMATCH or p == 2.0
    if method == "auto":
        work = float(a_mask.sum()) * float(b_mask.sum())
        method = "fft" if bilinear and work > 4e6 else "direct"
    if method == "fft":
        if not bilinear:
            raise ValueError("the FFT path needs p = 2 or an indicator pair term")
        return _fft(a_mask, b_mask, vals, kern, mode, workers=threads)
    if method != "direct":
        raise ValueError(f"unknown summation method {method!r}")
    if threads:
        numba.set_num_threads(min(int(threads), numba.config.NUMBA_NUM_THREADS))
    return _direct(a_mask, b_mask, vals, kern, mode, p)


def offset_slices(shape, k):
    """Slices selecting cells ``i`` and ``i + k`` that both lie in the lattice."""
    rows, cols = [], []
    for n, kd in zip(shape, k):
        kd = int(kd)
        if kd >= 0:
            rows.append(slice(0, n - kd))
            cols.append(slice(kd, n))
        else:
            rows.append(slice(-kd, n))
            cols.append(slice(0, n + kd))
    return tuple(rows), tuple(cols)


def _sub_view(arr, dim, sub, alpha):
    """Values at subcell position ``alpha`` of every coarse cell."""
    shape = arr.shape[:dim]
    coarse = tuple(n // sub for n in shape)
    inner = []
    for n in coarse:
        inner += [n, sub]
    view = arr.reshape(tuple(inner) + arr.shape[dim:])
    index = []
    for a in alpha:
        index += [slice(None), a]
    return view[tuple(index)]


def _hybrid(g, disp, df):
    """Replace the component of ``g`` along ``disp`` by the difference quotient."""
    L = np.linalg.norm(disp)
    e = disp / L
    along = g @ e
    return g + np.outer(df / L - along, e)


def near_rows_linear(a_mask, b_mask, f_sub, g_sub, h, sub, table: NearFieldTable, p, beta,
                     offsets=None, midpoint=False):
    """Near-field sums of the local linear model.

    ``f_sub`` and ``g_sub`` hold field values and gradients at subcell
    centres (``sub`` subcells per axis). Returns per-row sums with cell
    weights included, and per-row remainder proxies. ``offsets`` restricts
    the coarse offsets visited; ``midpoint=True`` uses the midpoint rule
    for every subcell pair (used to measure the far-field rule's error).
    """
    dim = a_mask.ndim
    shape = a_mask.shape
    hs = h / sub
    # pair integral of a cell pair of side hs scales as hs^{N + a}, a = p (1 - s)
    scale_model = hs ** (dim + table.a)
    rows = np.zeros(shape)
    remainder = np.zeros(shape)
    positions = list(np.ndindex(*([sub] * dim)))
    for k in (table.offsets if offsets is None else offsets):
        rs, cs = offset_slices(shape, k)
        pair_mask = a_mask[rs] & b_mask[cs]
        if not np.any(pair_mask):
            continue
        acc = np.zeros(pair_mask.shape)
        rem = np.zeros(pair_mask.shape)
        for alpha in positions:
            fa = _sub_view(f_sub, dim, sub, alpha)[rs][pair_mask]
            ga = _sub_view(g_sub, dim, sub, alpha)[rs][pair_mask]
            for beta_pos in positions:
                kk = sub * np.asarray(k) + np.asarray(beta_pos) - np.asarray(alpha)
                fb = _sub_view(f_sub, dim, sub, beta_pos)[cs][pair_mask]
                if kk in table and not midpoint:
                    idx = table.index(kk)
                    gb = _sub_view(g_sub, dim, sub, beta_pos)[cs][pair_mask]
                    if not np.any(kk):
                        val = table.contribution(idx, ga)
                        spread = np.zeros_like(val)
                    else:
                        disp = kk * hs
                        df = fb - fa
                        val = table.contribution(idx, _hybrid(0.5 * (ga + gb), disp, df))
                        ca = table.contribution(idx, _hybrid(ga, disp, df))
                        cb = table.contribution(idx, _hybrid(gb, disp, df))
                        spread = 0.5 * np.abs(ca - cb)
                    acc[pair_mask] += scale_model * val
                    rem[pair_mask] += scale_model * spread
                else:
                    dist = float(np.linalg.norm(kk)) * hs
                    acc[pair_mask] += np.abs(fb - fa) ** p * dist ** (-beta) * hs ** (2 * dim)
        rows[rs] += acc
        remainder[rs] += rem
    return rows, remainder


def near_rows_interface(mesh_lo, h, a_mask, points, normals, weights, table: NearFieldTable):
    """Flat-interface near field for indicator fields.

    Each boundary quadrature point with outward normal ``nu`` and weight
    ``w`` contributes ``h^a w sum_k T_k(nu)``, attributed to the cell that
    contains it.
    """
    shape = a_mask.shape
    total = np.zeros(len(points))
    for idx in range(len(table.offsets)):
        total += table.contribution(idx, normals)
    contrib = h**table.a * weights * total
    cells = np.floor((points - np.asarray(mesh_lo)) / h).astype(int)
    rows = np.zeros(shape)
    valid = np.all((cells >= 0) & (cells < np.asarray(shape)), axis=1)
    cells = cells[valid]
    keep = a_mask[tuple(cells.T)]
    np.add.at(rows, tuple(cells[keep].T), contrib[valid][keep])
    return rows
