from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..geometry import Domain

__all__ = ["QuadratureMesh", "SeminormEstimate", "MeshTooCoarse"]

MIN_CELLS_ACROSS = 4


class MeshTooCoarse(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureMesh:
    """Axis-aligned lattice of cubes of side ``h`` anchored at ``lo``.

    A cell participates in a domain integral iff its centre lies inside the
    domain. ``refinement_depth`` is the number of dyadic subdivisions used
    for near-diagonal cell pairs.
    """

    lo: tuple
    h: float
    shape: tuple
    refinement_depth: int = 0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"mesh pitch must be positive, got {self.h}")
        if self.refinement_depth < 0:
            raise ValueError("refinement depth must be nonnegative")
        if max(self.shape) < MIN_CELLS_ACROSS:
            raise MeshTooCoarse(
                f"mesh has {max(self.shape)} cells across its box; need at least {MIN_CELLS_ACROSS}")

    @classmethod
    def from_box(cls, lo, hi, h: float, refinement_depth: int = 0) -> "QuadratureMesh":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        ratio = (hi - lo) / h
        n = np.where(np.abs(ratio - np.round(ratio)) < 1e-9 * np.maximum(ratio, 1),
                     np.round(ratio), np.ceil(ratio)).astype(int)
        return cls(tuple(float(v) for v in lo), float(h), tuple(int(v) for v in np.maximum(n, 1)),
                   refinement_depth)

    @classmethod
    def for_domain(cls, domain: Domain, h: Optional[float] = None, cells: Optional[int] = None,
                   refinement_depth: int = 0) -> "QuadratureMesh":
        """Mesh of the domain's bounding box, by pitch or by cells along the longest side."""
        lo, hi = domain.bounding_box
        if h is None:
            if cells is None:
                raise ValueError("give either a pitch h or a cell count")
            h = float(np.max(hi - lo)) / cells
        return cls.from_box(lo, hi, h, refinement_depth)

    @classmethod
    def covering(cls, domains, h: float, refinement_depth: int = 0) -> "QuadratureMesh":
        boxes = [d.bounding_box for d in domains]
        lo = np.min([b[0] for b in boxes], axis=0)
        hi = np.max([b[1] for b in boxes], axis=0)
        return cls.from_box(lo, hi, h, refinement_depth)

    def refined(self, factor: int = 2) -> "QuadratureMesh":
        return QuadratureMesh(self.lo, self.h / factor, tuple(n * factor for n in self.shape),
                              self.refinement_depth)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def weight(self) -> float:
        return self.h**self.dim

    def centers(self, sub: int = 1) -> np.ndarray:
        """Cell centres as an array of shape ``shape*sub + (N,)``.

        With ``sub > 1`` each cell is split into ``sub**N`` subcells.
        """
        hs = self.h / sub
        axes = [self.lo[i] + (np.arange(n * sub) + 0.5) * hs for i, n in enumerate(self.shape)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)

    def mask(self, domain: Domain) -> np.ndarray:
        """Centre-inside participation mask."""
        c = self.centers()
        return (domain._depth(c.reshape(-1, self.dim)) > 0).reshape(self.shape)

    def cut_cells(self, domain: Domain) -> np.ndarray:
        """Cells the domain boundary passes through, judged at slightly shrunk corners."""
        c = self.centers().reshape(-1, self.dim)
        inside = domain._depth(c) > 0
        cut = np.zeros(len(c), dtype=bool)
        half = 0.5 * self.h * (1 - 1e-9)
        for corner in np.ndindex(*([2] * self.dim)):
            shift = np.array([half if b else -half for b in corner])
            cut |= (domain._depth(c + shift) > 0) != inside
        return cut.reshape(self.shape)


@dataclass
class SeminormEstimate:
    """A quadrature value with its error estimate and provenance.

    ``value`` is the un-rooted seminorm. ``error_estimate`` is the sum of
    the listed components. ``diagonal_contribution`` is the part of
    ``value`` coming from near-diagonal cell pairs.
    """

    value: float
    error_estimate: float
    mesh_pitch: float
    s: Optional[float] = None
    p: Optional[float] = None
    diagonal_contribution: float = 0.0
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0 and self.value > -1e-12 * max(1.0, abs(self.error_estimate)):
            self.value = 0.0

    def scaled(self, factor: float) -> "SeminormEstimate":
        return SeminormEstimate(
            self.value * factor, self.error_estimate * abs(factor), self.mesh_pitch, self.s,
            self.p, self.diagonal_contribution * factor,
            {k: v * abs(factor) for k, v in self.components.items()})

    def as_dict(self) -> dict:
        out = {
            "value": self.value,
            "error_estimate": self.error_estimate,
            "mesh_pitch": self.mesh_pitch,
            "diagonal_contribution": self.diagonal_contribution,
            "components": dict(sorted(self.components.items())),
        }
        if self.s is not None:
            out["s"] = self.s
        if self.p is not None:
            out["p"] = self.p
        return out
