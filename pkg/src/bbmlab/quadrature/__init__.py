"""Quadrature of local, fractional and BV seminorms."""

from .mesh import MeshTooCoarse, QuadratureMesh, SeminormEstimate
from .seminorms import (
    NEAR_RADIUS,
    DomainsNotDisjoint,
    bv_seminorm,
    cross_term,
    gagliardo_seminorm,
    local_seminorm_w1p,
    lp_norm_p,
    mollified_functional,
    tail_correction,
    translation_difference,
)
from .tables import NearFieldTable, near_table

__all__ = [
    "MeshTooCoarse",
    "QuadratureMesh",
    "SeminormEstimate",
    "NEAR_RADIUS",
    "DomainsNotDisjoint",
    "bv_seminorm",
    "cross_term",
    "gagliardo_seminorm",
    "local_seminorm_w1p",
    "lp_norm_p",
    "mollified_functional",
    "tail_correction",
    "translation_difference",
    "NearFieldTable",
    "near_table",
]
