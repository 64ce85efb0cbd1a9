"""Boundary connectivity of wired uniform spanning trees and fused c = -2 partition functions."""

from .combinat import (
    LinkPattern,
    ValencedLinkPattern,
    enumerate_link_patterns,
    enumerate_valenced,
    fuse,
    unfuse,
)
from .exactnum import ExactScalar
from .fomin import explicit_basis_U, inverse_fomin_sum, link_det, pure_partition
from .kernel import BoundaryConfig, MobiusMap, build_fused_kernel

__version__ = "0.1.0"

__all__ = [
    "LinkPattern",
    "ValencedLinkPattern",
    "enumerate_link_patterns",
    "enumerate_valenced",
    "fuse",
    "unfuse",
    "ExactScalar",
    "BoundaryConfig",
    "MobiusMap",
    "build_fused_kernel",
    "link_det",
    "inverse_fomin_sum",
    "pure_partition",
    "explicit_basis_U",
]
