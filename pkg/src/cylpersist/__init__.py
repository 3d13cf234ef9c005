"""Persistence diagrams of networks on point processes in cylindrical windows."""

from .directed_network import (
    BranchDiagram,
    DirectedNetwork,
    beta_arrow,
    build_dsf,
    build_gilbert,
    directed_persistence,
)
from .filtration import FilteredComplex, build_complex, meb_radius
from .persistence import PersistenceDiagram, compute_persistence, persistent_betti
from .point_process import (
    MaternParams,
    PointPattern,
    StraussParams,
    Window,
    sample_matern,
    sample_poisson,
    sample_strauss,
)

__version__ = "0.1.0"

__all__ = [
    "BranchDiagram",
    "DirectedNetwork",
    "FilteredComplex",
    "MaternParams",
    "PersistenceDiagram",
    "PointPattern",
    "StraussParams",
    "Window",
    "beta_arrow",
    "build_complex",
    "build_dsf",
    "build_gilbert",
    "compute_persistence",
    "directed_persistence",
    "meb_radius",
    "persistent_betti",
    "sample_matern",
    "sample_poisson",
    "sample_strauss",
]
