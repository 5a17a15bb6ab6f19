"""symdyn: finite-precision symbolic dynamics for nonuniformly expanding
interval maps — Pesin charts, coarse-grained pseudo-orbit graphs, shadowing,
Markov refinement, and entropy/periodic-orbit analysis."""

__version__ = "0.1.0"

from .map_model import BUILT_IN_NAMES, MapModel, SingularPoint, built_in, load_map

__all__ = [
    "BUILT_IN_NAMES",
    "MapModel",
    "SingularPoint",
    "built_in",
    "load_map",
    "__version__",
]
