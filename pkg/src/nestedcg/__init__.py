"""Column generation over nested path problems.

A nested path problem routes paths through an ordered sequence of
blocks: each column is built from one subpath per block, subject to
per-block window resources and global path resources with a linear
feasibility predicate.  Pricing runs over an adaptively refined
partition of path-resource space into integer buckets; the restricted
master is solved by an exact rational simplex, so every reported LP
value is a true rational optimum.
"""

from .driver import DiveReport, DriverConfig, DriverError, RunReport, solve
from .model import (
    COVER,
    MAX,
    MILLI,
    PARTITION,
    SUM,
    Arc,
    Block,
    Boundary,
    Duals,
    ModelError,
    NestedProblem,
    Path,
    PathResource,
    Subpath,
    SubpathResource,
    load_problem,
    save_problem,
)
from .pricing import PricingConfig

__all__ = [
    "Arc",
    "Block",
    "Boundary",
    "COVER",
    "DiveReport",
    "DriverConfig",
    "DriverError",
    "Duals",
    "MAX",
    "MILLI",
    "ModelError",
    "NestedProblem",
    "PARTITION",
    "Path",
    "PathResource",
    "PricingConfig",
    "RunReport",
    "SUM",
    "Subpath",
    "SubpathResource",
    "load_problem",
    "save_problem",
    "solve",
]

__version__ = "0.1.0"
