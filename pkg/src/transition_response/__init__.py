"""Transfer-operator numerics for intermittent maps at the finite/infinite measure transition."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConvergenceError,
    DomainError,
    IllConditionedFit,
    NonConvergence,
    TailNotSummable,
)
from .lsv_maps import MapParams, eval_map, inverse_left_branch, y_sequence  # noqa: F401
