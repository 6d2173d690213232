"""Chart-based exterior calculus over forward-mode dual numbers."""

from . import dual
from .forms import (
    Chart,
    ChartMap,
    DifferentialForm,
    ScalarField,
    StructureError,
    TangentVector,
    evaluate,
    exterior_derivative,
    finite_difference,
    form_discrepancy,
    interior,
    max_abs,
    pfaffian4,
    pfaffian4_matrix,
    pullback,
    random_frame,
    wedge,
)

__all__ = [
    "Chart",
    "ChartMap",
    "DifferentialForm",
    "ScalarField",
    "StructureError",
    "TangentVector",
    "dual",
    "evaluate",
    "exterior_derivative",
    "finite_difference",
    "form_discrepancy",
    "interior",
    "max_abs",
    "pfaffian4",
    "pfaffian4_matrix",
    "pullback",
    "random_frame",
    "wedge",
]
