"""Phase-estimation precision of two-mode Gaussian product states in a lossy interferometer.

Gaussian covariance-matrix formulas for the quantum Fisher information, an
independent Fock-space simulation to check them, the variance counting argument,
and sweeps that tabulate the gain over coherent light.
"""

__version__ = "0.1.0"

from .errors import (
    ConvergenceFailure,
    GaussQfiError,
    InvalidParameter,
    InvalidState,
    NonOptimalPhases,
    NumericalInconsistency,
    TruncationError,
)
from .gaussian_state import ChannelConfig, GaussianState, ProductStateParams, interferometer_output
from .qfi_engine import (
    PrecisionReport,
    QfiBreakdown,
    precision_report,
    qfi_closed_form,
    qfi_fidelity_limit,
    qfi_general,
    qfi_interferometer,
)

__all__ = [
    "ChannelConfig",
    "ConvergenceFailure",
    "GaussQfiError",
    "GaussianState",
    "InvalidParameter",
    "InvalidState",
    "NonOptimalPhases",
    "NumericalInconsistency",
    "PrecisionReport",
    "ProductStateParams",
    "QfiBreakdown",
    "TruncationError",
    "interferometer_output",
    "precision_report",
    "qfi_closed_form",
    "qfi_fidelity_limit",
    "qfi_general",
    "qfi_interferometer",
]
