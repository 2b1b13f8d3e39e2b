"""Numerical workbench for Toeplitz operators on weighted Fock spaces."""
from .errors import (
    ConfigError,
    DegenerateMapError,
    DegreeTooHighError,
    FockbenchError,
    GaugeError,
    MeasureError,
    QuadratureError,
    SpectrumError,
    TruncationError,
    UnsupportedPathError,
    WeightError,
)
from .fock_model import FockModel, build_model, kernel_eval
from .harness import (
    InstanceFamily,
    VerificationReport,
    lemma_suite,
    verify_boundedness,
    verify_compactness,
    verify_composition,
    verify_schatten,
    verify_schatten_gauge,
    verify_structure,
    verify_volterra,
)
from .measures import MeasureSpec, Psi, average_function, berezin_transform
from .quadrature import DEFAULT_PLAN, QuadraturePlan
from .toeplitz_spectra import SchattenGauge, assemble, operator_norm, schatten_norm, spectrum
from .weights import Weight, growth_constant, restricted_ap_constant

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateMapError", "DegreeTooHighError", "FockbenchError", "GaugeError",
    "MeasureError", "QuadratureError", "SpectrumError", "TruncationError",
    "UnsupportedPathError", "WeightError",
    "FockModel", "build_model", "kernel_eval",
    "InstanceFamily", "VerificationReport", "lemma_suite", "verify_boundedness",
    "verify_compactness", "verify_composition", "verify_schatten", "verify_schatten_gauge",
    "verify_structure", "verify_volterra",
    "MeasureSpec", "Psi", "average_function", "berezin_transform",
    "DEFAULT_PLAN", "QuadraturePlan",
    "SchattenGauge", "assemble", "operator_norm", "schatten_norm", "spectrum",
    "Weight", "growth_constant", "restricted_ap_constant",
    "__version__",
]
