"""Dwell-time stability certification and synthesis for switched linear systems."""

from .certify import (
    MarginReport, StabilityCertificate, certify_linear, envelope_bound, verify_certificate,
)
from .dwell import (
    ADT, MDADT, SBAPDT, SBASDT, AdmissibilityReport, DwellPolicy, DwellStatistics,
    check_admissible, compute_statistics, parse_policy, threshold, threshold_table,
)
from .errors import (
    InfeasibleError, InputError, NumericError, SwitchDwellError, SynthesisError,
    UnsupportedError,
)
from .example import bundled_example
from .model import (
    Mode, SwitchedSystem, SwitchingSignal, linear_system, nonlinear_system, parse_signal,
    parse_system,
)
from .sim import (
    SignalGenSpec, Trajectory, check_envelope, fit_gues, generate_signal, simulate,
)
from .synth import synthesize, validate_gains

__version__ = "0.1.0"

__all__ = [
    "MarginReport",
    "StabilityCertificate",
    "certify_linear",
    "envelope_bound",
    "verify_certificate",
    "ADT",
    "MDADT",
    "SBAPDT",
    "SBASDT",
    "AdmissibilityReport",
    "DwellPolicy",
    "DwellStatistics",
    "check_admissible",
    "compute_statistics",
    "parse_policy",
    "threshold",
    "threshold_table",
    "InfeasibleError",
    "InputError",
    "NumericError",
    "SwitchDwellError",
    "SynthesisError",
    "UnsupportedError",
    "bundled_example",
    "Mode",
    "SwitchedSystem",
    "SwitchingSignal",
    "linear_system",
    "nonlinear_system",
    "parse_signal",
    "parse_system",
    "SignalGenSpec",
    "Trajectory",
    "check_envelope",
    "fit_gues",
    "generate_signal",
    "simulate",
    "synthesize",
    "validate_gains",
]
