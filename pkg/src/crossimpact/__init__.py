"""Cross-impact models: costs, no-arbitrage checks, simulation and estimation."""

__version__ = "0.1.0"

from .arbitrage import (ArbitrageReport, constructive_search, size_bound_check, slippage_ratio,
                        spectral_check, verify_certificate)
from .cost import CostBreakdown, cost, cost_in_out, cost_powerlaw_inout
from .errors import CrossImpactError, KernelDomainError, NumericalError, ValidationError
from .estimation import (ImpactCurve, PropagatorEstimate, ResponseFunction, SymmetryTest,
                         estimate_propagator, impact_curve, response, symmetry_test, to_kernel_spec)
from .model import (Exponential, KernelSpec, Linear, Permanent, PowerLaw, PowerLawSign, Strategy,
                    Tabulated, TabulatedImpact)
from .simulate import SimConfig, simulate
from .tape import MarketTape, export_csv, ingest_csv, load_tape

__all__ = [
    "ArbitrageReport", "CostBreakdown", "CrossImpactError", "Exponential", "ImpactCurve", "KernelDomainError",
    "KernelSpec", "Linear", "MarketTape", "NumericalError", "Permanent", "PowerLaw", "PowerLawSign",
    "PropagatorEstimate", "ResponseFunction", "SimConfig", "Strategy", "SymmetryTest", "Tabulated",
    "TabulatedImpact", "ValidationError", "constructive_search", "cost", "cost_in_out", "cost_powerlaw_inout",
    "estimate_propagator", "export_csv", "impact_curve", "ingest_csv", "load_tape", "response",
    "simulate", "size_bound_check", "slippage_ratio", "spectral_check", "symmetry_test", "to_kernel_spec",
    "verify_certificate",
]
