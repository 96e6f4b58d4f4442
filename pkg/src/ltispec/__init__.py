"""Inverse-free rational power spectral densities of stochastic LTI systems."""

__version__ = "0.1.0"

from .poly import DimensionError, EvenPolynomial, denominator_coeffs, eval_even  # noqa: E402
from .system import LtiSystem, Stability, StabilityError, hurwitz_check  # noqa: E402
from .recursive import DegenerateSystemError, SpectralRational, evaluate, residuals, solve_recursive  # noqa: E402
from .elementwise import (ElementCoeffs, SubmatrixSet, all_element_coeffs, auto_coeffs,  # noqa: E402
                          build_O, closed_form_auto, cross_coeffs, element_coeffs)
from .spectral import integrate_psd, matrix_oracle, spectrum_pairs, stationary_covariance  # noqa: E402
from .models import fixed_point, get_model, linearize  # noqa: E402
from .sim import SimConfig, SpectrumEstimate, WelchConfig, coherence_estimate, simulate, welch_spectrum  # noqa: E402

__all__ = [
    "DimensionError", "EvenPolynomial", "denominator_coeffs", "eval_even",
    "LtiSystem", "Stability", "StabilityError", "hurwitz_check",
    "DegenerateSystemError", "SpectralRational", "evaluate", "residuals", "solve_recursive",
    "ElementCoeffs", "SubmatrixSet", "all_element_coeffs", "auto_coeffs", "build_O",
    "closed_form_auto", "cross_coeffs", "element_coeffs",
    "integrate_psd", "matrix_oracle", "spectrum_pairs", "stationary_covariance",
    "fixed_point", "get_model", "linearize",
    "SimConfig", "SpectrumEstimate", "WelchConfig", "coherence_estimate", "simulate", "welch_spectrum",
]
