"""Limiting spectra of banded Toeplitz matrices.

The symbol ``a(z) = sum_{k=-q}^{p} a_k z^k`` determines, for every
``k = -q+1, ..., p-1``, a curve ``Gamma_k`` on which two consecutive roots of
``a(z) = lambda`` (ordered by modulus) have equal modulus, and a measure
``mu_k`` on it.  ``mu_0`` is the limiting eigenvalue distribution of
``T_n(a)``; ``mu_k`` is the limit of the zero distribution of
``det T_n(z^{-k}(a - lambda))``.
"""

from .convergence import (ConvergenceReport, cauchy_error, convergence_report, curve_distance,
                          empirical_measure)
from .curves import CurveArc, CurveFamily, Endpoint, project_to_curve, trace_curve
from .errors import NumericalError, ToeplitzError, ValidationError
from .measures import (DiscreteMeasure, alpha_k, cauchy_transform, complex_densities, density_at,
                       discretize_measure, expected_mass, log_potential)
from .potential import (EnergyReport, MeasureVector, el_residual, energy_I, energy_J,
                        energy_report, l_constant, limit_vector, signed_difference_energy)
from .roots import (RootSystem, modulus_gap, roots_at, w_k_logderiv, w_k_value, widom_det,
                    widom_terms)
from .symbol import (LaurentSymbol, branch_points, critical_points, evaluate, from_coefficients,
                     load_symbol, parse_symbol)
from .toeplitz import (BandedToeplitz, CharPolynomial, DetValue, SpectralSet, char_poly,
                       degree_bound, det_eval, generalized_matrix, generalized_spectrum,
                       leading_coefficient_formula, widom_check)

__version__ = "0.1.0"
