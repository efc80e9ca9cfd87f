"""Numerical laboratory for observability of the heat equation on R^n.

The whole space is approximated by a large periodic box; the heat flow is
applied exactly in Fourier space.  Submodules:

grid, sets, heat, spectral, observability, constants, counterexample,
weak_obs, cli.
"""
from .errors import *  # noqa: F401,F403
from .grid import (GridFunction, SpectrumFunction, TorusGrid, integrate, make_grid,
                   spectral_derivative, transform)
from .heat import GaussianSolutionSpec, gaussian_solution_eval, heat_kernel_eval, propagate
from .sets import IndicatorMask, rasterize, thickness_profile
from .spectral import classify_cubes, solve_A0, spectral_constant_estimate
from .observability import (interpolation_constant, obs_constant_estimate, telescope_schedule,
                            time_quadrature)
from .constants import c_hold_formula, c_spec_formula, corollary_chain, log_predicted_cobs
from .counterexample import far_gaussian_demo, ratio_bound_closed_form, ratio_numeric
from .weak_obs import DESCRIPTORS, audit_inequality

__version__ = "0.1.0"
