"""gthermo: generalized isokinetic thermostat flows on closed surfaces.

Surfaces are conformal charts (periodic torus or the octagon quotient of the
Poincare disk); the package integrates the thermostat flow on the unit
tangent bundle, estimates Lyapunov spectra and entropy production, and
verifies the exact identities the dynamics must satisfy.
"""

__version__ = "0.1.0"

from .geometry import (ConformalSurface, UnitTangent, FrameAtPoint, frame_at,
                       curvature, bracket_residuals, sample_liouville,
                       flat_torus, trig_torus)
from .hyperbolic import (MobiusMap, FuchsianOctagon, build_octagon_group,
                         octagon_surface, invariant_bump, transport_tangent,
                         hyp_dist)
from .fields import (OneForm, ThermostatSpec, make_exact_form, make_product_form,
                     make_constant_form, isoenergetic_reduce, geodesic_spec,
                     magnetic_spec, gaussian_spec, general_spec, lambda_eval,
                     effective_curvature, divergence_F)

__all__ = [
    "ConformalSurface", "UnitTangent", "FrameAtPoint", "frame_at", "curvature",
    "bracket_residuals", "sample_liouville", "flat_torus", "trig_torus",
    "MobiusMap", "FuchsianOctagon", "build_octagon_group", "octagon_surface",
    "invariant_bump", "transport_tangent", "hyp_dist",
    "OneForm", "ThermostatSpec", "make_exact_form", "make_product_form",
    "make_constant_form", "isoenergetic_reduce", "geodesic_spec",
    "magnetic_spec", "gaussian_spec", "general_spec", "lambda_eval",
    "effective_curvature", "divergence_F",
    "__version__",
]
