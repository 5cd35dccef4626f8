"""Numerical lab for mean curvature flow with free boundary on a barrier.

Surfaces of revolution (and planar curves) are discretised by their profile
curve; the barrier is a plane or a sphere.  Modules:

``symm_poly``
    elementary symmetric functions of eigenvalues, their quotients and
    derivatives, and the matrix pinching lemma.
``barrier``
    barrier surfaces, their ambient extensions and the calibrated shift.
``geometry``
    profile curves, fundamental forms, quadrature and constructors.
``flow``
    explicit time stepping, re-meshing, blow-up detection and rescaling.
``diagnostics``
    perturbed curvature, pinching functionals and residual checks.
``inequalities``
    integral-inequality ratios and the Stampacchia monitor.
``config``, ``io``, ``cli``
    configuration grammar, persistence and the command-line front end.
"""

from . import barrier, diagnostics, flow, geometry, inequalities, symm_poly
from .barrier import Barrier
from .exceptions import *  # noqa: F401,F403
from .flow import FlowConfig, run
from .geometry import ProfileCurve, fundamental_forms

__version__ = "0.1.0"

__all__ = ["Barrier", "FlowConfig", "ProfileCurve", "barrier", "diagnostics", "flow",
           "fundamental_forms", "geometry", "inequalities", "run", "symm_poly"]
