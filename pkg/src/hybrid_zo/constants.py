"""Shared numerical tolerances.

Property tests, the solver and the certificate tools all read from
:data:`TOL` so that a tolerance only has to be changed in one place.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    point: float = 1e-9  # unit-norm invariant of manifold points
    tangent: float = 1e-9  # orthogonality of tangent vectors
    degenerate: float = 1e-12  # smallest block norm accepted by projection
    fd_step: float = 1e-5  # central-difference step for gradients
    tie: float = 1e-12  # mode ties in argmin_modes
    dedup_radius: float = 1e-3  # critical-point deduplication
    critical_grad: float = 1e-6  # gradient norm accepted at a critical point
    minimizer_radius: float = 1e-2  # exclusion ball around the minimizer set
    gain_safety: float = 0.9  # fraction of the estimated gain bound
    flow_slack: float = 1e-8  # allowed Lyapunov increase per flow step
    jump_slack: float = 1e-9  # allowed excess over -delta at a jump


TOL = Tolerances()
