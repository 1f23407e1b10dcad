"""Gauge fixing: the Dirac route reproduces the canonical flow.

Fixing x_- = tau determines the multiplier of the mass-shell constraint.
With that gauge it comes out exactly 1, and the trajectory coincides with
the canonical flow along the diagonal path. A gauge x_- = 2 tau gives 2.
"""
import numpy as np

from hjflow.flow import PhasePoint, dirac_reference, integrate, make_path
from hjflow.planewave import cosine_params, plane_wave_system

system = plane_wave_system(cosine_params())
x0 = PhasePoint.on_surface(system, [0.0, 0.0], [0.0, 0.0, 0.0], [-1.0, 0.2, 0.0])

dirac = dirac_reference(system, system.extended("xm"), "xm - tau", x0, (0.0, 10.0), 2000)
canon = integrate(system, x0, make_path([(0, 0), (10, 10)]), 2000)
print("lambda range:", dirac.lambdas.min(), dirac.lambdas.max())
print("max |dirac - canonical|:", np.max(np.abs(dirac.states - canon.states)))

fast = dirac_reference(system, system.extended("xm"), "xm - 2*tau", x0, (0.0, 5.0), 1000)
print("gauge xm = 2 tau gives lambda =", fast.lambdas[0], "and ends at xm =", fast.column("xm")[-1])
