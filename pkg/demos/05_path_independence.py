"""Numerical integrability: two paths, one endpoint.

For an integrable system the state reached does not depend on the route
through parameter space. The non-integrable fixture fails this test, with a
discrepancy that grows with the enclosed area.
"""
from hjflow.flow import PhasePoint, make_path, path_independence_check
from hjflow.planewave import cosine_params, nonintegrable_fixture, plane_wave_system

pw = plane_wave_system(cosine_params())
x0 = PhasePoint.on_surface(pw, [0.0, 0.0], [0.0, 0.0, 0.0], [-1.0, 0.3, 0.0])
chk = path_independence_check(pw, x0, make_path([(0, 0), (1, 0), (1, 2)]),
                              make_path([(0, 0), (0, 2), (1, 2)]), 1000)
print("plane wave, L vs reversed L: max discrepancy", chk.max_discrepancy)

fx = nonintegrable_fixture()
y0 = PhasePoint.on_surface(fx, [0, 0, 0], [1.0], [1.0])
for side in (0.25, 0.5, 1.0):
    chk = path_independence_check(fx, y0, make_path([(0, 0, 0), (0, side, 0), (0, side, side)]),
                                  make_path([(0, 0, 0), (0, 0, side), (0, side, side)]), 1000)
    print(f"fixture, square of side {side}: max discrepancy {chk.max_discrepancy:.4f}")
