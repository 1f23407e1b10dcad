"""Light-cone wave evolution and the classical limit.

A Gaussian packet is evolved in x_- by the split-step spectral method. The
generator is quadratic in the transverse momentum, so the packet centre
follows the classical characteristic. The discrete Klein-Gordon residual
shrinks fourfold per step halving.
"""
from hjflow.planewave import cosine_params
from hjflow.quantum import GridSpec, ehrenfest_compare, evolve_splitstep, init_gaussian, kg_residual

params = cosine_params(pi_plus=-2.0)
grid = GridSpec(1, 256, 40.0)
wave = init_gaussian(grid, [0.0], [1.6], [0.0], pi_plus=-2.0)

rep = ehrenfest_compare(params, wave, (0.0, 10.0), 1000)
evo = rep.evolution
print(f"norm drift {evo.norm_drift:.1e}, Ehrenfest deviation {rep.max_position_deviation:.1e}")
cl = rep.classical.column("x1")
for i in range(0, evo.steps + 1, 125):
    print(f"  x_- = {evo.x_minus[i]:6.2f}   <x1> = {evo.mean_x[i, 0]: .6f}   "
          f"classical {cl[i]: .6f}")

for n in (250, 500, 1000):
    r = kg_residual(evolve_splitstep(wave, params, (0.0, 10.0), n, store_states=True))
    print(f"steps {n:5d}: Klein-Gordon residual {r:.3e}")
