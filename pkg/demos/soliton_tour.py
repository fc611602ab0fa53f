"""Ground state, its orbit, and where small data stops scattering.

Run with ``python3 demos/soliton_tour.py``; takes about half a minute.
"""

import math

import numpy as np

from morrey_nls import SolverConfig, classify, default_state_space, evolve, ground_state, size_function
from morrey_nls.stationary import closed_form_q, energy

alpha = 1.5
spec = default_state_space(1, alpha)
gs = ground_state(1, alpha, method="radial-shooting")
x = gs.field.axis()
print(f"shooting vs sech profile: {np.abs(gs.field.values - closed_form_q(x, alpha)).max():.2e}")

Q = ground_state(1, alpha).field
traj = evolve(Q, SolverConfig(alpha=alpha, dt=1e-4, t_end=1.0, snapshot_stride=2000))
for t, u in zip(traj.times, traj.fields):
    print(f"t={t:.1f}  |u - e^(it) Q|_inf = {np.abs(u.values - np.exp(1j * t) * Q.values).max():.1e}")

big = ground_state(1, alpha, n=2048, extent=64 * math.pi).field
run = SolverConfig(alpha=alpha, dt=2e-3, t_end=20.0, snapshot_stride=250)
ellQ = size_function(big, spec).value
for c in (0.3, 0.9, 3.0):
    status = classify(evolve(big * c, run), spec=spec)
    ratio = size_function(big * c, spec).value / ellQ
    print(f"c={c:<4} size ratio {ratio:.3f}  E={energy(big * c, alpha):+.3f}  {status}")
