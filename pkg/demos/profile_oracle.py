"""Recover two planted profiles from a sequence whose families drift apart.

Term one is D(n) phi1 (scale gap n), term two is T(n^2) phi2.  The
decomposition should find both with the planted deformations.
"""

from morrey_nls import default_state_space, hat_morrey_norm, profile_decompose
from morrey_nls.experiments import planted_two_profiles, profile_errors
from morrey_nls.profiles import greedy_spec

alpha = 1.5
planted = [planted_two_profiles(n, alpha) for n in (4, 8, 16)]
us = [p.u for p in planted]
eps = 0.01 * max(hat_morrey_norm(u, greedy_spec(1, alpha)) for u in us)
dec = profile_decompose(us, eps, default_state_space(1, alpha), strichartz=False)

for i, track in enumerate(dec.profiles):
    print(f"profile {i}: " + ", ".join(f"m={G.m} s={G.s:.2g} a={G.a[0]:.4g}" for G in track.deformations))
for name, errs in profile_errors(dec, planted, alpha).items():
    print(name, " ".join(f"{e:.1e}" for e in errs))
print("decoupling residual", dec.decoupling_residual)
