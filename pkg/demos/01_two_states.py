"""Reference configuration: constants, landscape, and the two normalized states.

Run with ``python3 demos/01_two_states.py``.
"""

from normbiharm.analytic import ProblemParams, landscape_h, multiplier_bounds, reference_mass, thresholds
from normbiharm.radial import sign_changes
from normbiharm.solve import gn_constant_estimate, solve_ground, solve_mountain_pass

N, p, mu = 5, 3.8, 1.0

# The GN constant fixes every threshold, so estimate it first.
gn = gn_constant_estimate(N, p).constant
a = reference_mass(N, p, mu, gn, 0.5)
params = ProblemParams(N, p, a, mu)
th = thresholds(params, gn)
print(f"C_N,p = {gn.c_np:.10f}  (refinement delta {gn.refinement_delta:.1e})")
print(f"a = {a:.6f}: lhs {th.lhs:.4g} vs min threshold {th.minimum:.4g}")

# The energy lower envelope h is negative, positive, then negative again.
ls = landscape_h(params, gn)
print(f"landscape roots R0 = {ls.r0:.4f}, R1 = {ls.r1:.4f}, peak at {ls.t_bar:.4f}")

ground = solve_ground(params, gn)
mp = solve_mountain_pass(params, gn)
upper, lower = multiplier_bounds(params, gn)
for rep in (ground, mp):
    print(f"{rep.branch.value:>15}: E = {rep.energy:.10g}, lambda = {rep.lam:.6g}, "
          f"sign changes = {sign_changes(rep.profile)}, P residual = {rep.pohozaev_residual:.1e}")
print(f"vanishing level -a^2 mu^2/8 = {-a * a * mu * mu / 8:.6g}; multiplier window ({lower:.4g}, {upper:.4g})")
