"""Shrinking the second-order coefficient: both states as mu -> 0.

The local minimizer flattens toward zero energy while the mountain-pass
state approaches the mu = 0 profile.
"""

import os

from normbiharm.analytic import ProblemParams, reference_mass
from normbiharm.harness import sweep_mu
from normbiharm.solve import gn_constant_estimate

N, p = 5, 3.8
gn = gn_constant_estimate(N, p).constant
params = ProblemParams(N, p, reference_mass(N, p, 1.0, gn, 0.5), 1.0)

res = sweep_mu(params, gn, [1.0, 0.5, 0.25, 0.125, 0.0625], workers=min(5, os.cpu_count() or 1))
print(f"{'mu':>8} {'m_r':>14} {'|Lap u|':>12} {'sigma':>14} {'H2 rel':>10}")
for row in res.rows:
    print(f"{row['mu']:8.4f} {row['m_r']:14.6g} {row['lap_norm_ground']:12.6g} "
          f"{row['sigma']:14.8g} {row['h2_relative_limit']:10.3g}")
print(f"sigma at mu = 0: {res.rows[0]['sigma_limit']:.8g}")
