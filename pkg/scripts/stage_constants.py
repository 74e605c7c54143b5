"""Print MAGENTA's per-stage stepsize and the c1/c2/c3 constants for a few curvature levels."""

import numpy as np

from decentopt.algorithms import default_gamma, magenta_stepsize, theorem1_constants

N = 4
ETA = 0.5  # deviation norm of a typical 4-node mixing matrix
gamma = default_gamma(ETA)
xi = 1.0

print(f"gamma={gamma:g} xi={xi:g} eta={ETA:g} n={N}")
print(f"{'l_hat':>10} {'alpha':>12} {'c1':>12} {'c2':>12} {'c3':>12} {'1/(32n)':>10}")
for l_hat in np.logspace(0, 6, 7):
    a = magenta_stepsize(l_hat, N, gamma, xi, ETA)
    c1, c2, c3 = theorem1_constants(a, l_hat, l_hat, N, gamma, xi, ETA)
    print(f"{l_hat:10.3g} {a:12.4g} {c1:12.4g} {c2:12.4g} {c3:12.4g} {1 / (32 * N):10.4g}")
