"""
Sensitivity band along a continuous covariate
=============================================

With a continuous covariate the cell probabilities follow a multinomial
logit in the covariate. The fitted model gives an ellipse for the cells
at every covariate value at once, and the band takes the worst case of the
sensitivity bounds over each ellipse.
"""

import numpy as np

from tndsens import SensitivityParams, band_bounds, fit_mnl, predict_pi, simulate_continuous, true_band
from tndsens.simlab import REFERENCE_BETA

params = SensitivityParams(0.1, 5.0, 2.0)
data = simulate_continuous(REFERENCE_BETA, 50000, seed=3)
fit = fit_mnl(data)
print("converged in", fit.iterations, "iterations")
print("estimated coefficients (rows 10, 01, 11)")
print(np.round(fit.beta, 3))
print("cells at c = 0:", np.round(predict_pi(fit, 0.0).cells, 4))

# %%
# The band on a coarse grid
# -------------------------
# ``box-hull`` uses the per-cell extent of each ellipse and is quicker but
# wider; ``exact-set`` optimizes over the ellipse itself.
grid = np.linspace(0, 1, 6)
truth = true_band(REFERENCE_BETA, grid, params)
exact = band_bounds(fit, grid, 0.05, params, route="exact-set")
hull = band_bounds(fit, grid, 0.05, params, route="box-hull")
print("   c   true bounds        exact-set band     box-hull band")
for t, e, h in zip(truth, exact.rows, hull.rows):
    print(f"{e.c:4.1f}  [{t.lower:.3f}, {t.upper:.3f}]  [{e.ci.lower:.3f}, {e.ci.upper:.3f}]"
          f"  [{h.ci.lower:.3f}, {h.ci.upper:.3f}]")
print("exact-set band covers the truth:", exact.covers(truth))
