"""
Where are the bounds widest?
============================

Holding the observed odds ratio at 0.5 and moving the exposure and
positivity margins shows how the table's shape drives the width of the
sharp bounds.
"""

import numpy as np

from tndsens import fixed_or_scan

rows = fixed_or_scan(0.5)
for xi in ("inf", 2.0):
    w = np.zeros((9, 9))
    for r in rows:
        if r["xi"] == xi:
            w[round(r["m1"] * 10) - 1, round(r["m2"] * 10) - 1] = r["log_width"]
    print(f"log(upper / lower) at delta=0.1, gamma=5, xi={xi}; rows m1, columns m2 = 0.1 .. 0.9")
    for i in range(9):
        print(f"{(i + 1) / 10:.1f} " + " ".join(f"{v:5.2f}" for v in w[i]))
    i, j = np.unravel_index(np.argmax(w), w.shape)
    print(f"widest at m1={(i + 1) / 10:.1f}, m2={(j + 1) / 10:.1f}; center {w[4, 4]:.2f}\n")
