"""Check the hidden-width bound numerically.

Computes the bound under both degree-of-freedom conventions, samples
networks at the bound width to estimate the failure probability of the
row-zeroing guarantee, and verifies the proof's error bound dominates the
measured error on random instances.
"""

import numpy as np

from attnsearch.theory import (Thm1Instance, chi_square_tail,
                               min_row_zeroing_error, thm1_monte_carlo,
                               thm1_width_bound)

D, EPS, DELTA = 6, 1.0, 0.1
rng = np.random.default_rng(0)

print(f"inputs: d={D}, epsilon={EPS}, delta={DELTA}")
print(f"tail probabilities: P(chi2({D-1}) >= {EPS**2}) = {chi_square_tail(D-1, EPS):.6f}, "
      f"P(chi2({D}) >= {EPS**2}) = {chi_square_tail(D, EPS):.6f}")
for conv in ("literal", "corrected"):
    m = thm1_width_bound(D, EPS, DELTA, conv)
    out = thm1_monte_carlo(D, EPS, DELTA, 1000, rng, conv)
    print(f"{conv:9s}: m_min={m:6d}  failure_rate={out['failure_rate']:.4f}  "
          f"band={out['band']:.4f}  {'OK' if out['passed'] else 'BAND EXCEEDED'}")

print("\nrow-zeroing error vs the proof bound, 20 random instances:")
worst = 0.0
for _ in range(20):
    inst = Thm1Instance.draw(D, 32, 50, rng)
    _, measured, bound = min_row_zeroing_error(inst)
    worst = max(worst, measured / bound if bound else 0.0)
print(f"  max measured/bound ratio: {worst:.3f} (must stay <= 1)")
