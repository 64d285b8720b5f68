"""Per-block connection frequencies of good and bad scheme sets, their
linear trend, and ratio-grouped study aggregation."""

import numpy as np

from attnsearch.search import SyntheticLandscape, all_schemes, random_ratio_study
from attnsearch.stats import aggregate_violin, connection_score, regression_slope

M = 8
land = SyntheticLandscape(M, seed=11)
scored = sorted(((land(s), s) for s in all_schemes(M)), reverse=True,
                key=lambda t: t[0])
top = [s for _, s in scored[:25]]
bottom = [s for _, s in scored[-25:]]

for label, bag in (("top-25 schemes", top), ("bottom-25 schemes", bottom)):
    score = connection_score(bag)
    print(f"{label}: connection score {np.round(score, 2)}")
    print(f"  least-squares slope over block index: {regression_slope(score):+.4f}")

rows = random_ratio_study(land, M, [0.25, 0.5, 0.75], 40, np.random.default_rng(12))
print("\nratio  max    mean   min   (pseudo-accuracy)")
for ratio, (mx, mean, mn) in aggregate_violin(rows).items():
    print(f"{ratio:.2f}  {mx:.4f} {mean:.4f} {mn:.4f}")
