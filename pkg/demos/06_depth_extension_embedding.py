"""Two exact constructions on residual chains: padding depth with zero
layers (function unchanged bit for bit) and hiding a narrow chain inside a
wider one behind a unit mask."""

import numpy as np

from attnsearch.theory import ResNetChain, embed_as_subnetwork, extend_network

rng = np.random.default_rng(0)
chain = ResNetChain.random(dim=4, widths=[3, 3, 2], rng=rng)
probes = rng.standard_normal((100, 4))

extended = extend_network(chain, extra_layers=5)
gap = np.abs(extended.forward(probes) - chain.forward(probes)).max()
print(f"depth {chain.depth} -> {extended.depth}; max |f(x) - g(x)| = {gap}")

wide, masks = embed_as_subnetwork(chain, wide_width=8, rng=rng)
masked_gap = np.abs(wide.forward(probes, masks) - chain.forward(probes)).max()
free_gap = np.abs(wide.forward(probes) - chain.forward(probes)).max()
print(f"masked wide chain reproduces the narrow one to {masked_gap:.2e}")
print(f"without the mask the wide chain differs by up to {free_gap:.3f}")
