"""attnsearch: search for sparse self-attention connection schemes in residual networks."""

__version__ = "0.1.0"
