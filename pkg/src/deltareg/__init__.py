"""deltareg: hard-instance construction and exact verification for graph and
hypergraph regularity, with machine-readable irregularity certificates."""

__version__ = "0.1.0"
