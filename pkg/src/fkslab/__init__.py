"""Random-cluster and Potts models on slabs: exact oracles, samplers, crossing machinery."""

__version__ = "0.1.0"
