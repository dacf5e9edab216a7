"""Topic diffusion on small-world networks: simulation, mean-field theory and analysis."""

__version__ = "0.1.0"
