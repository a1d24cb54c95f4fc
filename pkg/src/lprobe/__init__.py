"""Loss-landscape probing for neural-network Poisson solvers."""

__version__ = "0.1.0"
