"""Random-matrix averages for von Neumann measurements with GUE observables."""

__version__ = "0.1.0"
