"""Lake-equation vortex simulator and diagnostics."""

__version__ = "0.1.0"
