"""Predictive-maintenance benchmark on seeded synthetic machine fleets.

Submodules are imported on demand so that ``fleetpdm.cli`` can cap BLAS
threads before numpy loads.
"""

__version__ = "0.1.0"
