"""Nonclassicality as a metrological resource: quadrature-variance measures,
quantum Fisher information and phase-estimation advantage on truncated
Fock spaces and Gaussian states."""

__version__ = "0.1.0"
