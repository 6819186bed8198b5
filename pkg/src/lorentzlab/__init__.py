"""Numerical laboratory for maximizing causal curves of periodic Lorentzian metrics on tori."""
from .errors import LorentzError
from .spacetime import (CausalPath, HedlundParams, MetricField, TangentVector, TrigPoly, make_boundary_2torus,
                        make_conformally_flat, make_constant, make_flat, make_hedlund)

__version__ = "0.1.0"

__all__ = ["CausalPath", "HedlundParams", "LorentzError", "MetricField", "TangentVector", "TrigPoly",
           "make_boundary_2torus", "make_conformally_flat", "make_constant", "make_flat", "make_hedlund"]
