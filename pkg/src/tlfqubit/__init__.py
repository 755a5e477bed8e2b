"""Decoherence of a qubit coupled to a two-level fluctuator in a bosonic bath.

Two engines compute the qubit population difference P(t) = <sigma_x^A>(t):
an analytic master equation in a self-consistently dressed frame
(:mod:`tlfqubit.mastereq`) and a numerically exact QUAPI path integral
(:mod:`tlfqubit.quapi`).
"""
from .bath import SpectralDensityTL, SpectralDensityOhmic, bath_response
from .polaron import ModelParams, solve_self_consistent
from .mastereq import population_difference
from .quapi import influence_coefficients, propagate
from .harness import make_scenario, run_scenario, decoherence_rate

__all__ = [
    "SpectralDensityTL", "SpectralDensityOhmic", "bath_response", "ModelParams",
    "solve_self_consistent", "population_difference", "influence_coefficients",
    "propagate", "make_scenario", "run_scenario", "decoherence_rate",
]
__version__ = "0.1.0"
