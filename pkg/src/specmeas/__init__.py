"""Spectral measures of infinite matrices from rectangular resolvent solves.

Operators are given by their matrix entries plus a column-decay certificate;
everything else (smoothed measures, projections, densities, functional
calculus, spectral decompositions, collocation) is built on certified
least-squares resolvent solves.
"""
from .collocation import BasisFamily, collocate, reconstruct
from .decompositions import (
    ac_spectrum_stage,
    continuous_part,
    measure_decomposition,
    pp_spectrum_stage,
    sc_spectrum_stage,
    singular_part,
)
from .density import rate_study, rn_derivative, smoothed_density
from .funcalc import BoundedFunctionSpec, ContourSpec, apply_cb_function, apply_holomorphic, evolve
from .gallery import build
from .operator_model import ColumnDecayOperator, DecaySequence, DecayVector, Dispersion, OpenRealSet
from .poisson import atom_weight, find_atoms, measure_of_set, smoothed_kernel, spectral_projection
from .resolvent import ResolventNotConverged, resolvent_action, resolvent_action_adaptive, resolvent_batch

__version__ = "0.1.0"

__all__ = [
    "BasisFamily",
    "BoundedFunctionSpec",
    "ColumnDecayOperator",
    "ContourSpec",
    "DecaySequence",
    "DecayVector",
    "Dispersion",
    "OpenRealSet",
    "ResolventNotConverged",
    "ac_spectrum_stage",
    "apply_cb_function",
    "apply_holomorphic",
    "atom_weight",
    "build",
    "collocate",
    "continuous_part",
    "evolve",
    "find_atoms",
    "measure_decomposition",
    "measure_of_set",
    "pp_spectrum_stage",
    "rate_study",
    "reconstruct",
    "resolvent_action",
    "resolvent_action_adaptive",
    "resolvent_batch",
    "rn_derivative",
    "sc_spectrum_stage",
    "singular_part",
    "smoothed_density",
    "smoothed_kernel",
    "spectral_projection",
]
