"""Robust two-dimensional polynomial beamformer design and processing.

Subpackages follow the processing chain: :mod:`geometry` and
:mod:`acoustics` describe the array, :mod:`design` and :mod:`solver`
compute optimal frequency-domain weights, :mod:`fir` realizes them as FIR
filters, :mod:`engine` runs them on audio, :mod:`metrics` and :mod:`sim`
evaluate the result and :mod:`cli` ties everything together.
"""

from .acoustics import FreeFieldModel, RigidSphereModel, impulse_responses, load_ir_set
from .design import DesignSpec, FreqWeights, design_beamformer, design_rlsfi, desired_response
from .engine import Processor, effective_filters
from .fir import PolynomialBeamformer, realize_fir
from .geometry import (
    Direction,
    SteeringState,
    angular_distance,
    interpolation_factors,
    make_design_grid,
    make_pld_grid,
    spherical_cap_array,
)

__version__ = "0.1.0"

__all__ = [
    "DesignSpec",
    "Direction",
    "FreeFieldModel",
    "FreqWeights",
    "PolynomialBeamformer",
    "Processor",
    "RigidSphereModel",
    "SteeringState",
    "angular_distance",
    "design_beamformer",
    "design_rlsfi",
    "desired_response",
    "effective_filters",
    "impulse_responses",
    "interpolation_factors",
    "load_ir_set",
    "make_design_grid",
    "make_pld_grid",
    "realize_fir",
    "spherical_cap_array",
]
