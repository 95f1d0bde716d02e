"""Bloch modes and parametric down-conversion in one-dimensional nonlinear photonic crystals."""

from .band_diagram import band_gaps, band_scan, dispersion_surface, effective_indices
from .bloch_modes import BlochMode, FourierWindow, bloch_mode, co_propagating_mode
from .config import ConfigError, RunConfig, parse_config
from .materials import VACUUM, Chi2Tensor, DispersionModel, Material, algaas, refractive_index
from .phase_matching import (
    ProcessSpec,
    emission_map,
    find_intersections,
    make_candidate,
    phi_fourier,
    phi_spatial,
)
from .structure import BraggStructure, ModeQuery, Polarization
from .transfer_matrix import bloch_wavevector, cell_matrix

__all__ = [
    "BlochMode", "BraggStructure", "Chi2Tensor", "ConfigError", "DispersionModel",
    "FourierWindow", "Material", "ModeQuery", "Polarization", "ProcessSpec", "RunConfig",
    "VACUUM", "algaas", "band_gaps", "band_scan", "bloch_mode", "bloch_wavevector",
    "cell_matrix", "co_propagating_mode", "dispersion_surface", "effective_indices",
    "emission_map", "find_intersections", "make_candidate", "parse_config", "phi_fourier",
    "phi_spatial", "refractive_index",
]

__version__ = "0.1.0"
