"""Radiative decay of Frenkel excitons in thin multilayer crystal slabs.

Modules: model (parameters, states), coupling (photon-mediated exciton
coupling), spectrum (certified complex eigenfrequencies), dynamics (emitted
field and flux), oracle (time-domain brute force), closed_forms
(leading-order N = 2, 3 formulas), validation and cli.
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CertificationError,
    ConfigError,
    ExcitonSlabError,
    InvalidParameterError,
    ResolutionError,
    UnsupportedError,
)
from .model import ExcitonMoments, SlabParams, build_mode_grid, moments_from_state_spec  # noqa: E402
from .spectrum import find_modes, perturbative_roots, secular_det  # noqa: E402
from .dynamics import DetectorSpec, field_trace, flux_trace, energy_bookkeeping  # noqa: E402

__all__ = [
    "CertificationError", "ConfigError", "ExcitonSlabError", "InvalidParameterError",
    "ResolutionError", "UnsupportedError", "ExcitonMoments", "SlabParams", "build_mode_grid",
    "moments_from_state_spec", "find_modes", "perturbative_roots", "secular_det",
    "DetectorSpec", "field_trace", "flux_trace", "energy_bookkeeping",
]
