"""Numerical laboratory for multi-soliton dynamics of the 1D supercritical NLS."""
from .errors import (BlowUpError, ConfigError, ExtractionError, FrameDegeneracyError,
                     GridError, NLSMultiError, ShootingError, SpectralError, VerifierFailure)
from .grid import Grid, inner_product, make_grid, sigma_pairing, spectral_derivative, weighted_norm
from .solitons import (MultiSolitonConfig, SolitonParams, galilean_lift, ground_state,
                       ground_state_family, multi_soliton, single, solitary_wave)

__version__ = "0.1.0"
