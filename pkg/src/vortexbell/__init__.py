"""Phase-space (Wigner) Bell tests for optical vortex beams.

Analytic Laguerre-Gaussian Wigner functions, a simulated shearing Sagnac
interferometer, Fourier reconstruction of Wigner slices and the
continuous-variable Bell-CHSH parameter.
"""

from .bell_analysis import (BellResult, BellSettings, bell_parameter, bell_two_param_surface, bell_value,
                            bell_vs_order, maximize_bell, neighborhood_check)
from .errors import (CalibrationError, ConfigurationError, DataIntegrityError, DomainError, RangeError,
                     VortexBellError)
from .lg_fields import BeamSpec, FieldGrid, apply_spp, inner_product, laguerre, lg_field, winding_number
from .ssi_sim import (GlassBlock, InterferogramSet, NoiseModel, ShearSetting, TPCFRecord, extract_tpcf,
                      synthesize_interferograms)
from .wdf_reconstruct import AxisCalibration, WignerSlice, calibrate_axes, tpcf_to_wdf_slice
from .wigner_analytic import QuadraturePoint, pi_value, q_invariants, wdf_analytic

__version__ = "0.1.0"

__all__ = [
    "AxisCalibration", "BeamSpec", "BellResult", "BellSettings", "CalibrationError", "ConfigurationError",
    "DataIntegrityError", "DomainError", "FieldGrid", "GlassBlock", "InterferogramSet", "NoiseModel",
    "QuadraturePoint", "RangeError", "ShearSetting", "TPCFRecord", "VortexBellError", "WignerSlice",
    "apply_spp", "bell_parameter", "bell_two_param_surface", "bell_value", "bell_vs_order",
    "calibrate_axes", "extract_tpcf", "inner_product", "laguerre", "lg_field", "maximize_bell",
    "neighborhood_check", "pi_value", "q_invariants", "synthesize_interferograms", "tpcf_to_wdf_slice",
    "wdf_analytic", "winding_number",
]
