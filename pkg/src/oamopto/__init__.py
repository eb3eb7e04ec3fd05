"""Optomechanics with orbital angular momentum of light.

Laguerre-Gaussian beam tools, optomechanical coupling constants, stochastic
dynamics of vibrational, torsional and rotational systems, and the analysis
needed for rotation velocimetry.
"""

__version__ = "0.1.0"

from .beams import (FieldGrid, LGModeSpec, RingLattice, assoc_laguerre, lattice_intensity, lg_amplitude,
                    oam_expectation, phase_plate_transform, render_mode, ring_radius)
from .coupling import (CavityParams, DielectricBody, MechanicalKind, MechanicalParams, ProbeMode,
                       bethe_schwinger_shift, rotational_coupling, saw_azimuthal_overlap, single_photon_coupling,
                       torsional_coupling, vibrational_coupling, zero_point)
from .dynamics import (NoiseConfig, RotationalState, SimulationDiverged, TorsionalState, VibrationalState,
                       adiabatic_field, rotational_steady_state, simulate_rotational, simulate_torsional,
                       simulate_vibrational, step_rotational, step_torsional, step_vibrational)
from .analysis import (DetectionResult, Spectrum, cooling_diagnostic, detect_rotation, displacement_sensitivity,
                       linear_response_rotational, output_spectrum, power_sweep)
from .scenario import Scenario, ScenarioError, parse_scenario

__all__ = [
    "FieldGrid", "LGModeSpec", "RingLattice", "assoc_laguerre", "lattice_intensity", "lg_amplitude",
    "oam_expectation", "phase_plate_transform", "render_mode", "ring_radius",
    "CavityParams", "DielectricBody", "MechanicalKind", "MechanicalParams", "ProbeMode",
    "bethe_schwinger_shift", "rotational_coupling", "saw_azimuthal_overlap", "single_photon_coupling",
    "torsional_coupling", "vibrational_coupling", "zero_point",
    "NoiseConfig", "RotationalState", "SimulationDiverged", "TorsionalState", "VibrationalState",
    "adiabatic_field", "rotational_steady_state", "simulate_rotational", "simulate_torsional",
    "simulate_vibrational", "step_rotational", "step_torsional", "step_vibrational",
    "DetectionResult", "Spectrum", "cooling_diagnostic", "detect_rotation", "displacement_sensitivity",
    "linear_response_rotational", "output_spectrum", "power_sweep",
    "Scenario", "ScenarioError", "parse_scenario",
]
