"""Spectroscopy simulator for a charged quantum dot coupled to a photonic
crystal waveguide: open-system dynamics of the four-level trion system,
resonance-fluorescence plateau maps, waveguide transmission with spectral
diffusion, pulsed spin pumping, and parameter estimation."""
from .constants import HBAR_EVS, MU_B_EV_PER_T, PACKAGE_VERSION
from .errors import (
    CycleConvergenceError,
    DegenerateKernelError,
    IncompatibleFramesError,
    OutsidePlateauError,
    PositivityError,
    QuadratureConvergenceError,
    SimulationError,
)
from .estimate import (
    BootstrapResult,
    Dataset,
    FitParameter,
    FitProblem,
    FitResult,
    MODELS,
    ModelContext,
    bootstrap_uncertainty,
    dataset_from_csv,
    dataset_to_csv,
    evaluate_model,
    fit,
    fit_problem_from_json,
    fit_problem_to_json,
    fit_result_to_json,
    synth_dataset,
)
from .liouville import (
    DriveAssignment,
    Liouvillian,
    RateMatrix4,
    build_liouvillian,
    effective_cutoff,
    frames_compatible,
    laser_assignments,
    propagate,
    rate_matrix,
    rate_steady_populations,
    scattering_rate,
    steady_state,
)
from .profiles import (
    PROFILE_DEFAULT,
    RABI_MAP,
    RABI_PROBE,
    RABI_PUMP,
    RABI_WEAK,
    available_profiles,
    load_profile,
)
from .qdcore import (
    Branch,
    ChargeState,
    DensityMatrix4,
    DeviceModel,
    LaserField,
    Map2D,
    Port,
    SystemParams,
    charge_state,
    cotunneling_rate,
    device_model_from_json,
    device_model_to_json,
    parameter_hash,
    replace_device,
    replace_params,
    system_params_from_json,
    system_params_to_json,
    transition_energy,
    zeeman_splitting,
)
from .spectro import (
    CycleResult,
    PulseSequence,
    PulseStep,
    TransmissionSpectrum,
    fidelity_from_intensity_ratio,
    photons_per_scattering_cycle,
    plateau_map,
    preparation_fidelity,
    pump_probe_cycle,
    rf_intensity,
    sd_offsets,
    spin_dependent_transmission,
    switching_contrast,
    switching_energy,
    t1_recovery_experiment,
    transmission_amplitude,
    transmission_observed,
    transmission_plateau_map,
    two_color_map,
)

__version__ = PACKAGE_VERSION

__all__ = [
    "HBAR_EVS", "MU_B_EV_PER_T", "PACKAGE_VERSION", "__version__",
    "SimulationError", "OutsidePlateauError", "IncompatibleFramesError",
    "DegenerateKernelError", "PositivityError", "QuadratureConvergenceError",
    "CycleConvergenceError",
    "Branch", "ChargeState", "Port", "SystemParams", "DeviceModel",
    "LaserField", "DensityMatrix4", "Map2D", "charge_state",
    "cotunneling_rate", "transition_energy", "zeeman_splitting",
    "parameter_hash", "replace_params", "replace_device",
    "system_params_to_json", "system_params_from_json",
    "device_model_to_json", "device_model_from_json",
    "DriveAssignment", "Liouvillian", "RateMatrix4", "build_liouvillian",
    "steady_state", "propagate", "scattering_rate", "rate_matrix",
    "rate_steady_populations", "laser_assignments", "frames_compatible",
    "effective_cutoff",
    "PulseStep", "PulseSequence", "TransmissionSpectrum", "CycleResult",
    "sd_offsets", "rf_intensity", "plateau_map", "two_color_map",
    "transmission_amplitude", "transmission_observed",
    "spin_dependent_transmission", "pump_probe_cycle",
    "transmission_plateau_map", "preparation_fidelity",
    "fidelity_from_intensity_ratio", "t1_recovery_experiment",
    "switching_contrast", "photons_per_scattering_cycle", "switching_energy",
    "FitParameter", "ModelContext", "Dataset", "FitProblem", "FitResult",
    "BootstrapResult", "MODELS", "evaluate_model", "fit", "synth_dataset",
    "bootstrap_uncertainty", "fit_problem_to_json", "fit_problem_from_json",
    "fit_result_to_json", "dataset_to_csv", "dataset_from_csv",
    "PROFILE_DEFAULT", "available_profiles", "load_profile",
    "RABI_WEAK", "RABI_MAP", "RABI_PUMP", "RABI_PROBE",
]
