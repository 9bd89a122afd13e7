"""Driven coupled-waveguide lattices: propagation, Floquet spectra and elimination."""
__version__ = "0.1.0"

from ._backend import BACKEND_NAME
from .eliminate import (
    DecayFit,
    EffectiveHamiltonian,
    Regime,
    SubspacePartition,
    adiabatic_ratio,
    classify_regime,
    decay_fit,
    effective_stroboscopic_coupling,
    project_effective,
    ssh4_effective,
)
from .errors import ConfigError, NumericalError
from .evolve import MonodromyResult, PropagationRecord, monodromy, propagate, site_state
from .experiments import (
    EliminationThresholds,
    ExperimentConfig,
    FidelityReport,
    render_intensity_map,
    run_finite_size_experiment,
    run_gauge_experiment,
    run_propagation_experiment,
    run_sweep_experiment,
)
from .floquet import (
    FloquetMode,
    FloquetSpectrum,
    ModeLabel,
    SpectrumSweep,
    band_sweep,
    classify_modes,
    pi_gap,
    pi_splitting,
    quasienergies,
)
from .model import LatticeConfig, bandwidth, build_hamiltonian, drive_coupling, static_reference

__all__ = [
    "BACKEND_NAME", "ConfigError", "DecayFit", "EffectiveHamiltonian", "EliminationThresholds",
    "ExperimentConfig", "FidelityReport", "FloquetMode", "FloquetSpectrum", "LatticeConfig",
    "ModeLabel", "MonodromyResult", "NumericalError", "PropagationRecord", "Regime",
    "SpectrumSweep", "SubspacePartition", "adiabatic_ratio", "band_sweep", "bandwidth",
    "build_hamiltonian", "classify_modes", "classify_regime", "decay_fit", "drive_coupling",
    "effective_stroboscopic_coupling", "monodromy", "pi_gap", "pi_splitting",
    "project_effective", "propagate", "quasienergies", "render_intensity_map",
    "run_finite_size_experiment", "run_gauge_experiment", "run_propagation_experiment",
    "run_sweep_experiment", "site_state", "ssh4_effective", "static_reference",
]
