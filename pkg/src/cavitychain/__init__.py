"""Quantum optomechanics of a laser-pumped ion chain in a lossy cavity.

Mean-field equilibria of the coupled chain-cavity system, vibrational
mode structure, linearized quantum fluctuation statistics (covariances,
occupations, entanglement, output spectra), closed-form sideband cooling
theory, and sweep scenarios with a CLI front end.
"""

__version__ = "0.1.0"

from .core import (DomainError, IonConfiguration, ModelParams,
                   PhysicalConfig, cavity_amplitude, chain_hessian,
                   effective_detuning, mean_photon_number, nondimensionalize,
                   redimensionalize, total_gradient, total_hessian,
                   total_potential)
from .equilibrium import (ConvergenceError, EquilibriumState, KinkDescriptor,
                          Phase, TransitionPoint, bare_chain_equilibrium,
                          classify_phase, continuation_sweep, find_transition,
                          solve_equilibrium)
from .modes import (ModeDecomposition, UnstableEquilibriumError,
                    coupling_coefficients, mode_decomposition, normal_modes)
from .fluctuations import (ConditioningError, DriftSystem, GeneralizedModes,
                           InstabilityError, PhysicalityError, SteadyState,
                           build_drift_system, eigen_rates, log_negativity,
                           mode_occupations, output_spectrum,
                           physicality_margin, restrict_to_coupled,
                           steady_covariance_eigenbasis,
                           steady_covariance_lyapunov, steady_state)
from .rates import (ChainScales, SidebandRates, bulk_rate_estimate,
                    chain_scales, resonance_finder, sideband_rates)
from .config import (ConfigError, PRESETS, ScenarioConfig, load_preset,
                     parse_config_text)
from .sweeps import SweepDataset, export_dataset, match_rates, run_scenario
