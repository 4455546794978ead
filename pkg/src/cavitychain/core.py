"""Parameters, unit conversion, and the mean-field potential primitives.

Internal unit system: every frequency is measured in units of the cavity
half-linewidth kappa (so kappa = 1 internally), ion positions are optical
phases theta = k*x, and energies are in units of hbar*kappa.  All other
modules work exclusively in these units; conversion happens here and only
here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# CODATA 2018 values, SI
HBAR = 1.0545718176461565e-34
ELEMENTARY_CHARGE = 1.602176634e-19
EPSILON_0 = 8.8541878128e-12
ATOMIC_MASS = 1.66053906660e-27


class DomainError(ValueError):
    """Input outside the physical domain (coincident ions, bad config)."""


@dataclass(frozen=True)
class PhysicalConfig:
    """Laboratory-frame description of the setup, SI units throughout.

    ion_mass is in atomic mass units, ion_charge a positive integer
    multiple of e.  All frequencies are angular (rad/s).  The dispersive
    shift per ion is u0 = vacuum_rabi**2 / atom_detuning, so the sign of
    atom_detuning selects attractive or repulsive lattice wells.
    """

    ion_mass: float
    ion_charge: int
    wavelength: float
    kappa: float
    trap_freq: float
    pump_strength: float
    cavity_detuning: float
    atom_detuning: float
    vacuum_rabi: float
    n_ions: int

    def __post_init__(self):
        for name in ("ion_mass", "wavelength", "kappa", "trap_freq", "vacuum_rabi"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.pump_strength < 0:
            raise DomainError("pump_strength must be nonnegative")
        if self.atom_detuning == 0:
            raise DomainError("atom_detuning must be nonzero")
        if self.ion_charge < 1:
            raise DomainError("ion_charge must be a positive integer")
        if self.n_ions < 1:
            raise DomainError("n_ions must be >= 1")

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def recoil_freq(self) -> float:
        """omega_R = hbar k^2 / (2 m), rad/s."""
        m = self.ion_mass * ATOMIC_MASS
        return HBAR * self.wavenumber**2 / (2 * m)

    @property
    def dispersive_shift(self) -> float:
        """U_0 = g^2 / Delta_d, rad/s, sign inherited from the detuning."""
        return self.vacuum_rabi**2 / self.atom_detuning


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters, everything in units of kappa.

    coulomb is the dimensionless Coulomb constant C = q^2 k / (4 pi eps0
    hbar kappa) appearing in front of the 1/|theta_i - theta_j| terms.
    """

    u0: float
    eta: float
    delta_c: float
    omega_t: float
    omega_r: float
    coulomb: float
    n_ions: int

    def __post_init__(self):
        if self.coulomb <= 0 or self.omega_r <= 0 or self.omega_t <= 0:
            raise DomainError("coulomb, omega_r, omega_t must be positive")
        if self.eta < 0:
            raise DomainError("eta must be nonnegative")
        if self.n_ions < 1:
            raise DomainError("n_ions must be >= 1")

    @property
    def trap_coeff(self) -> float:
        """Quadratic trap coefficient of V/hbar kappa in phase units."""
        return self.omega_t**2 / (4 * self.omega_r)

    def with_eta(self, eta: float) -> "ModelParams":
        return replace(self, eta=float(eta))

    def with_delta_c(self, delta_c: float) -> "ModelParams":
        return replace(self, delta_c=float(delta_c))


@dataclass(frozen=True)
class IonConfiguration:
    """Ion positions as strictly increasing optical phases theta_j = k x_j."""

    phases: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))
        if self.phases.ndim != 1:
            raise DomainError("phases must be a 1-d array")
        if self.phases.size > 1 and not np.all(np.diff(self.phases) > 0):
            raise DomainError("phases must be strictly increasing")

    def __len__(self) -> int:
        return self.phases.size


def asphases(cfg) -> np.ndarray:
    """Accept an IonConfiguration or a bare array of ordered phases."""
    if isinstance(cfg, IonConfiguration):
        return cfg.phases
    th = np.asarray(cfg, dtype=float)
    if th.size > 1 and not np.all(np.diff(th) > 0):
        raise DomainError("phases must be strictly increasing")
    return th


def nondimensionalize(config: PhysicalConfig) -> ModelParams:
    """Convert a PhysicalConfig to internal kappa units."""
    q = config.ion_charge * ELEMENTARY_CHARGE
    k = config.wavenumber
    coulomb = q**2 * k / (4 * math.pi * EPSILON_0 * HBAR * config.kappa)
    return ModelParams(
        u0=config.dispersive_shift / config.kappa,
        eta=config.pump_strength / config.kappa,
        delta_c=config.cavity_detuning / config.kappa,
        omega_t=config.trap_freq / config.kappa,
        omega_r=config.recoil_freq / config.kappa,
        coulomb=coulomb,
        n_ions=config.n_ions,
    )


def redimensionalize(params: ModelParams, kappa: float, wavelength: float,
                     ion_charge: int = 1, atom_detuning: float | None = None) -> PhysicalConfig:
    """Inverse of nondimensionalize, up to the (g, Delta_d) split of u0.

    The dimensionless parameters fix only the product U_0 = g^2/Delta_d;
    the caller supplies Delta_d (default 2 pi x 12 GHz) and g is derived.
    """
    if atom_detuning is None:
        atom_detuning = 2 * math.pi * 12e9
    q = ion_charge * ELEMENTARY_CHARGE
    k = 2 * math.pi / wavelength
    # invert the coulomb constant for the mass via omega_r
    m = HBAR * k**2 / (2 * params.omega_r * kappa)
    u0_si = params.u0 * kappa
    if u0_si * atom_detuning < 0:
        atom_detuning = -atom_detuning
    g = math.sqrt(u0_si * atom_detuning)
    expected_c = q**2 * k / (4 * math.pi * EPSILON_0 * HBAR * kappa)
    if abs(expected_c / params.coulomb - 1) > 1e-9:
        raise DomainError("coulomb constant inconsistent with the given charge and wavelength")
    return PhysicalConfig(
        ion_mass=m / ATOMIC_MASS,
        ion_charge=ion_charge,
        wavelength=wavelength,
        kappa=kappa,
        trap_freq=params.omega_t * kappa,
        pump_strength=params.eta * kappa,
        cavity_detuning=params.delta_c * kappa,
        atom_detuning=atom_detuning,
        vacuum_rabi=g,
        n_ions=params.n_ions,
    )


def effective_detuning(params: ModelParams, cfg) -> float:
    """Delta_eff = Delta_c - U0 sum_j cos^2(theta_j), units of kappa."""
    th = asphases(cfg)
    return params.delta_c - params.u0 * float(np.sum(np.cos(th) ** 2))


def cavity_amplitude(params: ModelParams, cfg) -> complex:
    """Mean-field amplitude abar = eta / (kappa - i Delta_eff), kappa = 1."""
    d = effective_detuning(params, cfg)
    return params.eta / (1.0 - 1j * d)


def mean_photon_number(params: ModelParams, cfg) -> float:
    return abs(cavity_amplitude(params, cfg)) ** 2


def _check_separated(th: np.ndarray):
    if th.size > 1 and np.min(np.diff(np.sort(th))) <= 0:
        raise DomainError("coincident ions")


def total_potential(params: ModelParams, cfg) -> float:
    """V_tot / (hbar kappa): trap + Coulomb + adiabatic cavity potential.

    The cavity part is (eta/kappa)^2 arctan(-Delta_eff/kappa), whose
    gradient reproduces the mean-field optical force at abar(theta).
    """
    th = asphases(cfg)
    _check_separated(th)
    diffs = np.subtract.outer(th, th)
    iu = np.triu_indices(th.size, 1)
    v_ions = params.trap_coeff * float(np.sum(th**2))
    v_ions += params.coulomb * float(np.sum(1.0 / np.abs(diffs[iu])))
    return v_ions + params.eta**2 * math.atan(-effective_detuning(params, th))


def total_gradient(params: ModelParams, cfg) -> np.ndarray:
    """Exact gradient of total_potential with respect to each phase.

    The arctan chain rule collapses to the force form
    -u0 |abar|^2 d/dtheta_j cos^2(theta_j), used here directly.
    """
    th = asphases(cfg)
    _check_separated(th)
    diffs = np.subtract.outer(th, th)
    with np.errstate(divide="ignore"):
        inv2 = np.where(diffs != 0, 1.0 / diffs**2, 0.0) * np.sign(diffs)
    g = 2 * params.trap_coeff * th - params.coulomb * np.sum(inv2, axis=1)
    d = params.delta_c - params.u0 * float(np.sum(np.cos(th) ** 2))
    nbar = params.eta**2 / (1 + d**2)
    g += -params.u0 * nbar * np.sin(2 * th)
    return g


def chain_hessian(params: ModelParams, cfg) -> np.ndarray:
    """Hessian of trap + Coulomb + lattice curvature at frozen field.

    The field amplitude is held at its local value; the extra curvature
    from the field's adiabatic response is in total_hessian.  This frozen
    form is the one whose eigenmodes define the vibrational spectrum.
    """
    th = asphases(cfg)
    _check_separated(th)
    n = th.size
    diffs = np.subtract.outer(th, th)
    with np.errstate(divide="ignore"):
        inv3 = np.where(diffs != 0, 1.0 / np.abs(diffs) ** 3, 0.0)
    H = -2 * params.coulomb * inv3
    np.fill_diagonal(H, 2 * params.trap_coeff + 2 * params.coulomb * np.sum(inv3, axis=1))
    d = params.delta_c - params.u0 * float(np.sum(np.cos(th) ** 2))
    nbar = params.eta**2 / (1 + d**2)
    H += np.diag(-2 * params.u0 * nbar * np.cos(2 * th))
    return H


def total_hessian(params: ModelParams, cfg) -> np.ndarray:
    """Full Hessian of total_potential, including the adiabatic field response.

    Adds the rank-1 term from d(nbar)/d(theta) to chain_hessian; this is
    the curvature that decides stability of the mean-field minimum.
    """
    th = asphases(cfg)
    H = chain_hessian(params, th)
    d = params.delta_c - params.u0 * float(np.sum(np.cos(th) ** 2))
    nbar = params.eta**2 / (1 + d**2)
    s = np.sin(2 * th)
    return H + 2 * params.u0**2 * nbar * (d / (1 + d**2)) * np.outer(s, s)
