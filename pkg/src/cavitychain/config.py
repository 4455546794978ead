"""Scenario configuration: flat key-value text files with unit suffixes.

Format: one `key = value` per line, `#` comments.  Physical quantities
carry explicit unit suffixes: cyclic frequency units (Hz, kHz, MHz, GHz)
are converted to angular internally; `kappa` means multiples of the
cavity half-linewidth; lengths accept m, um, nm; masses accept u.
Dimensionless entries carry no suffix.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .core import PhysicalConfig, DomainError

SCENARIOS = ("equilibrium", "map", "resonance", "scaling", "kink")

_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_LENGTH_UNITS = {"m": 1.0, "um": 1e-6, "nm": 1e-9}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


@dataclass(frozen=True)
class ScenarioConfig:
    physical: PhysicalConfig
    scenario: str
    sweep_var: str
    sweep_min: float
    sweep_max: float
    sweep_count: int
    sweep_scale: str
    map_delta_min: float
    map_delta_max: float
    map_delta_count: int
    scan_delta_min: float
    scan_delta_max: float
    scan_count: int
    kink_eta: float
    scaling_sizes: tuple
    scaling_fixed: str
    spectrum_count: int
    spectrum_max: float
    seed: int
    raw: dict = field(default_factory=dict, compare=False)

    def config_hash(self) -> str:
        """Content hash over the semantic fields (not the raw text)."""
        parts = []
        for name in ("scenario", "sweep_var", "sweep_min", "sweep_max",
                     "sweep_count", "sweep_scale", "map_delta_min",
                     "map_delta_max", "map_delta_count", "scan_delta_min",
                     "scan_delta_max", "scan_count", "kink_eta",
                     "scaling_sizes", "scaling_fixed", "spectrum_count",
                     "spectrum_max", "seed"):
            parts.append(f"{name}={getattr(self, name)!r}")
        ph = self.physical
        for name in ("ion_mass", "ion_charge", "wavelength", "kappa",
                     "trap_freq", "pump_strength", "cavity_detuning",
                     "atom_detuning", "vacuum_rabi", "n_ions"):
            parts.append(f"{name}={getattr(ph, name)!r}")
        return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


def _parse_quantity(key: str, text: str, kappa: float | None):
    """Parse `<number> [unit]`; returns a float in internal SI/angular units."""
    parts = text.split()
    if len(parts) == 1:
        try:
            return float(parts[0])
        except ValueError:
            raise ConfigError(f"{key}: cannot parse number {text!r}") from None
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected '<number> [unit]', got {text!r}")
    try:
        value = float(parts[0])
    except ValueError:
        raise ConfigError(f"{key}: cannot parse number {parts[0]!r}") from None
    unit = parts[1].lower()
    if unit in _FREQ_UNITS:
        return 2 * math.pi * value * _FREQ_UNITS[unit]
    if unit in _LENGTH_UNITS:
        return value * _LENGTH_UNITS[unit]
    if unit == "u":
        return value
    if unit == "kappa":
        if kappa is None:
            raise ConfigError(f"{key}: 'kappa' unit used before kappa is defined")
        return value * kappa
    raise ConfigError(f"{key}: unknown unit {parts[1]!r}")


def parse_config_text(text: str, overrides: dict | None = None) -> ScenarioConfig:
    """Parse a config file body into a validated ScenarioConfig."""
    entries: dict[str, str] = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {ln}: expected 'key = value'")
        key, val = body.split("=", 1)
        entries[key.strip()] = val.strip()
    if overrides:
        entries.update({k: str(v) for k, v in overrides.items()})
    return _build(entries)


def _build(entries: dict[str, str]) -> ScenarioConfig:
    def take(key, default=None):
        return entries.pop(key, default)

    scenario = take("scenario", "resonance")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")

    kappa_text = take("kappa")
    if kappa_text is None:
        raise ConfigError("kappa is required")
    kappa = _parse_quantity("kappa", kappa_text, None)

    def qty(key, default_text=None):
        raw = take(key, default_text)
        if raw is None:
            raise ConfigError(f"{key} is required")
        return _parse_quantity(key, raw, kappa)

    wavelength = qty("wavelength")
    ion_mass = qty("ion_mass")
    ion_charge = int(take("ion_charge", "1"))
    n_ions = int(take("n_ions", "11"))
    trap_freq = qty("trap_freq")
    cavity_detuning = qty("cavity_detuning")
    pump_strength = qty("pump_strength", "0")
    atom_detuning = qty("atom_detuning", "12 GHz")
    if "vacuum_rabi" in entries:
        vacuum_rabi = qty("vacuum_rabi")
        take("dispersive_shift")
    else:
        u0 = qty("dispersive_shift")
        if u0 * atom_detuning < 0:
            raise ConfigError("dispersive_shift and atom_detuning must share a sign")
        vacuum_rabi = math.sqrt(abs(u0 * atom_detuning))

    try:
        physical = PhysicalConfig(
            ion_mass=ion_mass, ion_charge=ion_charge, wavelength=wavelength,
            kappa=kappa, trap_freq=trap_freq, pump_strength=pump_strength,
            cavity_detuning=cavity_detuning, atom_detuning=atom_detuning,
            vacuum_rabi=vacuum_rabi, n_ions=n_ions)
    except DomainError as err:
        raise ConfigError(str(err)) from None

    sweep_var = take("sweep_var", "eta")
    if sweep_var not in ("eta", "delta_c"):
        raise ConfigError("sweep_var must be 'eta' or 'delta_c'")
    sweep_min = qty("sweep_min", "1 kappa") / kappa
    sweep_max = qty("sweep_max", "400 kappa") / kappa
    sweep_count = int(take("sweep_count", "200"))
    sweep_scale = take("sweep_scale", "log")
    if sweep_scale not in ("log", "linear"):
        raise ConfigError("sweep_scale must be 'log' or 'linear'")
    if sweep_count < 2:
        raise ConfigError("sweep_count must be >= 2")
    if not (math.isfinite(sweep_min) and math.isfinite(sweep_max)):
        raise ConfigError("sweep range must be finite")
    if sweep_scale == "log" and (sweep_min <= 0 or sweep_max <= 0):
        raise ConfigError("log sweep range must be positive")

    cfg = ScenarioConfig(
        physical=physical,
        scenario=scenario,
        sweep_var=sweep_var,
        sweep_min=sweep_min,
        sweep_max=sweep_max,
        sweep_count=sweep_count,
        sweep_scale=sweep_scale,
        map_delta_min=qty("map_delta_min", "-12 kappa") / kappa,
        map_delta_max=qty("map_delta_max", "-1 kappa") / kappa,
        map_delta_count=int(take("map_delta_count", "12")),
        scan_delta_min=qty("scan_delta_min", "-1.2 kappa") / kappa,
        scan_delta_max=qty("scan_delta_max", "-4.2 kappa") / kappa,
        scan_count=int(take("scan_count", "200")),
        kink_eta=qty("kink_eta", "200 kappa") / kappa,
        scaling_sizes=tuple(int(s) for s in take("scaling_sizes", "11,51,81").split(",")),
        scaling_fixed=take("scaling_fixed", "pump"),
        spectrum_count=int(take("spectrum_count", "400")),
        spectrum_max=qty("spectrum_max", "40 kappa") / kappa,
        seed=int(take("seed", "12345")),
        raw=dict(entries),
    )
    if cfg.scaling_fixed not in ("pump", "depth"):
        raise ConfigError("scaling_fixed must be 'pump' or 'depth'")
    if cfg.map_delta_count < 2 or cfg.scan_count < 2:
        raise ConfigError("grid counts must be >= 2")
    if entries:
        raise ConfigError(f"unknown keys: {sorted(entries)}")
    return cfg


PRESET_COOLING = """\
# ground-state cooling setup: N = 11 chain, soft trap, far detuned pump
scenario = resonance
n_ions = 11
ion_mass = 174 u
ion_charge = 1
wavelength = 369 nm
kappa = 0.2 MHz
trap_freq = 100 kHz
cavity_detuning = -8.5 kappa
dispersive_shift = 0.5 kappa
atom_detuning = 12 GHz
pump_strength = 250 kappa
sweep_var = eta
sweep_min = 1 kappa
sweep_max = 400 kappa
sweep_count = 200
sweep_scale = log
seed = 12345
"""

PRESET_DEFECT = """\
# kink spectroscopy setup: stiffer trap, near resonant pump
scenario = kink
n_ions = 11
ion_mass = 174 u
ion_charge = 1
wavelength = 369 nm
kappa = 0.2 MHz
trap_freq = 700 kHz
cavity_detuning = -1.8 kappa
dispersive_shift = 0.5 kappa
atom_detuning = 12 GHz
pump_strength = 200 kappa
sweep_var = eta
sweep_min = 1 kappa
sweep_max = 400 kappa
sweep_count = 200
sweep_scale = log
kink_eta = 200 kappa
scan_delta_min = -1.2 kappa
scan_delta_max = -4.2 kappa
scan_count = 200
seed = 12345
"""

PRESETS = {"cooling": PRESET_COOLING, "defect": PRESET_DEFECT}


def load_preset(name: str, overrides: dict | None = None) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    return parse_config_text(PRESETS[name], overrides)
