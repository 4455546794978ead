"""Closed-form sideband cooling theory and parameter-regime estimators.

Perturbative rates valid for kappa >> |chi|; outputs carry a validity
flag instead of refusing outside that regime so benchmark overlays can be
produced everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ModelParams, asphases, mean_photon_number
from .equilibrium import bare_chain_equilibrium


@dataclass(frozen=True)
class SidebandRates:
    """Heating / cooling coefficients of a single mode against the cavity.

    cooling is False when delta_eff >= 0, where no thermal steady state
    exists and n_analytic is meaningless (set to nan).  valid flags the
    perturbative condition kappa > |chi|.
    """

    a_plus: float
    a_minus: float
    w_cool: float
    n_analytic: float
    cooling: bool
    valid: bool


def sideband_rates(chi_abs: float, omega: float, delta_eff: float,
                   kappa: float = 1.0) -> SidebandRates:
    """Scattering rates on the two sidebands of one vibrational mode.

    A_+- = (chi^2/kappa) / (1 + (delta_eff -+ omega)^2 / kappa^2); the
    steady occupation for delta_eff < 0 follows from detailed balance.
    """
    if omega <= 0 or kappa <= 0:
        raise ValueError("omega and kappa must be positive")
    c2 = chi_abs**2 / kappa
    a_plus = c2 / (1 + (delta_eff - omega) ** 2 / kappa**2)
    a_minus = c2 / (1 + (delta_eff + omega) ** 2 / kappa**2)
    cooling = delta_eff < 0
    if cooling:
        n = ((delta_eff + omega) ** 2 + kappa**2) / (-4 * omega * delta_eff)
    else:
        n = math.nan
    return SidebandRates(a_plus=a_plus, a_minus=a_minus, w_cool=a_minus - a_plus,
                         n_analytic=n, cooling=cooling, valid=kappa > chi_abs)


def bulk_rate_estimate(params: ModelParams, state) -> float:
    """Collective center-of-mass cooling rate estimate for a uniform mode.

    W_bulk = (omega_r/omega_t) (u0^2 |abar|^2 / kappa) [sum_j sin 2theta_j]^2 / N;
    vanishes on any mirror-symmetric configuration.
    """
    th = _phases(state)
    nbar = mean_photon_number(params, th)
    s = float(np.sum(np.sin(2 * th)))
    return (params.omega_r / params.omega_t) * params.u0**2 * nbar * s**2 / params.n_ions


def _phases(state) -> np.ndarray:
    if hasattr(state, "phases"):
        return np.asarray(state.phases, dtype=float)
    return asphases(state)


@dataclass(frozen=True)
class ChainScales:
    """Characteristic scales in internal units: phases and kappa."""

    d0: float
    omega0: float
    ell: float


def chain_scales(params: ModelParams) -> ChainScales:
    """Central-spacing estimate d0, its Coulomb frequency, and the length unit.

    All in phase units (multiply by 1/k for meters): ell is the two-ion
    length scale, d0 the approximate central spacing of an N-ion chain,
    d0 = ell (3 ln N / N^2)^(1/3), and omega0 (units of kappa) the
    frequency of the Coulomb interaction at distance d0.
    """
    n = params.n_ions
    if n < 2:
        raise ValueError("chain scales need at least 2 ions")
    k_ell = (2 * params.coulomb * params.omega_r / params.omega_t**2) ** (1 / 3)
    k_d0 = k_ell * (3 * math.log(n) / n**2) ** (1 / 3)
    omega0 = math.sqrt(2 * params.coulomb * params.omega_r / k_d0**3)
    return ChainScales(d0=k_d0, omega0=omega0, ell=k_ell)


def _target_frequency(selector, freqs: np.ndarray, chi: np.ndarray,
                      threshold: float = 1e-8) -> float:
    """Resolve a target-mode selector to a frequency.

    "band-mean": mean frequency of the coupled modes; "lowest-coupled" or
    "kink": lowest coupled mode; an integer picks that mode index.
    """
    coupled = np.abs(chi) > threshold
    if isinstance(selector, (int, np.integer)):
        return float(freqs[int(selector)])
    if selector == "band-mean":
        if not np.any(coupled):
            return float(np.mean(freqs))
        return float(np.mean(freqs[coupled]))
    if selector in ("lowest-coupled", "kink"):
        if not np.any(coupled):
            return float(freqs[0])
        return float(np.min(freqs[coupled]))
    raise ValueError(f"unknown target mode selector {selector!r}")


def resonance_finder(params: ModelParams, target_mode="band-mean",
                     sweep_var: str = "eta", lo: float | None = None,
                     hi: float | None = None, n_grid: int = 60,
                     rel_width: float = 1e-3):
    """Root of delta_eff(v) + omega_target(v) = 0 along the equilibrium branch.

    Bisects on the sign change of the mismatch while re-solving the
    equilibrium at every probe (warm-started along the sweep).  Returns
    the root value of the swept variable, or None when the mismatch never
    changes sign in range.
    """
    from .equilibrium import find_transition, solve_equilibrium
    from .modes import mode_decomposition

    # the defect mode only exists on the pinned branch, so start there
    kink_only = target_mode == "kink"
    if sweep_var == "eta":
        lo = 1.0 if lo is None else lo
        hi = 400.0 if hi is None else hi
        if kink_only:
            tr = find_transition(params, eta_lo=lo, eta_hi=hi)
            if tr is None:
                return None
            lo = max(lo, tr.eta_critical * 1.001)
        grid = np.geomspace(lo, hi, n_grid)

        def at(v, seed):
            pe = params.with_eta(float(v))
            st = solve_equilibrium(pe, seed)
            md = mode_decomposition(pe, st)
            f = st.delta_eff + _target_frequency(target_mode, md.freqs, md.couplings)
            return f, st
    elif sweep_var == "delta_c":
        if lo is None or hi is None:
            raise ValueError("delta_c sweeps need explicit bounds")
        grid = np.linspace(lo, hi, n_grid)

        def at(v, seed):
            pd = params.with_delta_c(float(v))
            st = solve_equilibrium(pd, seed)
            md = mode_decomposition(pd, st)
            f = st.delta_eff + _target_frequency(target_mode, md.freqs, md.couplings)
            return f, st
    else:
        raise ValueError("sweep_var must be 'eta' or 'delta_c'")

    seed = asphases(bare_chain_equilibrium(params))
    prev = None
    bracket = None
    for v in grid:
        f, st = at(v, seed)
        seed = st.phases
        if kink_only and st.phase_label.value != "Pinned":
            prev = None
            continue
        if prev is not None and np.sign(f) != np.sign(prev[1]) and prev[1] != 0:
            bracket = (prev[0], v, prev[2])
            break
        prev = (v, f, seed.copy())
    if bracket is None:
        return None
    a, b, seed = bracket
    fa, _ = at(a, seed)
    while abs(b - a) / max(abs(a), abs(b)) > rel_width:
        mid = 0.5 * (a + b)
        fm, st = at(mid, seed)
        seed = st.phases
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)
