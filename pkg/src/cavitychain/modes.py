"""Vibrational mode decomposition and photon-phonon coupling coefficients.

Mode frequencies come from the chain Hessian with the cavity field frozen
at its mean-field value; the field's dynamical back-action is handled in
the fluctuation dynamics, not here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .core import ModelParams, asphases, cavity_amplitude, chain_hessian

LAMB_DICKE_WARN = 0.3
DEGENERACY_REL_GAP = 1e-8


class UnstableEquilibriumError(RuntimeError):
    """The Hessian has a negative eigenvalue: the input is a saddle."""


@dataclass(frozen=True)
class ModeDecomposition:
    """freqs ascending in units of kappa; mode_matrix columns orthonormal.

    widths are the ground-state wavepacket sizes in phase units,
    k sigma_alpha = sqrt(omega_r / omega_alpha).
    """

    freqs: np.ndarray
    mode_matrix: np.ndarray
    widths: np.ndarray
    couplings: np.ndarray


def hessian(params: ModelParams, state) -> np.ndarray:
    """Chain Hessian at the equilibrium, cavity curvature at frozen field."""
    th = _phases_of(state)
    return chain_hessian(params, th)


def _phases_of(state) -> np.ndarray:
    if hasattr(state, "phases"):
        return np.asarray(state.phases, dtype=float)
    return asphases(state)


def _fix_signs(M: np.ndarray) -> np.ndarray:
    """Largest-magnitude component of each column made positive."""
    out = M.copy()
    for a in range(M.shape[1]):
        i = int(np.argmax(np.abs(out[:, a])))
        if out[i, a] < 0:
            out[:, a] = -out[:, a]
    return out


def _split_degenerate_by_parity(lam: np.ndarray, M: np.ndarray,
                                symmetric: bool) -> np.ndarray:
    """Re-orthogonalize degenerate clusters deterministically.

    For a mirror-symmetric equilibrium the Hessian commutes with the
    reversal permutation, so each degenerate cluster splits into parity
    eigenspaces; projecting onto them gives eigenvectors stable under
    parameter dithering.  Without the symmetry the cluster is left as the
    solver returned it (then sign-fixed).
    """
    if not symmetric:
        return M
    n = M.shape[0]
    scale = max(np.max(np.abs(lam)), 1.0)
    i = 0
    out = M.copy()
    while i < n:
        j = i + 1
        while j < n and abs(lam[j] - lam[j - 1]) < DEGENERACY_REL_GAP * scale:
            j += 1
        if j - i > 1:
            block = out[:, i:j]
            rev = block[::-1, :]
            cols = []
            for sign in (1.0, -1.0):
                proj = 0.5 * (block + sign * rev)
                q, r = np.linalg.qr(proj)
                keep = np.abs(np.diag(r)) > 1e-10
                cols.append(q[:, keep])
            merged = np.hstack(cols)
            if merged.shape[1] == j - i:
                out[:, i:j] = merged
        i = j
    return out


def normal_modes(H: np.ndarray, params: ModelParams,
                 symmetric: bool = False):
    """Diagonalize the Hessian: ascending frequencies and orthonormal modes.

    Frequencies follow omega_alpha = sqrt(2 omega_r lambda_alpha) with
    lambda the Hessian eigenvalues in phase units.  A negative eigenvalue
    raises UnstableEquilibriumError.
    """
    lam, M = eigh(H)
    if lam[0] < -1e-12 * max(np.max(np.abs(lam)), 1.0):
        raise UnstableEquilibriumError(
            f"negative Hessian eigenvalue {lam[0]:.3g}: saddle point input")
    M = _split_degenerate_by_parity(lam, M, symmetric)
    M = _fix_signs(M)
    freqs = np.sqrt(2 * params.omega_r * np.clip(lam, 0.0, None))
    return freqs, M


def coupling_coefficients(params: ModelParams, state, freqs: np.ndarray,
                          mode_matrix: np.ndarray) -> np.ndarray:
    """chi_alpha = sqrt(omega_r/omega_alpha) abar u0 sum_j sin(2 theta_j) M_j_alpha.

    Complex through abar; chi_alpha / abar is real by construction.
    """
    th = _phases_of(state)
    abar = cavity_amplitude(params, th)
    s = np.sin(2 * th)
    with np.errstate(divide="ignore"):
        widths = np.sqrt(params.omega_r / freqs)
    return widths * abar * params.u0 * (s @ mode_matrix)


def mode_decomposition(params: ModelParams, state) -> ModeDecomposition:
    """Full decomposition at an equilibrium: frequencies, modes, couplings."""
    th = _phases_of(state)
    symmetric = bool(np.max(np.abs(th + th[::-1]) / 2) < 1e-8)
    freqs, M = normal_modes(chain_hessian(params, th), params, symmetric=symmetric)
    if freqs[0] <= 0:
        raise UnstableEquilibriumError("zero-frequency mode: marginal equilibrium")
    widths = np.sqrt(params.omega_r / freqs)
    if np.any(widths > LAMB_DICKE_WARN):
        warnings.warn(
            f"Lamb-Dicke parameter up to {np.max(widths):.3g} exceeds "
            f"{LAMB_DICKE_WARN}; the linearized treatment is strained",
            stacklevel=2)
    chi = coupling_coefficients(params, th, freqs, M)
    return ModeDecomposition(freqs=freqs, mode_matrix=M, widths=widths, couplings=chi)
