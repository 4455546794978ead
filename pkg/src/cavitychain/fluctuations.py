"""Linearized quantum fluctuation dynamics around a mean-field equilibrium.

State ordering is (Q_a, P_a, Q_1, P_1, ..., Q_N, P_N) with the cavity
first.  Quadratures are normalized so the vacuum has <2Q^2> = <2P^2> = 1;
the decoupled cavity then relaxes to exactly that, which pins the
diffusion normalization.

Two independent steady-state routes are kept deliberately separate: the
eigenbasis sum over drift eigenpairs, and a dense Lyapunov solve.  Their
agreement is a standing cross-check, not an implementation detail.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig, solve_continuous_lyapunov

from .core import ModelParams
from .modes import ModeDecomposition

log = logging.getLogger(__name__)

COUPLING_THRESHOLD = 1e-8
STABILITY_TOL = 1e-12
CONDITIONING_TOL = 1e-10
PHYSICALITY_TOL = 1e-8


class InstabilityError(RuntimeError):
    """The drift matrix has an eigenvalue with nonnegative real part."""


class ConditioningError(RuntimeError):
    """Eigenbasis denominators too close to zero for a reliable sum."""


class PhysicalityError(ValueError):
    """Covariance violates the uncertainty bound beyond tolerance."""


@dataclass(frozen=True)
class DriftSystem:
    """Drift matrix, diffusion, and noise channels of the linear dynamics.

    gammas / nbars are the per-mode phonon damping rates and bath
    occupations (default zero: cavity loss is the only decay channel).
    abar is carried along for output-spectrum normalization.
    """

    matrix: np.ndarray
    diffusion: np.ndarray
    gammas: np.ndarray
    nbars: np.ndarray
    abar: complex
    couplings: np.ndarray
    delta_eff: float
    mode_freqs: np.ndarray

    @property
    def n_modes(self) -> int:
        return (self.matrix.shape[0] - 2) // 2


@dataclass(frozen=True)
class GeneralizedModes:
    """Eigenstructure of the drift matrix, conjugate pairs counted once.

    rates[p] = -(Re lambda_i + Re lambda_j) over pair p, freqs[p] the
    mean |Im lambda|; character[p] holds the eigenvector weight on the
    cavity (column 0) and each phonon (columns 1..N).
    """

    eigenvalues: np.ndarray
    pairs: tuple
    rates: np.ndarray
    freqs: np.ndarray
    eigenvector_matrix: np.ndarray
    character: np.ndarray

    def rate_sum(self) -> float:
        return float(np.sum(self.rates))


@dataclass(frozen=True)
class SteadyState:
    covariance: np.ndarray
    occupations: np.ndarray
    photon_fluctuation_number: float
    log_negativity: dict
    spectrum: np.ndarray | None = None
    spectrum_grid: np.ndarray | None = None
    route: str = "eigenbasis"
    coupled_modes: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))


def build_drift_system(params: ModelParams, state, modes: ModeDecomposition,
                       gammas=None, nbars=None) -> DriftSystem:
    """Assemble the drift matrix and diffusion from a mode decomposition.

    Coupling blocks follow from the quadrature equations of motion for
    complex chi = chi' + i chi'': the position quadrature of each mode
    drives both cavity quadratures, and both cavity quadratures drive the
    mode momentum.  For real chi this reduces to a single pair of entries
    (Q_alpha into dP_a, Q_a into dP_alpha), each -2 chi.
    """
    n = modes.freqs.size
    g = np.zeros(n) if gammas is None else np.asarray(gammas, dtype=float)
    nb = np.zeros(n) if nbars is None else np.asarray(nbars, dtype=float)
    if g.shape != (n,) or nb.shape != (n,):
        raise ValueError("gammas and nbars must have one entry per mode")
    dim = 2 * (n + 1)
    d = params.delta_c - params.u0 * float(np.sum(np.cos(_phases(state)) ** 2))
    M = np.zeros((dim, dim))
    M[0, 0] = M[1, 1] = -1.0
    M[0, 1] = d
    M[1, 0] = -d
    chi = modes.couplings
    for a in range(n):
        i = 2 + 2 * a
        M[i, i] = M[i + 1, i + 1] = -g[a]
        M[i, i + 1] = -modes.freqs[a]
        M[i + 1, i] = modes.freqs[a]
        cr, ci = chi[a].real, chi[a].imag
        M[0, i] = -2 * ci
        M[1, i] = -2 * cr
        M[i + 1, 0] = -2 * cr
        M[i + 1, 1] = 2 * ci
    D = np.zeros(dim)
    D[0] = D[1] = 1.0
    for a in range(n):
        D[2 + 2 * a] = D[3 + 2 * a] = g[a] * (2 * nb[a] + 1)
    abar = _amplitude(params, state)
    return DriftSystem(matrix=M, diffusion=np.diag(D), gammas=g, nbars=nb,
                       abar=abar, couplings=chi, delta_eff=d,
                       mode_freqs=modes.freqs.copy())


def _phases(state) -> np.ndarray:
    if hasattr(state, "phases"):
        return np.asarray(state.phases, dtype=float)
    return np.asarray(state, dtype=float)


def _amplitude(params: ModelParams, state) -> complex:
    if hasattr(state, "amplitude"):
        return complex(state.amplitude)
    d = params.delta_c - params.u0 * float(np.sum(np.cos(_phases(state)) ** 2))
    return params.eta / (1.0 - 1j * d)


def restrict_to_coupled(system: DriftSystem,
                        threshold: float = COUPLING_THRESHOLD):
    """Drop modes that neither couple to the cavity nor carry their own bath.

    A decoupled lossless mode contributes a marginal (purely rotating)
    block that stays exactly in vacuum; removing it keeps the reduced
    drift Hurwitz so the steady-state solvers are well posed.  Returns
    (subsystem, kept_mode_indices).
    """
    keep_modes = np.where((np.abs(system.couplings) > threshold)
                          | (system.gammas > 0))[0]
    rows = [0, 1] + sorted(2 + 2 * a + q for a in keep_modes for q in (0, 1))
    sel = np.ix_(rows, rows)
    sub = DriftSystem(matrix=system.matrix[sel], diffusion=system.diffusion[sel],
                      gammas=system.gammas[keep_modes], nbars=system.nbars[keep_modes],
                      abar=system.abar, couplings=system.couplings[keep_modes],
                      delta_eff=system.delta_eff,
                      mode_freqs=system.mode_freqs[keep_modes])
    return sub, keep_modes


def eigen_rates(system: DriftSystem, check_stability: bool = True) -> GeneralizedModes:
    """Eigen-decomposition of the drift matrix with conjugate-pair pairing."""
    lam, B = eig(system.matrix)
    if check_stability and np.max(lam.real) >= STABILITY_TOL:
        raise InstabilityError(
            f"drift eigenvalue with Re = {np.max(lam.real):.3g} >= 0: no steady state")
    pairs = _conjugate_pairs(lam)
    n_pairs = len(pairs)
    rates = np.empty(n_pairs)
    freqs = np.empty(n_pairs)
    nm = system.n_modes
    character = np.zeros((n_pairs, nm + 1))
    for p, (i, j) in enumerate(pairs):
        rates[p] = -(lam[i].real + lam[j].real)
        freqs[p] = 0.5 * (abs(lam[i].imag) + abs(lam[j].imag))
        w = np.abs(B[:, i]) ** 2 + np.abs(B[:, j]) ** 2
        w = w / np.sum(w)
        character[p, 0] = w[0] + w[1]
        for a in range(nm):
            character[p, 1 + a] = w[2 + 2 * a] + w[3 + 2 * a]
    order = np.argsort(freqs)
    pairs = tuple(pairs[k] for k in order)
    return GeneralizedModes(eigenvalues=lam, pairs=pairs, rates=rates[order],
                            freqs=freqs[order], eigenvector_matrix=B,
                            character=character[order])


def _conjugate_pairs(lam: np.ndarray):
    """Pair each eigenvalue with its complex conjugate partner."""
    n = lam.size
    scale = max(np.max(np.abs(lam)), 1.0)
    used = np.zeros(n, dtype=bool)
    pairs = []
    order = np.argsort(-np.abs(lam.imag))
    for i in order:
        if used[i]:
            continue
        used[i] = True
        if abs(lam[i].imag) <= 1e-12 * scale:
            # real eigenvalue: pair with the closest unused real one
            cands = [j for j in range(n)
                     if not used[j] and abs(lam[j].imag) <= 1e-12 * scale]
            if not cands:
                pairs.append((i, i))
                continue
            j = min(cands, key=lambda j_: abs(lam[j_].real - lam[i].real))
        else:
            target = np.conj(lam[i])
            cands = [j for j in range(n) if not used[j]]
            j = min(cands, key=lambda j_: abs(lam[j_] - target))
        used[j] = True
        pairs.append((i, j))
    return pairs


def steady_covariance_lyapunov(system: DriftSystem) -> np.ndarray:
    """Steady covariance from M Sigma + Sigma M^T + 2 D = 0."""
    lam = np.linalg.eigvals(system.matrix)
    if np.max(lam.real) >= STABILITY_TOL:
        raise InstabilityError("unstable drift matrix: Lyapunov solution unbounded")
    return solve_continuous_lyapunov(system.matrix, -2 * system.diffusion)


def steady_covariance_eigenbasis(system: DriftSystem,
                                 gen: GeneralizedModes | None = None) -> np.ndarray:
    """Steady covariance from the drift eigenbasis sum.

    Sigma = Re(B Y B^T) with Y = -2 (B^-1 D B^-T) / (lambda_g + lambda_e).
    Raises ConditioningError when a denominator magnitude drops below
    1e-10, which only happens near marginal stability.
    """
    if gen is not None:
        lam, B = gen.eigenvalues, gen.eigenvector_matrix
    else:
        lam, B = eig(system.matrix)
    if np.max(lam.real) >= STABILITY_TOL:
        raise InstabilityError("unstable drift matrix")
    den = lam[:, None] + lam[None, :]
    if np.min(np.abs(den)) < CONDITIONING_TOL:
        raise ConditioningError(
            f"eigenvalue-sum denominator {np.min(np.abs(den)):.3g} below "
            f"{CONDITIONING_TOL:g}")
    D = system.diffusion.astype(complex)
    W = np.linalg.solve(B, np.linalg.solve(B, D.T).T)
    Y = -2 * W / den
    return (B @ Y @ B.T).real


def mode_occupations(Sigma: np.ndarray):
    """Per-mode occupations and the photon fluctuation number from Sigma."""
    n = (Sigma.shape[0] - 2) // 2
    occ = np.array([(Sigma[2 + 2 * a, 2 + 2 * a]
                     + Sigma[3 + 2 * a, 3 + 2 * a] - 2) / 4 for a in range(n)])
    nph = (Sigma[0, 0] + Sigma[1, 1] - 2) / 4
    vals = np.append(occ, nph)
    if np.any(vals < -PHYSICALITY_TOL):
        raise PhysicalityError(f"occupation {np.min(vals):.3g} below -{PHYSICALITY_TOL:g}")
    return np.clip(occ, 0.0, None), float(max(nph, 0.0))


def _symplectic_form(n_modes: int) -> np.ndarray:
    Om = np.zeros((2 * n_modes, 2 * n_modes))
    for m in range(n_modes):
        Om[2 * m, 2 * m + 1] = 1.0
        Om[2 * m + 1, 2 * m] = -1.0
    return Om


def physicality_margin(Sigma: np.ndarray) -> float:
    """Smallest eigenvalue of Sigma + i Omega; >= 0 for a physical state."""
    Om = _symplectic_form(Sigma.shape[0] // 2)
    return float(np.min(np.linalg.eigvalsh(Sigma + 1j * Om)))


def log_negativity(Sigma: np.ndarray, partition="cavity-vs-all") -> float:
    """Logarithmic negativity of the cavity against part of the motion.

    partition: "cavity-vs-all" (or "cavity") takes the full state split
    cavity | all modes; an integer alpha restricts to the two-body state
    of the cavity and mode alpha first.  Partial transpose is the
    momentum-sign flip on the motional party; E_N = max(0, -ln 2 nu_min)
    with symplectic spectrum taken of the half-normalized covariance
    (vacuum then sits at nu = 1/2).
    """
    if physicality_margin(Sigma) < -PHYSICALITY_TOL:
        raise PhysicalityError("unphysical covariance")
    if partition in ("cavity", "cavity-vs-all"):
        rows = list(range(Sigma.shape[0]))
    elif isinstance(partition, (int, np.integer)):
        a = int(partition)
        rows = [0, 1, 2 + 2 * a, 3 + 2 * a]
    else:
        raise ValueError(f"unknown partition {partition!r}")
    sigma = Sigma[np.ix_(rows, rows)] / 2
    flip = np.ones(len(rows))
    flip[3::2] = -1.0
    sigma_t = sigma * np.outer(flip, flip)
    Om = _symplectic_form(len(rows) // 2)
    nu_min = float(np.min(np.abs(np.linalg.eigvals(1j * Om @ sigma_t))))
    return max(0.0, -np.log(2 * nu_min))


def noise_spectral_matrix(system: DriftSystem) -> np.ndarray:
    """Hermitian input-noise spectral matrix over all quadratures."""
    dim = system.matrix.shape[0]
    N = np.zeros((dim, dim), dtype=complex)
    N[0, 0] = N[1, 1] = 1.0
    N[0, 1] = -1j
    N[1, 0] = 1j
    for a in range(system.n_modes):
        i = 2 + 2 * a
        g, nb = system.gammas[a], system.nbars[a]
        N[i, i] = N[i + 1, i + 1] = g * (2 * nb + 1)
        N[i, i + 1] = -1j * g
        N[i + 1, i] = 1j * g
    return N


def output_spectrum(system: DriftSystem, nu_grid) -> np.ndarray:
    """Normally ordered cavity output spectrum S(nu), nu relative to the pump.

    Transfer-function evaluation of <delta a^dag delta a>(nu) against the
    input noise, normalized by |abar|^2.  Positive nu is the anti-Stokes
    side.  The coherent Rayleigh line at nu = 0 is not part of the
    fluctuation spectrum and is simply absent here.  Vanishes identically
    for a decoupled system driven by vacuum only.
    """
    lam = np.linalg.eigvals(system.matrix)
    if np.max(lam.real) >= STABILITY_TOL:
        raise InstabilityError("unstable drift matrix: spectrum undefined")
    nu_grid = np.asarray(nu_grid, dtype=float)
    dim = system.matrix.shape[0]
    N = noise_spectral_matrix(system)
    c = np.zeros(dim, dtype=complex)
    c[0] = 1.0
    c[1] = -1j
    norm = abs(system.abar) ** 2
    if norm == 0.0:
        return np.zeros(nu_grid.size)
    out = np.empty(nu_grid.size)
    MT = system.matrix.T
    I = np.eye(dim)
    for i, nu in enumerate(nu_grid):
        w = np.linalg.solve(-1j * nu * I - MT, c)
        out[i] = 0.5 * np.real(np.conj(w) @ N @ w) / norm
    return out


def spectral_matrix(system: DriftSystem, nu: float) -> np.ndarray:
    """Full quadrature spectral density matrix 2 Re[T(nu) N T(nu)^dag]."""
    dim = system.matrix.shape[0]
    T = np.linalg.inv(-1j * nu * np.eye(dim) - system.matrix)
    return 2 * np.real(T @ noise_spectral_matrix(system) @ T.conj().T)


def steady_state(params: ModelParams, state, modes: ModeDecomposition,
                 gammas=None, nbars=None, nu_grid=None,
                 coupling_threshold: float = COUPLING_THRESHOLD) -> SteadyState:
    """End-to-end steady state at one sweep point.

    The solve is restricted to the cavity plus the coupled modes;
    excluded (decoupled, lossless) modes stay in vacuum and are re-inserted
    as identity blocks.  The eigenbasis route is primary; if it reports a
    conditioning failure the Lyapunov route substitutes and both facts are
    logged.
    """
    full = build_drift_system(params, state, modes, gammas=gammas, nbars=nbars)
    sub, kept = restrict_to_coupled(full, threshold=coupling_threshold)
    gen = eigen_rates(sub)
    route = "eigenbasis"
    try:
        Sigma_sub = steady_covariance_eigenbasis(sub, gen)
    except ConditioningError as err:
        Sigma_sub = steady_covariance_lyapunov(sub)
        route = "lyapunov"
        log.info("eigenbasis route ill-conditioned (%s); Lyapunov route used", err)
    n = modes.freqs.size
    dim = 2 * (n + 1)
    Sigma = np.eye(dim)
    rows = np.array([0, 1] + sorted(2 + 2 * a + q for a in kept for q in (0, 1)))
    Sigma[np.ix_(rows, rows)] = Sigma_sub
    occ, nph = mode_occupations(Sigma)
    en = {"cavity-vs-all": log_negativity(Sigma, "cavity-vs-all")}
    for a in range(n):
        en[f"cavity-vs-mode-{a}"] = log_negativity(Sigma, a)
    spec = None
    if nu_grid is not None:
        spec = output_spectrum(sub, nu_grid)
        nu_grid = np.asarray(nu_grid, dtype=float)
    return SteadyState(covariance=Sigma, occupations=occ,
                       photon_fluctuation_number=nph, log_negativity=en,
                       spectrum=spec, spectrum_grid=nu_grid, route=route,
                       coupled_modes=kept)
