"""Mean-field equilibria: minimization, continuation, phase classification.

The solver is a damped Newton iteration on the full potential with
Levenberg regularization near indefinite points.  Past the symmetry
breaking the previous solution is a saddle; deterministic kicks along the
most negative Hessian eigenvector recover the broken-symmetry minimum, so
a continuation started from the bare chain tracks the physical branch.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cholesky, eigh, LinAlgError

from .core import (
    IonConfiguration,
    ModelParams,
    asphases,
    cavity_amplitude,
    chain_hessian,
    effective_detuning,
    total_gradient,
    total_hessian,
    total_potential,
)

GRAD_TOL = 1e-10
SADDLE_TOL = 1e-8
ASYMMETRY_THRESHOLD = 1e-3


class ConvergenceError(RuntimeError):
    """Minimization failed within the iteration budget."""


class Phase(str, Enum):
    SLIDING = "Sliding"
    PINNED = "Pinned"


@dataclass(frozen=True)
class KinkDescriptor:
    center_index: int
    asymmetry: float
    spacing_irregularity: float


@dataclass(frozen=True)
class EquilibriumState:
    config: IonConfiguration
    amplitude: complex
    delta_eff: float
    potential: float
    phase_label: Phase
    kink: KinkDescriptor | None
    converged: bool
    residual: float

    @property
    def phases(self) -> np.ndarray:
        return self.config.phases


@dataclass(frozen=True)
class TransitionPoint:
    eta_critical: float
    lowest_mode_freq_at_transition: float


def _newton(params: ModelParams, th0: np.ndarray, embed: np.ndarray | None = None,
            tol: float = GRAD_TOL, maxit: int = 300):
    """Damped Newton on V_tot; returns (theta, converged, iterations).

    embed maps reduced coordinates y to theta = E y, used to confine the
    search to the mirror-antisymmetric subspace during continuation.

    The Armijo test on V is only trustworthy while the gradient is large:
    V is O(1e8) internal units, so near convergence its decrements drown
    in rounding.  Small-gradient steps are guarded by ion ordering and by
    monotone decrease of the gradient norm instead.
    """
    if embed is None:
        y = th0.copy()
        E = None
    else:
        E = embed
        y, *_ = np.linalg.lstsq(E, th0, rcond=None)
    g_switch = 1e-3
    mu_boost = 0.0
    for it in range(maxit):
        th = y if E is None else E @ y
        g = total_gradient(params, th)
        gy = g if E is None else E.T @ g
        gnorm = np.max(np.abs(gy))
        if gnorm < tol:
            return th, True, it
        H = total_hessian(params, th)
        Hy = H if E is None else E.T @ H @ E
        # Levenberg: smallest escalating mu making H + mu I positive
        # definite, so the step stays descent-like at indefinite points
        mu = mu_boost
        mu0 = 1e-10 * max(np.max(np.abs(Hy)), 1.0)
        for _ in range(40):
            try:
                cholesky(Hy + mu * np.eye(len(gy)))
                break
            except LinAlgError:
                mu = mu0 if mu == 0.0 else mu * 10.0
        step = -np.linalg.solve(Hy + mu * np.eye(len(gy)), gy)
        if gnorm > g_switch:
            v0 = total_potential(params, th)
            t = 1.0
            ok = False
            for _ in range(60):
                yn = y + t * step
                thn = yn if E is None else E @ yn
                if np.all(np.diff(thn) > 0) and \
                        total_potential(params, thn) <= v0 + 1e-4 * t * (gy @ step):
                    ok = True
                    break
                t *= 0.5
            if not ok:
                # V is at its rounding floor; switch to gradient guarding
                g_switch = np.inf
                continue
            y = y + t * step
        else:
            t = 1.0
            ok = False
            for _ in range(60):
                yn = y + t * step
                thn = yn if E is None else E @ yn
                gn = total_gradient(params, thn)
                gny = gn if E is None else E.T @ gn
                if np.all(np.diff(thn) > 0) and np.max(np.abs(gny)) < gnorm:
                    ok = True
                    break
                t *= 0.5
            if not ok:
                # stall: add persistent curvature regularization and retry
                if mu_boost > 1e8 * mu0:
                    return th, gnorm < 10 * tol, it
                mu_boost = 1e4 * mu0 if mu_boost == 0.0 else mu_boost * 100.0
                continue
            mu_boost = 0.0
            y = yn
    th = y if E is None else E @ y
    g = total_gradient(params, th)
    g = g if E is None else E.T @ g
    return th, np.max(np.abs(g)) < tol, maxit


def _lowest_eig(params: ModelParams, th: np.ndarray) -> float:
    return eigh(total_hessian(params, th), eigvals_only=True)[0]


def _minimize_with_escape(params: ModelParams, th0: np.ndarray,
                          kicks=(0.05, 0.2, 0.5, 1.0, 2.0), rounds: int = 40):
    """Newton to a stationary point; escape saddles along unstable directions.

    The kick schedule is deterministic: from a saddle, displace by +-c
    along the most negative eigenvector of the full Hessian and re-solve.
    Candidates are ranked by (number of negative directions, V); a true
    minimum is accepted immediately, otherwise strict progress in the
    negative-direction count is required.
    """

    def n_negative(th_):
        return int(np.sum(np.linalg.eigvalsh(total_hessian(params, th_)) < -SADDLE_TOL))

    th, ok, _ = _newton(params, th0)
    if not ok and not np.all(np.diff(th) > 0):
        # nothing orderly to escape from
        return th, False
    # a stalled but ordered landing point is still a valid kick origin;
    # every kicked candidate must fully converge on its own
    for _ in range(rounds):
        lam, vec = np.linalg.eigh(total_hessian(params, th))
        if lam[0] > -SADDLE_TOL:
            return th, True
        v = vec[:, 0]
        cur_neg = int(np.sum(lam < -SADDLE_TOL))
        best = None
        for c in kicks:
            for sgn in (1.0, -1.0):
                cand0 = th + sgn * c * v
                if not np.all(np.diff(cand0) > 0):
                    continue
                sol, ok2, _ = _newton(params, cand0)
                if not ok2 or not np.all(np.diff(sol) > 0):
                    continue
                key = (n_negative(sol), total_potential(params, sol))
                if best is None or key < best[0]:
                    best = (key, sol)
                if key[0] == 0:
                    break
            if best is not None and best[0][0] == 0:
                break
        if best is None or best[0][0] >= cur_neg:
            if best is not None and best[0][0] == 0:
                th = best[1]
                continue
            return th, False
        th = best[1]
    return th, _lowest_eig(params, th) > -SADDLE_TOL


def _make_state(params: ModelParams, th: np.ndarray, converged: bool) -> EquilibriumState:
    residual = float(np.max(np.abs(total_gradient(params, th))))
    cfg = IonConfiguration(th)
    phase, kink = _classify(th)
    return EquilibriumState(
        config=cfg,
        amplitude=cavity_amplitude(params, th),
        delta_eff=effective_detuning(params, th),
        potential=total_potential(params, th),
        phase_label=phase,
        kink=kink,
        converged=converged,
        residual=residual,
    )


def bare_chain_equilibrium(params: ModelParams) -> IonConfiguration:
    """Equilibrium of the trap + Coulomb chain alone (eta treated as 0).

    Seeded with an empirical spacing law, then Newton-refined; the result
    is the unique ordered minimizer, antisymmetric about the trap center.
    """
    p0 = params.with_eta(0.0)
    n = params.n_ions
    if n == 1:
        return IonConfiguration(np.zeros(1))
    # k * ell for the single-ion length scale ell = (q^2/(4 pi eps0 m wt^2))^(1/3)
    kl = (2 * params.coulomb * params.omega_r / params.omega_t**2) ** (1 / 3)
    th0 = (np.arange(n) - (n - 1) / 2) * kl * 2.018 / n**0.559
    th, ok, _ = _newton(p0, th0)
    if not ok:
        raise ConvergenceError(
            f"bare chain failed, residual {np.max(np.abs(total_gradient(p0, th))):.3g}")
    return IonConfiguration(th)


def solve_equilibrium(params: ModelParams, init) -> EquilibriumState:
    """Minimize V_tot from the given ordered initial configuration.

    Saddle landings trigger the deterministic escape schedule before the
    solve is declared failed.
    """
    th0 = asphases(init)
    th, ok = _minimize_with_escape(params, th0)
    if not ok:
        raise ConvergenceError(
            f"no minimum found from the given start at eta={params.eta:g}, "
            f"residual {np.max(np.abs(total_gradient(params, th))):.3g}")
    return _make_state(params, th, True)


def _symmetric_embedding(n: int) -> np.ndarray:
    """Map upper-half coordinates y to a mirror-antisymmetric chain.

    Odd n keeps the central ion fixed at the trap center.
    """
    m = n // 2
    E = np.zeros((n, m))
    for i in range(m):
        E[n - 1 - i, m - 1 - i] = 1.0
        E[i, m - 1 - i] = -1.0
    return E


def find_transition(params: ModelParams, eta_lo: float = 1.0, eta_hi: float = 400.0,
                    n_grid: int = 60, rel_width: float = 1e-4) -> TransitionPoint | None:
    """Locate the pump strength where the symmetric branch destabilizes.

    Walks the mirror-antisymmetric branch up in eta, finds the first sign
    change of the lowest full-Hessian eigenvalue, and bisects it.  Returns
    None when the branch stays stable over the whole range.
    """
    E = _symmetric_embedding(params.n_ions)
    th = asphases(bare_chain_equilibrium(params))
    etas = np.geomspace(eta_lo, eta_hi, n_grid)
    prev_th = th
    bracket = None
    for i, eta in enumerate(etas):
        pe = params.with_eta(eta)
        th, ok, _ = _newton(pe, th, embed=E)
        if not ok:
            raise ConvergenceError(f"symmetric branch lost at eta={eta:g}")
        if _lowest_eig(pe, th) < 0:
            if i == 0:
                return None
            bracket = (etas[i - 1], eta, prev_th)
            break
        prev_th = th.copy()
    if bracket is None:
        return None
    lo, hi, th_lo = bracket
    while (hi - lo) / lo > rel_width:
        mid = 0.5 * (lo + hi)
        pm = params.with_eta(mid)
        th_mid, ok, _ = _newton(pm, th_lo, embed=E)
        if ok and _lowest_eig(pm, th_mid) >= 0:
            lo, th_lo = mid, th_mid
        else:
            hi = mid
    pc = params.with_eta(lo)
    lam0 = eigh(chain_hessian(pc, th_lo), eigvals_only=True)[0]
    w0 = float(np.sqrt(2 * pc.omega_r * abs(lam0)))
    return TransitionPoint(eta_critical=float(0.5 * (lo + hi)),
                           lowest_mode_freq_at_transition=w0)


def continuation_sweep(params: ModelParams, eta_grid):
    """Track the equilibrium branch over an ascending eta grid.

    Each solution seeds the next point.  Returns (states, transition,
    jump_flags): transition from the symmetric-branch bisection (None if
    the grid never crosses it), jump_flags marking points whose potential
    jumps by more than 10x the local trend between neighbors.
    """
    eta_grid = np.asarray(eta_grid, dtype=float)
    if eta_grid.size < 1 or np.any(np.diff(eta_grid) <= 0):
        raise ValueError("eta grid must be ascending")
    th = asphases(bare_chain_equilibrium(params))
    states: list[EquilibriumState] = []
    for eta in eta_grid:
        pe = params.with_eta(float(eta))
        th, ok = _minimize_with_escape(pe, th)
        if not ok:
            raise ConvergenceError(f"branch point failed at eta={eta:g}")
        states.append(_make_state(pe, th, True))
    jump_flags = [False] * len(states)
    v = np.array([s.potential for s in states])
    if len(states) >= 3:
        dv = np.abs(np.diff(v))
        for i in range(1, len(dv)):
            trend = np.median(dv[max(0, i - 3):i]) + 1e-30
            if dv[i] > 10 * trend and dv[i] > 1e-6 * abs(v[i]):
                jump_flags[i + 1] = True
    transition = find_transition(params, eta_lo=float(eta_grid[0]),
                                 eta_hi=float(eta_grid[-1]), n_grid=60)
    return states, transition, jump_flags


def _classify(th: np.ndarray):
    n = th.size
    asym = float(np.max(np.abs(th + th[::-1]) / 2)) if n > 1 else abs(float(th[0]))
    if asym <= ASYMMETRY_THRESHOLD:
        return Phase.SLIDING, None
    if n < 3:
        return Phase.PINNED, KinkDescriptor(center_index=n // 2, asymmetry=asym,
                                            spacing_irregularity=0.0)
    s = np.diff(th)
    # defect center: interior ion whose two adjacent bonds are jointly tightest
    pair = s[:-1] + s[1:]
    center = int(np.argmin(pair)) + 1
    mid = (n - 1) // 2
    ref = 0.5 * (s[mid - 1] + s[mid]) if n % 2 == 1 else s[n // 2 - 1]
    irregularity = float(np.max(np.abs(s / ref - 1.0)))
    kink = KinkDescriptor(center_index=center, asymmetry=asym,
                          spacing_irregularity=irregularity)
    return Phase.PINNED, kink


def classify_phase(state: EquilibriumState):
    """Sliding vs pinned by broken mirror symmetry; kink data when pinned."""
    if not state.converged:
        warnings.warn("classifying an unconverged state")
    return state.phase_label, state.kink
