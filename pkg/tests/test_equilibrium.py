"""Equilibrium solving, branch continuation, and phase classification."""

import math

import numpy as np
import pytest

from cavitychain import (ConvergenceError, Phase, bare_chain_equilibrium,
                         classify_phase, continuation_sweep, find_transition,
                         nondimensionalize, solve_equilibrium, total_gradient)
from cavitychain.core import asphases
from tests.test_core import reference_config


@pytest.fixture(scope="module")
def base():
    return nondimensionalize(reference_config())


def test_bare_chain_is_ordered_and_mirror_symmetric(base):
    th = asphases(bare_chain_equilibrium(base))
    assert th.size == 11
    assert np.all(np.diff(th) > 0)
    assert np.max(np.abs(th + th[::-1])) < 1e-8
    g = total_gradient(base.with_eta(0.0), th)
    assert np.max(np.abs(g)) < 1e-8 * base.trap_coeff * np.max(np.abs(th))


def test_bare_chain_central_spacing_value(base):
    th = asphases(bare_chain_equilibrium(base))
    s = np.diff(th)
    assert s[5] == pytest.approx(115.6738806, rel=1e-6)
    # spacings shrink toward the middle of the chain
    assert s[0] > s[2] > s[4]


def test_two_and_three_ion_closed_forms(base):
    from dataclasses import replace
    for n in (2, 3):
        p = replace(base, n_ions=n)
        th = asphases(bare_chain_equilibrium(p))
        A, C = p.trap_coeff, p.coulomb
        if n == 2:
            d = (C / A) ** (1 / 3)
            ref = np.array([-d / 2, d / 2])
        else:
            d = (5 * C / (8 * A)) ** (1 / 3)
            ref = np.array([-d, 0.0, d])
        assert np.max(np.abs(th - ref)) < 1e-10 * np.max(np.abs(ref))


def test_solver_reaches_gradient_tolerance(base):
    p = base.with_eta(120.0)
    st = solve_equilibrium(p, bare_chain_equilibrium(p))
    assert st.converged
    assert st.residual < 1e-8
    g = total_gradient(p, st.phases)
    assert np.max(np.abs(g)) < 1e-8


def test_low_pump_stays_sliding(base):
    p = base.with_eta(1.5)
    st = solve_equilibrium(p, bare_chain_equilibrium(p))
    phase, kink = classify_phase(st)
    assert phase is Phase.SLIDING
    assert kink is None
    assert np.max(np.abs(st.phases + st.phases[::-1])) < 2e-3


def test_strong_pump_pins_with_central_defect(base):
    states, _, _ = continuation_sweep(base, np.geomspace(1.0, 300.0, 40))
    st = states[-1]
    phase, kink = classify_phase(st)
    assert phase is Phase.PINNED
    assert kink is not None
    assert kink.asymmetry > 1e-3
    # ions sit near field nodes: all cos^2 small
    assert np.max(np.cos(st.phases) ** 2) < 0.1


def test_transition_location_and_soft_mode(base):
    tr = find_transition(base)
    assert tr is not None
    assert tr.eta_critical == pytest.approx(61.52, rel=1e-3)
    assert tr.lowest_mode_freq_at_transition < 0.05 * base.omega_t


def test_transition_none_when_range_too_low(base):
    assert find_transition(base, eta_lo=1.0, eta_hi=20.0, n_grid=20) is None


def test_continuation_flags_no_jumps_on_smooth_branch(base):
    states, tr, flags = continuation_sweep(base, np.geomspace(1.0, 300.0, 60))
    assert not any(flags)
    assert tr is not None
    assert all(s.converged for s in states)
    v = np.array([s.potential for s in states])
    assert np.all(np.isfinite(v))


def test_amplitude_consistency(base):
    p = base.with_eta(80.0)
    st = solve_equilibrium(p, bare_chain_equilibrium(p))
    assert st.delta_eff == pytest.approx(
        p.delta_c - p.u0 * np.sum(np.cos(st.phases) ** 2), rel=1e-12)
    assert abs(st.amplitude) ** 2 == pytest.approx(
        p.eta**2 / (1 + st.delta_eff**2), rel=1e-12)


def test_kink_descriptor_centers_on_tight_bonds():
    p4 = nondimensionalize(reference_config(trap_freq=2 * math.pi * 700e3,
                                            cavity_detuning=-1.8 * 2 * math.pi * 0.2e6,
                                            pump_strength=200 * 2 * math.pi * 0.2e6))
    states, _, _ = continuation_sweep(p4, np.geomspace(1.0, 200.0, 50))
    st = states[-1]
    phase, kink = classify_phase(st)
    assert phase is Phase.PINNED
    assert kink.center_index == 5
    s = np.diff(st.phases)
    assert kink.spacing_irregularity == pytest.approx(
        np.max(np.abs(s / (0.5 * (s[4] + s[5])) - 1)), rel=1e-12)


def test_unconverged_classification_warns(base):
    from dataclasses import replace
    st = solve_equilibrium(base.with_eta(50.0),
                           bare_chain_equilibrium(base))
    bad = replace(st, converged=False)
    with pytest.warns(UserWarning):
        classify_phase(bad)
