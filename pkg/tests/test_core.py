"""Unit system, parameter containers, and potential derivatives."""

import math

import numpy as np
import pytest

from cavitychain import (DomainError, IonConfiguration, PhysicalConfig,
                         cavity_amplitude, effective_detuning,
                         nondimensionalize, redimensionalize, total_gradient,
                         total_hessian, total_potential)
from cavitychain.core import chain_hessian

KAPPA = 2 * math.pi * 0.2e6
TWO_PI = 2 * math.pi


def reference_config(**kw):
    base = dict(ion_mass=174.0, ion_charge=1, wavelength=369e-9, kappa=KAPPA,
                trap_freq=TWO_PI * 100e3, pump_strength=250 * KAPPA,
                cavity_detuning=-8.5 * KAPPA, atom_detuning=TWO_PI * 12e9,
                vacuum_rabi=math.sqrt(0.5 * KAPPA * TWO_PI * 12e9), n_ions=11)
    base.update(kw)
    return PhysicalConfig(**base)


def test_reference_model_parameters():
    p = nondimensionalize(reference_config())
    assert p.u0 == pytest.approx(0.5, rel=1e-12)
    assert p.eta == pytest.approx(250.0, rel=1e-12)
    assert p.delta_c == pytest.approx(-8.5, rel=1e-12)
    assert p.omega_t == pytest.approx(0.5, rel=1e-12)
    assert p.omega_r == pytest.approx(0.042106094423551316, rel=1e-9)
    assert p.coulomb == pytest.approx(29643513.057404827, rel=1e-9)
    assert p.trap_coeff == pytest.approx(1.4843456952170255, rel=1e-9)


def test_coupling_rate_from_dispersive_shift():
    cfg = reference_config()
    # U0 = g^2/delta_d = 0.5 kappa at delta_d = 2pi x 12 GHz
    assert cfg.vacuum_rabi == pytest.approx(TWO_PI * 34.64101615e6, rel=1e-6)
    assert cfg.dispersive_shift == pytest.approx(0.5 * KAPPA, rel=1e-12)


def test_round_trip_nondimensionalization():
    cfg = reference_config()
    p = nondimensionalize(cfg)
    back = redimensionalize(p, kappa=cfg.kappa, wavelength=cfg.wavelength,
                            ion_charge=cfg.ion_charge,
                            atom_detuning=cfg.atom_detuning)
    for name in ("ion_mass", "wavelength", "kappa", "trap_freq",
                 "pump_strength", "cavity_detuning", "atom_detuning",
                 "vacuum_rabi"):
        a, b = getattr(cfg, name), getattr(back, name)
        assert b == pytest.approx(a, rel=1e-12), name
    assert back.n_ions == cfg.n_ions
    assert back.ion_charge == cfg.ion_charge


def test_validation_rejects_bad_inputs():
    with pytest.raises(DomainError):
        reference_config(atom_detuning=0.0)
    with pytest.raises(DomainError):
        reference_config(ion_charge=0)
    with pytest.raises(DomainError):
        reference_config(ion_mass=-1.0)
    with pytest.raises(DomainError):
        IonConfiguration(phases=np.array([0.0, 0.0, 1.0]))
    with pytest.raises(DomainError):
        IonConfiguration(phases=np.array([1.0, 0.5]))


def test_cavity_amplitude_and_detuning():
    p = nondimensionalize(reference_config())
    th = np.array([-0.7, -0.1, 0.4])
    d = effective_detuning(p, th)
    assert d == pytest.approx(p.delta_c - p.u0 * np.sum(np.cos(th) ** 2))
    a = cavity_amplitude(p, th)
    assert a == pytest.approx(p.eta / (1 - 1j * d))


def test_potential_raises_on_coincident_ions():
    p = nondimensionalize(reference_config(n_ions=2))
    with pytest.raises(DomainError):
        total_potential(p, np.array([0.3, 0.3]))


def _random_params(rng):
    cfg = reference_config(
        trap_freq=TWO_PI * rng.uniform(0.5e5, 8e5),
        cavity_detuning=-rng.uniform(0.5, 12.0) * KAPPA,
        pump_strength=rng.uniform(1.0, 300.0) * KAPPA,
        n_ions=int(rng.integers(2, 7)))
    p = nondimensionalize(cfg)
    # random dispersive shift in [0.05, 1] kappa
    from dataclasses import replace
    return replace(p, u0=rng.uniform(0.05, 1.0))


def _random_ordered_phases(rng, n, spread):
    th = np.sort(rng.uniform(-spread, spread, n))
    while np.min(np.diff(th)) < 1e-3 * spread:
        th = np.sort(rng.uniform(-spread, spread, n))
    return th


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(30):
        p = _random_params(rng)
        th = _random_ordered_phases(rng, p.n_ions, 50.0)
        g = total_gradient(p, th)
        h = 1e-6
        fd = np.empty_like(g)
        for j in range(p.n_ions):
            e = np.zeros_like(th)
            e[j] = h
            fd[j] = (total_potential(p, th + e) - total_potential(p, th - e)) / (2 * h)
        worst = max(worst, np.max(np.abs(fd - g)) / np.max(np.abs(g)))
    assert worst < 1e-6


def test_hessian_matches_differentiated_gradient():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(15):
        p = _random_params(rng)
        th = _random_ordered_phases(rng, p.n_ions, 50.0)
        H = total_hessian(p, th)
        assert np.allclose(H, H.T, atol=1e-12 * np.max(np.abs(H)))
        h = 1e-5
        fd = np.empty_like(H)
        for j in range(p.n_ions):
            e = np.zeros_like(th)
            e[j] = h
            fd[:, j] = (total_gradient(p, th + e) - total_gradient(p, th - e)) / (2 * h)
        worst = max(worst, np.max(np.abs(fd - H)) / np.max(np.abs(H)))
    assert worst < 1e-5


def test_full_hessian_adds_backaction_to_frozen_chain_hessian():
    # the two Hessians differ by a rank-one outer product in sin(2 theta)
    p = nondimensionalize(reference_config(n_ions=4))
    rng = np.random.default_rng(3)
    th = _random_ordered_phases(rng, 4, 30.0)
    diff = total_hessian(p, th) - chain_hessian(p, th)
    w, v = np.linalg.eigh(diff)
    assert np.sum(np.abs(w) > 1e-10 * np.max(np.abs(w))) == 1
    s = np.sin(2 * th)
    lead = v[:, np.argmax(np.abs(w))]
    overlap = abs(np.dot(lead, s / np.linalg.norm(s)))
    assert overlap == pytest.approx(1.0, abs=1e-10)
