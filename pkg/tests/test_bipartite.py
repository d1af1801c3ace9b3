"""Conditional wave functions, measurement collapse, product rule, splitting."""
import numpy as np
import pytest

from madflow import Grid, MassMatrix, WaveField, free, harmonic
from madflow import bipartite, states
from madflow.bipartite import (BipartiteScenario, MeasurementCoupling,
                               conditional_wave, conditional_reduction_residuals,
                               product_rule_check, run_measurement,
                               splitting_check)
from madflow.dynamics import EvolutionConfig, evolve
from madflow.errors import ContractError, OutOfDomainError

M1 = MassMatrix.isotropic(1.0, 1)
M2 = MassMatrix.isotropic(1.0, 2)


def product_run(t_final=0.2):
    g1 = Grid((-8.0,), (8.0,), (128,), "periodic")
    g2 = Grid((-8.0, -8.0), (8.0, 8.0), (128, 128), "periodic")
    k = 2 * np.pi * 2 / 16.0                   # commensurate drift on the system axis
    psi1 = states.gaussian(g1, 1.0, 1.0, k)
    psi2 = states.gaussian(g1, -0.5, 1.2, 0.0)
    psi0 = states.product_state(g2, psi1, psi2)
    cfg = EvolutionConfig(dt=2e-3, t_final=t_final, mass=M2,
                          engine="schrodinger", integrator="split-step",
                          snapshot_stride=25)
    return g2, evolve(psi0, free(), cfg), psi1


def test_conditional_wave_product_state():
    g2, run, psi1 = product_run()
    for qe in (-1.0, 0.0, 1.3):
        cw = conditional_wave(run, lambda t, qe=qe: qe, times=[0.0])[0]
        # proportional to the system factor for every environment position
        ratio = cw.normalized / (psi1.values / np.sqrt(np.sum(np.abs(psi1.values) ** 2) * g2.h[0]))
        core = np.abs(psi1.values) > 1e-6 * np.abs(psi1.values).max()
        spread = np.abs(ratio[core] - ratio[core][0])
        assert np.max(spread) < 1e-10


def test_conditional_wave_disjoint_supports():
    g1 = Grid((-8.0,), (8.0,), (256,), "periodic")
    g2 = Grid((-8.0, -8.0), (8.0, 8.0), (256, 256), "periodic")
    phi1 = states.gaussian(g1, -2.0, 0.7, 0.0).values
    phi2 = states.gaussian(g1, 2.0, 0.7, 0.0).values
    chi1 = states.gaussian(g1, -4.0, 0.5, 0.0).values
    chi2 = states.gaussian(g1, 4.0, 0.5, 0.0).values
    vals = np.outer(phi1, chi1) + np.outer(phi2, chi2)
    psi0 = WaveField(g2, vals).normalize()
    cfg = EvolutionConfig(dt=1e-3, t_final=0.0, mass=M2, engine="schrodinger",
                          integrator="split-step")
    run = evolve(psi0, free(), cfg)
    cw = conditional_wave(run, lambda t: -4.0, times=[0.0])[0]   # inside supp chi1
    norm1 = phi1 / np.sqrt(np.sum(np.abs(phi1) ** 2) * g2.h[0])
    overlap = abs(np.sum(np.conj(norm1) * cw.normalized) * g2.h[0])
    assert overlap == pytest.approx(1.0, abs=1e-8)


def test_conditional_wave_out_of_domain():
    g2, run, _ = product_run()
    with pytest.raises(OutOfDomainError):
        conditional_wave(run, lambda t: 99.0, times=[0.0])


def test_conditional_reduction_residuals():
    g2, run, _ = product_run()
    rho_dev, v_dev = conditional_reduction_residuals(run, len(run.times) - 1, 0.4)
    assert rho_dev < 1e-4                      # O(h^2) interpolation level
    assert v_dev < 1e-4


def measurement_scenario(p1, branch_width=0.5):
    gS = Grid((-6.0,), (6.0,), (256,), "periodic")
    gE = Grid((-16.0,), (16.0,), (256,), "periodic")
    g2 = Grid((-6.0, -16.0), (6.0, 16.0), (256, 256), "periodic")
    phi1 = states.gaussian(gS, -2.0, branch_width, 0.0).values
    phi2 = states.gaussian(gS, +2.0, branch_width, 0.0).values
    chi = states.gaussian(gE, 0.0, 0.7, 0.0).values
    a1, a2 = np.sqrt(p1), np.sqrt(1 - p1)
    psi0 = WaveField(g2, (a1 * phi1[:, None] + a2 * phi2[:, None]) * chi[None, :]).normalize()
    coup = MeasurementCoupling(g=4.0, t_on=0.0, t_off=0.5)
    scn = BipartiteScenario(g2, psi0, free(), coup, (phi1, phi2), (a1, a2))
    cfg = EvolutionConfig(dt=2e-3, t_final=1.5, mass=MassMatrix((0.05, 1.0)),
                          engine="schrodinger", integrator="split-step",
                          snapshot_stride=25)
    return scn, cfg


def test_measurement_collapse_and_monotonicity():
    scn, cfg = measurement_scenario(0.5)
    rep = run_measurement(scn, cfg, walker_seed=5)
    assert not rep.inconclusive
    assert rep.pointer_separation[-1] / rep.pointer_width[-1] >= 6.0
    assert rep.residual_other_branch <= 1e-3
    # residual non-increasing once the pointers are 4 widths apart
    qe = rep.qe_path
    residuals = []
    for k in range(len(rep.times)):
        if rep.pointer_separation[k] >= 4 * rep.pointer_width[k]:
            cw = conditional_wave(rep.run, lambda t, v=qe[k]: v,
                                  times=[rep.times[k]])[0]
            other = scn.branch_states[1 - rep.selected_branch]
            amp = np.sum(np.conj(other) * cw.normalized) * scn.grid.h[0]
            residuals.append(abs(amp) ** 2)
    assert len(residuals) >= 3
    diffs = np.diff(residuals)
    assert np.all(diffs <= 1e-6)


def test_measurement_single_branch():
    scn, cfg = measurement_scenario(1.0, branch_width=0.35)
    rep = run_measurement(scn, cfg, walker_seed=5)
    assert rep.selected_branch == 0
    assert rep.residual_other_branch <= 1e-10


def test_measurement_requires_orthogonal_branches():
    scn, cfg = measurement_scenario(0.5, branch_width=1.6)
    with pytest.raises(ContractError):
        run_measurement(scn, cfg)


def test_product_rule_ground_states():
    g1 = Grid((-8.0,), (8.0,), (128,), "periodic")
    g2 = Grid((-8.0, -8.0), (8.0, 8.0), (128, 128), "periodic")
    psi = states.harmonic_eigenstate(g1, 0, 1.0, M1)
    pot1 = harmonic(1.0, M1)
    pot2d = harmonic((1.0, 1.0), M2)
    cfg = EvolutionConfig(dt=5e-3, t_final=1.0, mass=M2, engine="schrodinger",
                          integrator="split-step", snapshot_stride=50)
    dev = product_rule_check(psi, psi, pot1, pot1, g2, pot2d, cfg)
    assert dev <= 1e-8


def test_product_rule_fails_with_coupling():
    g1 = Grid((-8.0,), (8.0,), (128,), "periodic")
    g2 = Grid((-8.0, -8.0), (8.0, 8.0), (128, 128), "periodic")
    psi = states.gaussian(g1, 0.0, 1.0, 0.0)
    cfg = EvolutionConfig(dt=5e-3, t_final=2.0, mass=M2, engine="schrodinger",
                          integrator="split-step", snapshot_stride=50)
    dev = product_rule_check(psi, psi, free(), free(), g2, free(), cfg,
                             coupling=MeasurementCoupling(1.0, 0.0, 2.0))
    assert dev > 1e-2


@pytest.mark.parametrize("engine,tol", [("schrodinger", 1e-8),
                                        ("pre-schrodinger", 1e-6)])
def test_splitting_identity(engine, tol):
    g1 = Grid((-8.0,), (8.0,), (128,), "periodic")
    g2 = Grid((-8.0, -8.0), (8.0, 8.0), (128, 128), "periodic")
    psi1 = states.gaussian(g1, 0.0, 1.0, 0.0)
    psi2 = states.gaussian(g1, 0.5, 1.2, 0.0)
    cfg = EvolutionConfig(dt=1e-3, t_final=1e-3, mass=M2, engine=engine)
    res = splitting_check(psi1, psi2, harmonic(1.0, M1), harmonic(1.0, M1), g2,
                          harmonic((1.0, 1.0), M2), cfg)
    assert res <= tol


def test_splitting_scaled_factor_invariance():
    # GL(1): scaling one factor by any complex number leaves the residual tiny
    g1 = Grid((-8.0,), (8.0,), (128,), "periodic")
    g2 = Grid((-8.0, -8.0), (8.0, 8.0), (128, 128), "periodic")
    psi1 = states.gaussian(g1, 0.0, 1.0, 0.0)
    psi2 = WaveField(g1, (0.3 + 2.1j) * states.gaussian(g1, 0.5, 1.2, 0.0).values)
    cfg = EvolutionConfig(dt=1e-3, t_final=1e-3, mass=M2, engine="pre-schrodinger")
    res = splitting_check(psi1, psi2, harmonic(1.0, M1), harmonic(1.0, M1), g2,
                          harmonic((1.0, 1.0), M2), cfg)
    assert res <= 1e-6


def test_splitting_label_swap_symmetry():
    g1 = Grid((-8.0,), (8.0,), (128,), "periodic")
    g2 = Grid((-8.0, -8.0), (8.0, 8.0), (128, 128), "periodic")
    psi1 = states.gaussian(g1, 0.3, 1.0, 0.0)
    psi2 = states.gaussian(g1, -0.4, 1.3, 0.0)
    cfg = EvolutionConfig(dt=1e-3, t_final=1e-3, mass=M2, engine="schrodinger")
    pot = harmonic(1.0, M1)
    pot2d = harmonic((1.0, 1.0), M2)
    a = splitting_check(psi1, psi2, pot, pot, g2, pot2d, cfg)
    b = splitting_check(psi2, psi1, pot, pot, g2, pot2d, cfg)
    assert a == pytest.approx(b, abs=1e-12)
