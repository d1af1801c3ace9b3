"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  Tolerances are fixed here,
not configurable: criterion thresholds come from the module contracts, grid
and step sizes from the calibration studies recorded in the test bodies.
"""
import numpy as np
import pytest

from madflow import (Grid, MassMatrix, WaveField, free, harmonic,
                     mesh_from_center, polar_decompose)
from madflow import bipartite, dynamics, nodes, states, trajectories
from madflow.dynamics import EvolutionConfig
from madflow.madelung import FlowField, node_mask_of

M1 = MassMatrix.isotropic(1.0, 1)
M2 = MassMatrix.isotropic(1.0, 2)


def report(num, name, passed, detail=""):
    line = f"ACCEPTANCE {num:02d} [{'PASS' if passed else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert passed, line


# -- 1: circulation quantization ---------------------------------------------

def test_criterion_01_circulation_quantization():
    worst = 0.0
    for m, w, half, radii in [
        (-2, 2.0, 6.0, (0.7, 1.0, 1.4, 2.0, 2.8)),
        (-1, 2.0, 6.0, (0.7, 1.0, 1.4, 2.0, 2.8)),
        (+1, 2.0, 6.0, (0.7, 1.0, 1.4, 2.0, 2.8)),
        (+2, 2.0, 6.0, (0.7, 1.0, 1.4, 2.0, 2.8)),
        (+3, 1.2, 5.0, (1.2, 1.7, 2.4, 3.4, 4.8)),
    ]:
        g = Grid((-half, -half), (half, half), (512, 512), "periodic")
        flow = polar_decompose(states.vortex(g, m, w), M2, 1.0)
        na = nodes.circulation_quantization(flow, (0.0, 0.0), radii,
                                            k_points=1024)
        dev = max(abs(v - m) for v in na.winding_by_radius.values())
        worst = max(worst, dev)
        if dev > 1e-3 or na.nearest_integer_m != m:
            report(1, "circulation quantization", False,
                   f"m={m} radius deviation {dev:.2e}")
    report(1, "circulation quantization m in {-2,-1,1,2,3}", True,
           f"worst per-radius |winding - m| = {worst:.2e} <= 1e-3")


# -- 2: node-regularity discrimination ---------------------------------------

def _synthetic_flow(alpha, w=2.4, half=4.0, n=512):
    g = Grid((-half, -half), (half, half), (n, n), "periodic")
    x, y = g.meshgrid()
    r = np.hypot(x, y)
    rho = np.power(np.maximum(r, 1e-300), alpha) * np.exp(-(r**2) / w**2)
    rho /= g.integrate(rho)
    zero = np.zeros((2,) + g.shape)
    return g, FlowField(g, rho, zero, zero, np.zeros(g.shape),
                        node_mask_of(rho, None), M2, 1.0)


def test_criterion_02_postulate_discrimination():
    for alpha in (0.5, 1.0, 1.5, 2.0, 3.0, 4.0):
        g, flow = _synthetic_flow(alpha)
        verdict = nodes.regularity_check(flow, (0.0, 0.0)).postulate_verdict
        want = nodes.SATISFIED if alpha == 2.0 else (
            nodes.VIOLATED_INFINITE if alpha < 2 else nodes.VIOLATED_ZERO)
        if verdict != want:
            report(2, "postulate discrimination", False,
                   f"alpha={alpha}: verdict {verdict}")
    # exponent recovery on the simple-zero vortex family
    for m, tol in ((1, 0.05), (2, 0.1)):
        g = Grid((-6.0, -6.0), (6.0, 6.0), (512, 512), "periodic")
        flow = polar_decompose(states.vortex(g, m, 2.0), M2, 1.0)
        alpha, _ = nodes.fit_density_exponent(flow, (0.0, 0.0),
                                              (10 * min(g.h), 0.9))
        if abs(alpha - 2 * m) > tol:
            report(2, "postulate discrimination", False,
                   f"vortex m={m}: alpha {alpha:.3f}")
    report(2, "postulate verdict satisfied iff alpha=2; alpha_fit = 2|m|", True)


# -- 3: guided-vs-classical equivalence --------------------------------------

def _equivalence_dev(kind, n, dt):
    gd = mesh_from_center(10.0, n, 1, "dirichlet")
    if kind == "free":
        psi0 = states.gaussian(gd, -3.0, 1.0, 1.0)
        pot, t_final, q0 = free(), 2.0, [-3.0]
    elif kind == "harmonic":
        psi0 = states.gaussian(gd, 2.0, 1.0, 0.0)
        pot, t_final, q0 = harmonic(1.0, M1), 1.0, [2.5]
    else:
        psi0 = states.with_phase(states.gaussian(gd, 0.0, 1.5, 0.0),
                                 lambda x: -np.log(np.cosh(x)))
        pot, t_final, q0 = free(), 0.7, [0.8]
    cfg = EvolutionConfig(dt=dt, t_final=t_final, mass=M1,
                          engine="pre-schrodinger", integrator="crank-nicolson",
                          snapshot_stride=1)
    return dynamics.equivalence_check(psi0, q0, pot, cfg)


def test_criterion_03_equivalence_theorem():
    budget = 1e-4 * 20.0                     # 1e-4 x domain size
    details = []
    for kind in ("free", "harmonic", "tanh"):
        base = _equivalence_dev(kind, 2049, 2e-3)
        fine = _equivalence_dev(kind, 4097, 1e-3)
        ratio = base.max_deviation / fine.max_deviation
        ok = (base.max_deviation <= budget and fine.max_deviation <= budget
              and 1.4 <= ratio <= 2.6)
        details.append(f"{kind}: dev {base.max_deviation:.2e}->"
                       f"{fine.max_deviation:.2e} ratio {ratio:.2f}")
        if not ok:
            report(3, "equivalence theorem", False, details[-1])
    report(3, "pre-Schrodinger + guiding matches Hamiltonian flow", True,
           "; ".join(details))


# -- 4: caustic time ----------------------------------------------------------

def test_criterion_04_caustic_time():
    gd = mesh_from_center(10.0, 1025, 1, "dirichlet")
    psi0 = states.with_phase(states.gaussian(gd, 0.0, 2.0, 0.0),
                             lambda x: -x**2 / 2)
    cfg = EvolutionConfig(dt=1e-3, t_final=1.5, mass=M1,
                          engine="pre-schrodinger", integrator="crank-nicolson",
                          snapshot_stride=50)
    rep = dynamics.detect_caustic(dynamics.evolve(psi0, free(), cfg))
    ok = rep.detected and abs(rep.t_caustic - 1.0) <= 0.02
    report(4, "caustic at t = 1.00 +- 0.02 for v0 = -x", ok,
           f"t_caustic = {rep.t_caustic}")


# -- 5: equivariance ----------------------------------------------------------

def test_criterion_05_equivariance():
    g = mesh_from_center(12.0, 512, 1)
    cfg = EvolutionConfig(dt=1e-3, t_final=2.0, mass=M1, engine="schrodinger",
                          integrator="split-step", snapshot_stride=100)
    run = dynamics.evolve(states.gaussian(g, 0.0, 1.0, 0.0), free(), cfg)
    checks = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    n = 10_000
    bohm = trajectories.integrate_bohmian(run, trajectories.sample_initial(run, n, 42))
    nels = trajectories.integrate_nelson(run, n, seed=7, dt_sde=2e-3)
    worst = {}
    for label, traj in (("bohmian", bohm), ("nelsonian", nels)):
        stats = trajectories.equivariance_test(traj, run, bins=16,
                                               checkpoints=checks)
        worst[label] = max(s.l1_distance_to_rho for s in stats)
    ok = all(v <= 0.05 for v in worst.values())
    report(5, "equivariance, L1 <= 0.05 at 5 checkpoints, N=1e4", ok,
           f"bohmian {worst['bohmian']:.3f}, nelsonian {worst['nelsonian']:.3f}")


# -- 6: diffusion law and Fokker-Planck scaling -------------------------------

def test_criterion_06_nelson_diffusion():
    # increment variance over 1e6 draws
    g = mesh_from_center(12.0, 256, 1)
    cfg = EvolutionConfig(dt=1e-2, t_final=1.0, mass=M1, engine="schrodinger",
                          integrator="split-step", snapshot_stride=1)
    run_const = dynamics.evolve(states.plane_wave(g, 0.0), free(), cfg)
    n, dt_sde = 10_000, 1e-2
    tr = trajectories.integrate_nelson(run_const, n, seed=3, dt_sde=dt_sde,
                                       starts=np.zeros((n, 1)), drift="current")
    inc = np.diff(tr.positions[:, :, 0], axis=1)
    var_ratio = inc.var() / dt_sde
    ok_var = abs(var_ratio - 1.0) <= 0.01 and inc.size == 1_000_000

    # Fokker-Planck residual O(1/sqrt(N)) and absolute level
    g2 = mesh_from_center(8.0, 512, 1)
    cfg2 = EvolutionConfig(dt=1e-3, t_final=1.0, mass=M1, engine="schrodinger",
                           integrator="split-step", snapshot_stride=100)
    run = dynamics.evolve(states.harmonic_eigenstate(g2, 0, 1.0, M1),
                          harmonic(1.0, M1), cfg2)
    res = {}
    for n_w in (10_000, 40_000, 100_000):
        tr = trajectories.integrate_nelson(run, n_w, seed=11, dt_sde=1e-3)
        res[n_w] = trajectories.fokker_planck_residual(tr, run)
    ratio = res[10_000] / res[40_000]
    ok_scaling = 1.4 <= ratio <= 2.6
    ok_abs = res[100_000] <= 0.1
    report(6, "dB variance = hbar dt +- 1%; FP residual ~ 1/sqrt(N)",
           ok_var and ok_scaling and ok_abs,
           f"var/hbar dt = {var_ratio:.4f}; N-scaling ratio {ratio:.2f}; "
           f"residual(1e5) = {res[100_000]:.3f}")


# -- 7 and 8: flow-equation residuals ----------------------------------------

def _coherent_run(n, dt, half=6.0, stride=10):
    g = mesh_from_center(half, n, 1)
    cfg = EvolutionConfig(dt=dt, t_final=3 * stride * dt, mass=M1,
                          engine="schrodinger", integrator="split-step",
                          snapshot_stride=stride)
    return dynamics.evolve(states.coherent_state(g, 1.0, 1.0, M1),
                           harmonic(1.0, M1), cfg)


def test_criterion_07_hj_and_continuity_residuals():
    coarse = _coherent_run(512, 1e-3)
    fine = _coherent_run(1024, 5e-4)
    out = {}
    ok = True
    for mode in ("quantum-hj", "continuity"):
        r1 = dynamics.hj_residuals(coarse, mode, k=1)
        r2 = dynamics.hj_residuals(fine, mode, k=1)
        out[mode] = (r1, r1 / r2)
        ok = ok and r1 <= 1e-2 and (r1 / r2) >= 1.4
    report(7, "quantum HJ and continuity residuals, O(dt + h^2)", ok,
           "; ".join(f"{m}: {v[0]:.2e}, ratio {v[1]:.2f}" for m, v in out.items()))


def test_criterion_08_mean_acceleration():
    r1 = trajectories.mean_acceleration_residual(_coherent_run(512, 1e-3), k=1)
    r2 = trajectories.mean_acceleration_residual(_coherent_run(1024, 5e-4), k=1)
    ok = r1 <= 1e-2 and r1 / r2 >= 1.4
    report(8, "ensemble Newton-law residual <= 1e-2, halving", ok,
           f"residual {r1:.2e}, refinement ratio {r1 / r2:.2f}")


# -- 9: measurement and Born statistics --------------------------------------

def _measurement_scenario(p1):
    gS = Grid((-6.0,), (6.0,), (256,), "periodic")
    gE = Grid((-16.0,), (16.0,), (256,), "periodic")
    g2 = Grid((-6.0, -16.0), (6.0, 16.0), (256, 256), "periodic")
    phi1 = states.gaussian(gS, -2.0, 0.5, 0.0).values
    phi2 = states.gaussian(gS, +2.0, 0.5, 0.0).values
    chi = states.gaussian(gE, 0.0, 0.7, 0.0).values
    a1, a2 = np.sqrt(p1), np.sqrt(1 - p1)
    psi0 = WaveField(g2, (a1 * phi1[:, None] + a2 * phi2[:, None])
                     * chi[None, :]).normalize()
    coup = bipartite.MeasurementCoupling(g=4.0, t_on=0.0, t_off=0.5)
    scn = bipartite.BipartiteScenario(g2, psi0, free(), coup, (phi1, phi2),
                                      (a1, a2))
    cfg = EvolutionConfig(dt=2e-3, t_final=1.5, mass=MassMatrix((0.05, 1.0)),
                          engine="schrodinger", integrator="split-step",
                          snapshot_stride=25)
    return scn, cfg


def test_criterion_09_measurement_collapse_and_born_rule():
    scn, cfg = _measurement_scenario(0.5)
    rep = bipartite.run_measurement(scn, cfg, walker_seed=5)
    sep_ok = rep.pointer_separation[-1] / rep.pointer_width[-1] >= 6.0
    ok = sep_ok and rep.residual_other_branch <= 1e-3
    freq_detail = []
    for p1 in (0.5, 0.8):
        scn_p, cfg_p = _measurement_scenario(p1)
        freqs, _ = bipartite.branch_statistics(scn_p, cfg_p, 400, seed=13)
        band = 3 * np.sqrt(p1 * (1 - p1) / 400)
        ok = ok and abs(freqs[0] - p1) <= band
        freq_detail.append(f"p1={p1}: freq {freqs[0]:.3f} (band +-{band:.3f})")
    report(9, "collapse residual <= 1e-3 at 6 widths; Born frequencies", ok,
           f"residual {rep.residual_other_branch:.2e}; " + "; ".join(freq_detail))


# -- 10: structural identities ------------------------------------------------

def test_criterion_10_structural_identities():
    g = mesh_from_center(8.0, 256, 1)
    psi = states.gaussian(g, 0.5, 1.0, 0.0)
    c = 1.7 - 0.9j
    hom_worst = 0.0
    for engine, stepper in (("schrodinger", dynamics.step_schrodinger),
                            ("pre-schrodinger", dynamics.step_pre_schrodinger)):
        cfg = EvolutionConfig(dt=1e-3, t_final=1e-3, mass=M1, engine=engine)
        a = stepper(WaveField(g, c * psi.values), harmonic(1.0, M1), cfg)
        b = stepper(psi, harmonic(1.0, M1), cfg)
        hom_worst = max(hom_worst, float(
            np.max(np.abs(a.values - c * b.values)) / np.max(np.abs(c * b.values))))
    ok_hom = hom_worst <= 1e-10

    f1 = polar_decompose(psi, M1, 1.0)
    f2 = polar_decompose(WaveField(g, np.exp(1j * 0.77) * psi.values), M1, 1.0)
    phase_dev = max(np.nanmax(np.abs(f1.rho - f2.rho)),
                    np.nanmax(np.abs(f1.v - f2.v)),
                    np.nanmax(np.abs(f1.u - f2.u)))
    ok_phase = phase_dev <= 1e-12

    g1 = Grid((-8.0,), (8.0,), (128,), "periodic")
    g2 = Grid((-8.0, -8.0), (8.0, 8.0), (128, 128), "periodic")
    ground = states.harmonic_eigenstate(g1, 0, 1.0, M1)
    cfg2 = EvolutionConfig(dt=5e-3, t_final=3 * 2 * np.pi, mass=M2,
                           engine="schrodinger", integrator="split-step",
                           snapshot_stride=200)
    prod_dev = bipartite.product_rule_check(ground, ground, harmonic(1.0, M1),
                                            harmonic(1.0, M1), g2,
                                            harmonic((1.0, 1.0), M2), cfg2)
    ok_prod = prod_dev <= 1e-6

    split_worst = 0.0
    for engine in ("schrodinger", "pre-schrodinger"):
        cfgs = EvolutionConfig(dt=1e-3, t_final=1e-3, mass=M2, engine=engine)
        split_worst = max(split_worst, bipartite.splitting_check(
            states.gaussian(g1, 0.0, 1.0, 0.0), states.gaussian(g1, 0.5, 1.2, 0.0),
            harmonic(1.0, M1), harmonic(1.0, M1), g2, harmonic((1.0, 1.0), M2),
            cfgs))
    ok_split = split_worst <= 1e-8
    report(10, "homogeneity, phase invariance, product rule, splitting",
           ok_hom and ok_phase and ok_prod and ok_split,
           f"hom {hom_worst:.1e}; phase {phase_dev:.1e}; "
           f"product {prod_dev:.1e} (3 periods); splitting {split_worst:.1e}")


# -- 11: linear-part consistency ----------------------------------------------

def test_criterion_11_linear_part():
    g = mesh_from_center(8.0, 512, 1)
    psi = states.gaussian(g, 0.5, 1.0, 0.0)
    worst = 0.0
    for integrator, grd in (("split-step", g),
                            ("crank-nicolson",
                             mesh_from_center(8.0, 513, 1, "dirichlet"))):
        p = states.gaussian(grd, 0.5, 1.0, 0.0)
        a = dynamics.step_pre_schrodinger(
            p, harmonic(1.0, M1),
            EvolutionConfig(dt=1e-3, t_final=1e-3, mass=M1,
                            engine="pre-schrodinger", integrator=integrator,
                            force_q_zero=True))
        b = dynamics.step_schrodinger(
            p, harmonic(1.0, M1),
            EvolutionConfig(dt=1e-3, t_final=1e-3, mass=M1,
                            engine="schrodinger", integrator=integrator))
        worst = max(worst, float(np.max(np.abs(a.values - b.values))))
    report(11, "pre-Schrodinger with Q = 0 equals the linear engine", worst <= 1e-12,
           f"max difference {worst:.2e}")


# -- 12: two-point action ------------------------------------------------------

def test_criterion_12_two_point_action():
    s = dynamics.two_point_action([0.0], 0.0, [1.5], 3.0, free(), M1)
    exact = 1.5**2 / (2 * 3.0)
    ok_free = abs(s - exact) / exact <= 1e-8
    worst_res = 0.0
    for q0, q1, t1 in ((0.0, 1.5, 3.0), (0.3, 0.8, 1.2), (-0.5, 0.2, 0.9)):
        worst_res = max(worst_res, dynamics.action_hj_residual(
            [q0], 0.0, [q1], t1, harmonic(1.0, M1), M1))
        worst_res = max(worst_res, dynamics.action_hj_residual(
            [q0], 0.0, [q1], t1, free(), M1))
    ok = ok_free and worst_res <= 1e-3
    report(12, "free action to 1e-8; HJ residual of the S-table <= 1e-3", ok,
           f"free rel err {abs(s - exact) / exact:.1e}; "
           f"worst HJ residual {worst_res:.1e}")
