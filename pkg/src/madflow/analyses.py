"""Analysis dispatch: each entry runs one verification on a scenario's run
and returns (records for the analyses table, summary scalars, passed flag).
Thresholds come from the scenario config; defaults match the module contracts.
"""
from __future__ import annotations

import numpy as np

from . import bipartite, dynamics, nodes, trajectories
from .errors import ConfigError
from .madelung import polar_decompose
from .scenario import Scenario, bipartite_branches
from .trajectories import TrajectorySet


def _walker_seed(scn: Scenario) -> int:
    s = scn.get("trajectories.seed")
    return scn.seed if s < 0 else s


def make_trajectories(scn: Scenario, run) -> TrajectorySet | None:
    kind = scn.get("trajectories.kind")
    if kind == "none":
        return None
    n = scn.get("trajectories.walkers")
    seed = _walker_seed(scn)
    if kind == "bohmian":
        starts = scn.get("trajectories.starts")
        if starts:
            pts = np.asarray(starts, dtype=float).reshape(-1, scn.grid.dim)
        else:
            pts = trajectories.sample_initial(run, n, seed)
        return trajectories.integrate_bohmian(run, pts)
    if kind == "nelsonian":
        return trajectories.integrate_nelson(run, n, seed,
                                             scn.get("trajectories.dt_sde"))
    raise ConfigError(f"unknown trajectories.kind {kind!r}")


def run_equivariance(scn: Scenario, run, traj):
    n_checks = scn.get("equivariance.checkpoints")
    idx = np.unique(np.linspace(0, len(traj.times) - 1, n_checks).astype(int))
    checks = traj.times[idx]
    stats = trajectories.equivariance_test(traj, run,
                                           bins=scn.get("equivariance.bins"),
                                           checkpoints=checks)
    thr = scn.get("equivariance.threshold")
    records = [{"t": s.time, "l1": s.l1_distance_to_rho, "threshold": thr}
               for s in stats]
    worst = max(s.l1_distance_to_rho for s in stats)
    return records, {"l1_max": worst, "threshold": thr}, worst <= thr


def run_fokker_planck(scn: Scenario, run, traj):
    res = trajectories.fokker_planck_residual(
        traj, run, coarse_n=scn.get("fokker-planck.coarse_n"),
        bandwidth_frac=scn.get("fokker-planck.bandwidth_frac"),
        floor_rel=scn.get("fokker-planck.floor"))
    thr = scn.get("fokker-planck.threshold")
    rec = [{"walkers": traj.walker_count, "residual": res, "threshold": thr}]
    return rec, {"residual": res, "threshold": thr}, res <= thr


def run_hj_residuals(scn: Scenario, run, traj):
    modes = scn.get("hj-residuals.modes")
    k = scn.get("hj-residuals.k")
    floor = scn.get("hj-residuals.support_floor")
    thr = scn.get("hj-residuals.threshold")
    records = []
    worst = 0.0
    for mode in modes:
        annotated = (mode == "classical-hj" and run.cfg.engine == "schrodinger")
        r = dynamics.hj_residuals(run, mode, k=k, support_rel=floor)
        records.append({"mode": mode, "residual": r, "threshold": thr,
                        "engine_mismatch": annotated})
        if not annotated:
            worst = max(worst, r)
    return records, {"residual_max": worst, "threshold": thr}, worst <= thr


def run_caustic(scn: Scenario, run, traj):
    horizon = scn.get("caustic.horizon") or None
    rep = dynamics.detect_caustic(run, j_min=scn.get("caustic.j_min"),
                                  blowup_factor=scn.get("caustic.blowup_factor"),
                                  horizon=horizon)
    expect = scn.get("caustic.expect")
    tol = scn.get("caustic.tol")
    rec = {"detected": rep.detected,
           "t_caustic": rep.t_caustic if rep.detected else float("nan"),
           "indicator": rep.indicator or "none"}
    if np.isnan(expect):
        passed = True
    else:
        passed = rep.detected and abs(rep.t_caustic - expect) <= tol
        rec["expected"] = expect
        rec["tolerance"] = tol
    scalars = {"detected": rep.detected}
    if rep.detected:
        scalars["t_caustic"] = rep.t_caustic
    return [rec], scalars, passed


def run_equivalence(scn: Scenario, run, traj):
    q0 = np.asarray(scn.get("equivalence.start"), dtype=float)
    rep = dynamics.equivalence_check(scn.psi0, q0, scn.potential, scn.cfg)
    budget = scn.get("equivalence.threshold_frac") * scn.grid.domain_size()
    records = [{"t": float(t), "q_guided": float(a[0]), "q_classical": float(b[0])}
               for t, a, b in zip(rep.times, rep.q_guided, rep.q_classical)]
    scalars = {"max_deviation": rep.max_deviation, "t_horizon": rep.t_horizon,
               "budget": budget}
    return records, scalars, rep.max_deviation <= budget


def run_wallstrom(scn: Scenario, run, traj):
    flow = run.flow(0) if run is not None else polar_decompose(
        scn.psi0, scn.mass, scn.get("hbar"), eps_node=None)
    cands = nodes.find_nodes(scn.psi0)
    good = [c for c in cands if c.converged]
    records = []
    scalars = {"nodes_found": len(good)}
    passed = len(good) > 0
    qtol = scn.get("wallstrom.quantization_tol")
    radii = scn.get("wallstrom.radii")
    if not radii:
        w = scn.get("state.width")[0] if scn.values.get("state.width") else 1.0
        radii = tuple(w * f for f in (0.35, 0.5, 0.7, 1.0, 1.4))
    for c in good:
        na = nodes.circulation_quantization(flow, c.point, radii,
                                            k_points=scn.get("wallstrom.k_points"),
                                            quantization_tol=qtol)
        h = min(scn.grid.h)
        w = scn.get("state.width")[0] if scn.values.get("state.width") else 1.0
        r_lo = scn.get("wallstrom.fit_rlo") or 10 * h
        r_hi = scn.get("wallstrom.fit_rhi") or 0.45 * w
        alpha, stderr = nodes.fit_density_exponent(flow, c.point, (r_lo, r_hi))
        reg = nodes.regularity_check(flow, c.point)
        for r, wind in na.winding_by_radius.items():
            records.append({"node_x": c.point[0], "node_y": c.point[1],
                            "radius": r, "winding": wind,
                            "circulation": wind * 2 * np.pi * scn.get("hbar")})
        alpha_expect = (2 * abs(int(scn.values.get("state.m", 1)))
                        if scn.values.get("state.kind") == "vortex" else float("nan"))
        scalars.update({"winding_estimate": na.winding_estimate,
                        "nearest_integer_m": na.nearest_integer_m,
                        "quantization_residual": na.quantization_residual,
                        "alpha_fit": alpha, "alpha_stderr": stderr,
                        "delta_rho_at_node": reg.delta_rho_at_node,
                        "postulate_verdict": reg.postulate_verdict})
        ok = na.quantization_residual <= qtol
        if not np.isnan(alpha_expect):
            ok = ok and abs(alpha - alpha_expect) <= scn.get("wallstrom.alpha_tol")
        passed = passed and ok
    return records, scalars, passed


def _measurement_objects(scn: Scenario):
    phi1, phi2, weights = bipartite_branches(scn.values, scn.grid)
    coup = bipartite.MeasurementCoupling(scn.get("interaction.g"),
                                         scn.get("interaction.t_on"),
                                         scn.get("interaction.t_off"))
    return bipartite.BipartiteScenario(scn.grid, scn.psi0, scn.potential, coup,
                                       (phi1, phi2), weights)


def run_measurement(scn: Scenario, run, traj):
    bscn = _measurement_objects(scn)
    rep = bipartite.run_measurement(bscn, scn.cfg, walker_seed=scn.seed)
    records = [{"t": float(t), "w1": float(w[0]), "w2": float(w[1]),
                "separation": float(s), "width": float(pw)}
               for t, w, s, pw in zip(rep.times, rep.branch_weights,
                                      rep.pointer_separation, rep.pointer_width)]
    rtol = scn.get("measurement.residual_tol")
    need_widths = scn.get("measurement.separation_widths")
    sep_ratio = rep.pointer_separation[-1] / rep.pointer_width[-1]
    passed = (not rep.inconclusive and sep_ratio >= need_widths
              and rep.residual_other_branch <= rtol)
    scalars = {"selected_branch": rep.selected_branch + 1,
               "residual_other_branch": rep.residual_other_branch,
               "separation_over_width": sep_ratio,
               "inconclusive": rep.inconclusive}
    n_walkers = scn.get("measurement.walkers")
    if n_walkers:
        freqs, _ = bipartite.branch_statistics(bscn, scn.cfg, n_walkers, scn.seed)
        p1 = abs(bscn.weights[0]) ** 2
        sig = np.sqrt(max(p1 * (1 - p1), 1e-12) / n_walkers)
        band = scn.get("measurement.freq_sigmas") * sig
        scalars.update({"branch1_frequency": freqs[0], "born_p1": p1,
                        "frequency_band": band})
        passed = passed and abs(freqs[0] - p1) <= band
    return records, scalars, passed


def run_product_rule(scn: Scenario, run, traj):
    from .grids import Grid, MassMatrix
    from .scenario import _build_state
    from .potentials import PotentialSpec
    g = scn.grid
    g_s = Grid((g.lo[0],), (g.hi[0],), (g.n[0],), g.boundary)
    g_e = Grid((g.lo[1],), (g.hi[1],), (g.n[1],), g.boundary)
    m_s = MassMatrix((scn.mass.inv_diag[0],))
    m_e = MassMatrix((scn.mass.inv_diag[1],))
    pot1 = PotentialSpec(kind=scn.potential.kind, omega=(scn.potential.omega[0],),
                         mass=m_s) if scn.potential.kind == "harmonic" else scn.potential
    pot2 = PotentialSpec(kind=scn.potential.kind, omega=(scn.potential.omega[1],),
                         mass=m_e) if scn.potential.kind == "harmonic" else scn.potential
    psi1 = _build_state("state.system", scn.values, g_s, m_s, scn.get("hbar"), pot1)
    psi2 = _build_state("state.env", scn.values, g_e, m_e, scn.get("hbar"), pot2)
    coup = None
    if scn.get("interaction.kind") == "measurement-coupling":
        coup = bipartite.MeasurementCoupling(scn.get("interaction.g"),
                                             scn.get("interaction.t_on"),
                                             scn.get("interaction.t_off"))
    dev = bipartite.product_rule_check(psi1, psi2, pot1, pot2, g, scn.potential,
                                       scn.cfg, coupling=coup)
    thr = scn.get("product-rule.threshold")
    return ([{"deviation": dev, "threshold": thr}],
            {"deviation": dev, "threshold": thr}, dev <= thr)


def run_splitting(scn: Scenario, run, traj):
    from .grids import Grid, MassMatrix
    from .scenario import _build_state
    from .potentials import PotentialSpec
    g = scn.grid
    g_s = Grid((g.lo[0],), (g.hi[0],), (g.n[0],), g.boundary)
    g_e = Grid((g.lo[1],), (g.hi[1],), (g.n[1],), g.boundary)
    m_s = MassMatrix((scn.mass.inv_diag[0],))
    m_e = MassMatrix((scn.mass.inv_diag[1],))
    pot1 = PotentialSpec(kind=scn.potential.kind, omega=(scn.potential.omega[0],),
                         mass=m_s) if scn.potential.kind == "harmonic" else scn.potential
    pot2 = PotentialSpec(kind=scn.potential.kind, omega=(scn.potential.omega[1],),
                         mass=m_e) if scn.potential.kind == "harmonic" else scn.potential
    psi1 = _build_state("state.system", scn.values, g_s, m_s, scn.get("hbar"), pot1)
    psi2 = _build_state("state.env", scn.values, g_e, m_e, scn.get("hbar"), pot2)
    res = bipartite.splitting_check(psi1, psi2, pot1, pot2, g, scn.potential, scn.cfg)
    thr = scn.get("splitting.threshold")
    return ([{"residual": res, "threshold": thr}],
            {"residual": res, "threshold": thr}, res <= thr)


def run_energy_balance(scn: Scenario, run, traj):
    flow = run.flow(0) if run is not None and len(run) else polar_decompose(
        scn.psi0, scn.mass, scn.get("hbar"))
    energy = scn.get("energy-balance.energy")
    res = nodes.stationary_energy_balance_residual(flow, scn.potential, energy)
    thr = scn.get("energy-balance.threshold")
    return ([{"residual": res, "energy": energy, "threshold": thr}],
            {"residual": res, "threshold": thr}, res <= thr)


def run_mean_acceleration(scn: Scenario, run, traj):
    res = trajectories.mean_acceleration_residual(
        run, k=scn.get("mean-acceleration.k"),
        support_rel=scn.get("mean-acceleration.support_floor"))
    thr = scn.get("mean-acceleration.threshold")
    return ([{"residual": res, "threshold": thr}],
            {"residual": res, "threshold": thr}, res <= thr)


DISPATCH = {
    "equivariance": run_equivariance,
    "fokker-planck": run_fokker_planck,
    "hj-residuals": run_hj_residuals,
    "caustic": run_caustic,
    "equivalence": run_equivalence,
    "wallstrom": run_wallstrom,
    "measurement": run_measurement,
    "product-rule": run_product_rule,
    "splitting": run_splitting,
    "energy-balance": run_energy_balance,
    "mean-acceleration": run_mean_acceleration,
}
