"""Two-particle configuration space (q_S, q_E): conditional wave functions,
pointer measurement with effective collapse, product-rule and generator
splitting checks.

A measurement couples system and pointer with V_int = g * q_S * q_E inside a
time window.  After the window the pointer packets separate; the conditional
wave function along an environment trajectory collapses onto one branch.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import (PRE_SCHRODINGER, SCHRODINGER, EvolutionConfig, WaveRun,
                       evolve, generator)
from .errors import ContractError, OutOfDomainError, StructuralError
from .grids import Grid, MassMatrix, WaveField, interpolate
from .potentials import PotentialSpec
from .trajectories import integrate_bohmian, sample_initial


@dataclass(frozen=True)
class MeasurementCoupling:
    g: float
    t_on: float
    t_off: float

    def potential(self, grid: Grid):
        x, y = grid.meshgrid()
        vxy = self.g * x * y

        def v_int(t: float) -> np.ndarray:
            return vxy if self.t_on <= t < self.t_off else np.zeros_like(vxy)

        return v_int


@dataclass
class ConditionalWave:
    """Slice psi(., q_E(t), t) of a 2D field along the environment axis."""

    values: np.ndarray
    time: float
    environment_position: float
    norm_factor: float

    @property
    def normalized(self) -> np.ndarray:
        return self.values / self.norm_factor


def conditional_wave(run: WaveRun, qe_path, times=None) -> list[ConditionalWave]:
    """Conditional waves psi^S(q_S, t) = psi(q_S, q_E(t), t) at snapshot times.

    qe_path: callable t -> q_E or an array aligned with the snapshot times.
    """
    g = run.grid
    if g.dim != 2:
        raise StructuralError("conditional_wave needs a 2D run")
    idxs = range(len(run.times)) if times is None else [
        int(np.argmin(np.abs(run.times - t))) for t in times]
    out = []
    for k in idxs:
        t = float(run.times[k])
        qe = float(qe_path(t)) if callable(qe_path) else float(qe_path[k])
        if not (g.lo[1] <= qe <= g.hi[1]):
            raise OutOfDomainError(f"environment position {qe:g} left the grid", point=(qe,))
        # linear interpolation between the two bracketing environment columns
        tpos = (qe - g.lo[1]) / g.h[1]
        j = int(np.clip(np.floor(tpos), 0, g.n[1] - 2))
        th = tpos - j
        sl = (1 - th) * run.psis[k][:, j] + th * run.psis[k][:, j + 1]
        norm = np.sqrt(float(np.sum(np.abs(sl) ** 2) * g.h[0]))
        out.append(ConditionalWave(sl, t, qe, norm if norm > 0 else 1.0))
    return out


def conditional_reduction_residuals(run: WaveRun, k: int, qe: float) -> tuple[float, float]:
    """Deviation of the sliced density and sliced phase gradient from the
    conditional wave's own flow variables (both vanish up to interpolation)."""
    cw = conditional_wave(run, lambda t: qe, times=[run.times[k]])[0]
    g = run.grid
    rho_slice = np.abs(cw.values) ** 2
    flow = run.flow(k)
    pts = np.column_stack([g.axes[0], np.full(g.n[0], qe)])
    rho_joint = interpolate(flow.rho, g, pts)
    rho_dev = float(np.max(np.abs(rho_slice - rho_joint)))
    # phase-gradient reduction: d_x S of the slice vs the joint v^x on the slice
    ratio = np.zeros(g.n[0], dtype=complex)
    ok = rho_slice > 1e-10 * rho_slice.max()
    dsl = np.gradient(cw.values, g.axes[0])
    ratio[ok] = dsl[ok] / cw.values[ok]
    v_slice = run.cfg.hbar * run.cfg.mass.inv_diag[0] * ratio.imag
    v_joint = interpolate(np.nan_to_num(flow.v[0]), g, pts)
    core = ok & (rho_slice > 1e-4 * rho_slice.max())
    v_dev = float(np.max(np.abs(v_slice[core] - v_joint[core])))
    return rho_dev, v_dev


# --------------------------------------------------------------------------
# measurement scenario

@dataclass(frozen=True)
class BipartiteScenario:
    grid: Grid
    psi0: WaveField
    potential: PotentialSpec
    coupling: MeasurementCoupling | None
    branch_states: tuple[np.ndarray, np.ndarray]   # phi_1, phi_2 on the q_S axis
    weights: tuple[complex, complex]


@dataclass
class MeasurementReport:
    times: np.ndarray
    branch_weights: np.ndarray        # (T, 2)
    pointer_separation: np.ndarray    # (T,)
    pointer_width: np.ndarray         # (T,)
    selected_branch: int
    residual_other_branch: float
    qe_path: np.ndarray
    run: WaveRun
    inconclusive: bool = False


def _branch_projections(run: WaveRun, phis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointer-packet statistics per branch.

    Centers and widths come from the projections c_i(q_E) = <phi_i|psi>;
    the reported weights are masses of the environment marginal on either
    side of the midpoint between the pointer centers (the projection norm
    itself decays once the coupling twists phases across the packets).
    """
    g = run.grid
    hq = g.h[0]
    t_count = len(run.times)
    weights = np.zeros((t_count, 2))
    centers = np.zeros((t_count, 2))
    widths = np.zeros((t_count, 2))
    ye = g.axes[1]
    for k in range(t_count):
        for i, phi in enumerate(phis):
            c = np.tensordot(np.conj(phi), run.psis[k], axes=(0, 0)) * hq
            w = np.abs(c) ** 2
            mass = float(np.sum(w) * g.h[1])
            if mass > 0:
                centers[k, i] = float(np.sum(ye * w) * g.h[1] / mass)
                widths[k, i] = float(np.sqrt(max(
                    np.sum((ye - centers[k, i]) ** 2 * w) * g.h[1] / mass, 0.0)))
        marg = np.sum(np.abs(run.psis[k]) ** 2, axis=0) * hq * g.h[1]
        total = float(marg.sum())
        if centers[k, 0] == centers[k, 1]:
            weights[k] = (0.5, 0.5)
        else:
            mid = 0.5 * (centers[k, 0] + centers[k, 1])
            side = ye < mid if centers[k, 0] < centers[k, 1] else ye >= mid
            weights[k, 0] = float(marg[side].sum()) / total
            weights[k, 1] = 1.0 - weights[k, 0]
    return weights, centers, widths


def run_measurement(scenario: BipartiteScenario, cfg: EvolutionConfig,
                    walker_start=None, walker_seed: int = 0) -> MeasurementReport:
    """Evolve the coupled system, follow one guided environment walker and
    report branch weights, pointer separation and the unselected-branch residual."""
    phi1, phi2 = scenario.branch_states
    g = scenario.grid
    overlap = abs(np.sum(np.conj(phi1) * phi2) * g.h[0])
    if overlap > 1e-3:
        raise ContractError(f"branch states overlap ({overlap:.3g}); need orthogonal pointers")
    v_int = scenario.coupling.potential(g) if scenario.coupling else None
    run = evolve(scenario.psi0, scenario.potential, cfg, v_int=v_int)
    weights, centers, widths = _branch_projections(run, (phi1, phi2))
    separation = np.abs(centers[:, 0] - centers[:, 1])
    width = np.maximum(widths.max(axis=1), 1e-300)

    if walker_start is None:
        walker_start = sample_initial(run, 1, walker_seed)[0]
    traj = integrate_bohmian(run, np.atleast_2d(walker_start))
    qe_path = traj.positions[0, :, 1]

    # selected branch: whichever pointer packet the walker ends inside
    # (degenerate single-branch states select by weight, not distance)
    final_qe = qe_path[-1]
    if float(weights[-1].min()) < 1e-6:
        selected = int(np.argmax(weights[-1]))
    else:
        selected = int(np.argmin(np.abs(centers[-1] - final_qe)))
    cw = conditional_wave(run, lambda t: np.interp(t, traj.times, qe_path),
                          times=[run.times[-1]])[0]
    other = (phi2, phi1)[selected]
    amp = np.sum(np.conj(other) * cw.normalized) * g.h[0]
    residual = float(np.abs(amp) ** 2)
    inconclusive = bool(separation[-1] < 4 * width[-1])
    return MeasurementReport(run.times.copy(), weights, separation, width,
                             selected, residual, qe_path, run, inconclusive)


def branch_statistics(scenario: BipartiteScenario, cfg: EvolutionConfig,
                      n_walkers: int, seed: int) -> tuple[np.ndarray, MeasurementReport]:
    """Selected-branch frequencies over a seeded walker ensemble (one shared run)."""
    phi1, phi2 = scenario.branch_states
    v_int = scenario.coupling.potential(scenario.grid) if scenario.coupling else None
    run = evolve(scenario.psi0, scenario.potential, cfg, v_int=v_int)
    weights, centers, widths = _branch_projections(run, (phi1, phi2))
    starts = sample_initial(run, n_walkers, seed)
    traj = integrate_bohmian(run, starts)
    final_qe = traj.positions[:, -1, 1]
    if float(weights[-1].min()) < 1e-6:
        picks = np.full(n_walkers, int(np.argmax(weights[-1])))
    else:
        picks = np.argmin(np.abs(centers[-1][None, :] - final_qe[:, None]), axis=1)
    freqs = np.array([(picks == 0).mean(), (picks == 1).mean()])
    rep = MeasurementReport(run.times.copy(), weights,
                            np.abs(centers[:, 0] - centers[:, 1]),
                            np.maximum(widths.max(axis=1), 1e-300),
                            int(picks[0]), np.nan, traj.positions[0, :, 1], run)
    return freqs, rep


# --------------------------------------------------------------------------
# product rule and generator splitting

def product_rule_check(psi1: WaveField, psi2: WaveField, pot1: PotentialSpec,
                       pot2: PotentialSpec, grid2d: Grid, pot2d: PotentialSpec,
                       cfg2d: EvolutionConfig,
                       coupling: MeasurementCoupling | None = None) -> float:
    """max_t || psi_joint(t) - psi1(t) x psi2(t) || / ||psi_joint|| for a pair
    evolved jointly on the 2D grid and factor-wise in 1D with matched dt.

    coupling is only for adversarial use: with g != 0 the factorization must fail.
    """
    from .states import product_state
    psi0 = product_state(grid2d, psi1, psi2)
    v_int = coupling.potential(grid2d) if coupling is not None else None
    run2d = evolve(psi0, pot2d, cfg2d, v_int=v_int)
    cfg_a = replace(cfg2d, mass=MassMatrix((cfg2d.mass.inv_diag[0],)))
    cfg_b = replace(cfg2d, mass=MassMatrix((cfg2d.mass.inv_diag[1],)))
    run1 = evolve(psi1, pot1, cfg_a)
    run2 = evolve(psi2, pot2, cfg_b)
    worst = 0.0
    for k, t in enumerate(run2d.times):
        k1 = int(np.argmin(np.abs(run1.times - t)))
        joint = run2d.psis[k]
        outer = np.outer(run1.psis[k1], run2.psis[k1])
        num = np.sqrt(np.sum(np.abs(joint - outer) ** 2))
        den = np.sqrt(np.sum(np.abs(joint) ** 2))
        worst = max(worst, float(num / den))
    return worst


def splitting_check(psi1: WaveField, psi2: WaveField, pot1: PotentialSpec,
                    pot2: PotentialSpec, grid2d: Grid, pot2d: PotentialSpec,
                    cfg: EvolutionConfig) -> float:
    """Relative norm of Omega(psi1 x psi2) - [Omega1(psi1) x psi2 + psi1 x Omega2(psi2)]
    for the discretized generator Omega = Omega1 + Omega2 of the configured engine.

    The generator needs no normalization, so the raw outer product is used.
    """
    joint_vals = np.outer(psi1.values, psi2.values)
    cfg1 = replace(cfg, mass=MassMatrix((cfg.mass.inv_diag[0],)))
    cfg2 = replace(cfg, mass=MassMatrix((cfg.mass.inv_diag[1],)))
    om_joint = generator(joint_vals, grid2d, pot2d, cfg)
    om1 = generator(psi1.values, psi1.grid, pot1, cfg1)
    om2 = generator(psi2.values, psi2.grid, pot2, cfg2)
    split = np.outer(om1, psi2.values) + np.outer(psi1.values, om2)
    num = np.sqrt(np.sum(np.abs(om_joint - split) ** 2))
    den = np.sqrt(np.sum(np.abs(om_joint) ** 2))
    return float(num / den)
