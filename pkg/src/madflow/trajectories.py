"""Walker ensembles over stored wave-field runs.

Guided (deterministic) walkers follow dq/dt = v(q,t) by RK4 with multilinear
space interpolation and linear time interpolation between snapshots.
Stochastic walkers follow the diffusion dq = b dt + dB with b = v + u and
per-axis increment variance hbar * m^{ii} * dt; per-walker noise streams are
carved out of one counter-based Philox generator, so results depend only on
(seed, walker_count, dt_sde), never on how the work is scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (ContractError, InsufficientDataError, NodeEncounterError,
                     StructuralError)
from .grids import (Grid, MassMatrix, gradient, interpolate,
                    interpolation_corners_masked, laplacian)
from .madelung import FlowField, mass_norm_sq

_WALKER_BLOCK = 2**40         # Philox counter block reserved per walker
_INIT_STREAM = 2**63          # counter offset of the initial-sampling stream


@dataclass
class TrajectorySet:
    kind: str                         # classical | bohmian | nelsonian
    times: np.ndarray
    positions: np.ndarray             # (walkers, times, dim)
    seed: int | None = None
    truncated: bool = False
    reflections: int = 0

    def __post_init__(self):
        if self.positions.ndim != 3:
            raise StructuralError("positions must be (walkers, times, dim)")
        if self.positions.shape[1] != len(self.times):
            raise StructuralError("positions and times disagree")
        if np.any(np.diff(self.times) <= 0):
            raise StructuralError("times must be strictly increasing")
        if not np.all(np.isfinite(self.positions)):
            raise StructuralError("positions contain non-finite values")

    @property
    def walker_count(self) -> int:
        return self.positions.shape[0]


class _RunSampler:
    """Velocity / drift sampling on a snapshot run with node awareness."""

    def __init__(self, run, drift: bool = False):
        self.run = run
        self.drift = drift
        self.grid: Grid = run.grid

    def _field(self, k: int) -> np.ndarray:
        flow = self.run.flow(k)
        return flow.drift() if self.drift else flow.v

    def bracket(self, t: float) -> tuple[int, float]:
        times = self.run.times
        k = int(np.searchsorted(times, t, side="right")) - 1
        k = min(max(k, 0), len(times) - 2)
        theta = (t - times[k]) / (times[k + 1] - times[k])
        return k, float(np.clip(theta, 0.0, 1.0))

    def __call__(self, points: np.ndarray, t: float):
        """Returns (velocities (n, dim), ok (n,)) at unwrapped walker positions."""
        k, theta = self.bracket(t)
        g = self.grid
        pts = np.atleast_2d(points)
        if not g.periodic:
            eps = 1e-12 * g.domain_size()
            pts = np.clip(pts, np.asarray(g.lo) + eps, np.asarray(g.hi) - eps)
        f0, f1 = self.run.flow(k), self.run.flow(k + 1)
        a0 = self._field(k)
        a1 = self._field(k + 1)
        bad = (interpolation_corners_masked(f0.node_mask, g, pts)
               | interpolation_corners_masked(f1.node_mask, g, pts))
        out = np.empty_like(pts)
        for d in range(g.dim):
            v0 = interpolate(np.nan_to_num(a0[d]), g, pts)
            v1 = interpolate(np.nan_to_num(a1[d]), g, pts)
            out[:, d] = (1 - theta) * v0 + theta * v1
        return out, ~bad


def _rk4_step(sampler, q, t, dt):
    k1, ok1 = sampler(q, t)
    k2, ok2 = sampler(q + 0.5 * dt * k1, t + 0.5 * dt)
    k3, ok3 = sampler(q + 0.5 * dt * k2, t + 0.5 * dt)
    k4, ok4 = sampler(q + dt * k3, t + dt)
    qn = q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return qn, ok1 & ok2 & ok3 & ok4


def _advance_adaptive(sampler, q, t, dt, max_halvings: int = 20):
    """RK4 step for all walkers; walkers near masked cells retry with halved steps."""
    qn, ok = _rk4_step(sampler, q, t, dt)
    if np.all(ok):
        return qn
    out = qn
    for w in np.where(~ok)[0]:
        qw = q[w:w + 1]
        tw, rem, step = t, dt, dt
        halvings = 0
        while rem > 1e-15 * dt:
            qc, okc = _rk4_step(sampler, qw, tw, min(step, rem))
            if np.all(okc):
                qw = qc
                tw += min(step, rem)
                rem -= min(step, rem)
            else:
                step *= 0.5
                halvings += 1
                if halvings > max_halvings:
                    raise NodeEncounterError(
                        f"walker {w} hit a node region near t={tw:.6g}",
                        walker=int(w), time=float(tw))
        out[w] = qw[0]
    return out


def integrate_bohmian(run, starts: np.ndarray, substeps: int = 1,
                      t_stop: float | None = None) -> TrajectorySet:
    """Guided trajectories from explicit start points, sampled at snapshot times."""
    sampler = _RunSampler(run, drift=False)
    q = np.atleast_2d(np.asarray(starts, dtype=float)).copy()
    f0 = run.flow(0)
    if np.any(interpolation_corners_masked(f0.node_mask, run.grid, q)):
        raise ContractError("a start point sits on the initial node mask")
    times = [float(run.times[0])]
    traj = [q.copy()]
    for k in range(len(run.times) - 1):
        t0, t1 = float(run.times[k]), float(run.times[k + 1])
        if t_stop is not None and t1 > t_stop + 1e-12:
            break
        dt = (t1 - t0) / substeps
        for s in range(substeps):
            q = _advance_adaptive(sampler, q, t0 + s * dt, dt)
        times.append(t1)
        traj.append(q.copy())
    return TrajectorySet(kind="bohmian", times=np.array(times),
                         positions=np.stack(traj, axis=1))


def drift_field(flow: FlowField) -> np.ndarray:
    """Forward drift b^i = v^i + u^i (NaN on the node mask)."""
    return flow.drift()


def _walker_rngs(seed: int, lo: int, hi: int):
    return [np.random.Generator(np.random.Philox(key=seed).advance(w * _WALKER_BLOCK))
            for w in range(lo, hi)]


def sample_initial(run, n: int, seed: int) -> np.ndarray:
    """Draw n walker starts from the t=0 density (inverse-CDF in 1D, rejection in 2D)."""
    g: Grid = run.grid
    rho = run.flow(0).rho
    rng = np.random.Generator(np.random.Philox(key=seed).advance(_INIT_STREAM))
    if g.dim == 1:
        x = g.axes[0]
        cdf = np.cumsum(rho)
        cdf = cdf / cdf[-1]
        u = rng.random(n)
        return np.interp(u, cdf, x)[:, None]
    m = float(rho.max())
    out = np.empty((n, 2))
    got = 0
    while got < n:
        cand = np.column_stack([rng.uniform(g.lo[d], g.hi[d], size=2 * (n - got))
                                for d in range(2)])
        accept = rng.random(len(cand)) * m <= interpolate(rho, g, cand)
        take = cand[accept][: n - got]
        out[got:got + len(take)] = take
        got += len(take)
    return out


def integrate_nelson(run, walker_count: int, seed: int, dt_sde: float,
                     starts: np.ndarray | None = None,
                     diffusion_scale: float = 1.0,
                     drift: str = "full",
                     chunk: int = 4096) -> TrajectorySet:
    """Euler-Maruyama ensemble over the run, recorded at the snapshot times.

    drift="full" uses b = v + u; drift="current" drops the osmotic term
    (with diffusion_scale=0 this reduces to the guided dynamics).
    """
    if walker_count < 1:
        raise ContractError("walker_count must be >= 1")
    g: Grid = run.grid
    cfg = run.cfg
    times = run.times
    intervals = np.diff(times)
    n_sub = np.rint(intervals / dt_sde).astype(int)
    if np.any(n_sub < 1) or np.any(np.abs(intervals - n_sub * dt_sde) > 1e-9 * dt_sde * n_sub + 1e-15):
        raise ContractError("dt_sde must divide the snapshot interval")
    sampler = _RunSampler(run, drift=(drift == "full"))
    sigma = np.sqrt(np.asarray(cfg.mass.inv_diag) * cfg.hbar * dt_sde) * diffusion_scale
    if starts is None:
        starts = sample_initial(run, walker_count, seed)
    else:
        starts = np.atleast_2d(np.asarray(starts, dtype=float))
        if starts.shape[0] != walker_count:
            raise ContractError("starts must match walker_count")
    total_steps = int(np.sum(n_sub))
    lo_arr = np.asarray(g.lo)
    hi_arr = np.asarray(g.hi)
    positions = np.empty((walker_count, len(times), g.dim))
    reflections = 0
    for c0 in range(0, walker_count, chunk):
        c1 = min(c0 + chunk, walker_count)
        noise = np.empty((c1 - c0, total_steps, g.dim))
        for i, rng in enumerate(_walker_rngs(seed, c0, c1)):
            noise[i] = rng.standard_normal((total_steps, g.dim))
        q = starts[c0:c1].copy()
        positions[c0:c1, 0] = q
        step_idx = 0
        for k, nk in enumerate(n_sub):
            t0 = float(times[k])
            for s in range(nk):
                b, _ = sampler(q, t0 + s * dt_sde)
                q = q + b * dt_sde + sigma * noise[:, step_idx]
                step_idx += 1
                if not g.periodic:
                    under = q < lo_arr
                    over = q > hi_arr
                    reflections += int(under.sum() + over.sum())
                    q = np.where(under, 2 * lo_arr - q, q)
                    q = np.where(over, 2 * hi_arr - q, q)
            positions[c0:c1, k + 1] = q
    return TrajectorySet(kind="nelsonian", times=times.copy(), positions=positions,
                         seed=seed, reflections=reflections)


# --------------------------------------------------------------------------
# ensemble statistics

@dataclass
class EnsembleStats:
    time: float
    histogram: np.ndarray
    l1_distance_to_rho: float
    kde_bandwidth: float
    bin_edges: np.ndarray


def _bin_masses(rho: np.ndarray, grid: Grid, edges: np.ndarray) -> np.ndarray:
    w = grid.quadrature_weights * rho
    if grid.dim == 1:
        idx = np.clip(np.digitize(grid.axes[0], edges) - 1, 0, len(edges) - 2)
        out = np.bincount(idx, weights=w, minlength=len(edges) - 1)
    else:
        raise StructuralError("bin masses implemented for 1D")
    return out / out.sum()


def multinomial_l1_bound(n_walkers: int, n_bins: int) -> float:
    """Expected L1 sampling error of a histogram with ~uniform occupancy."""
    return float(np.sqrt(2.0 * n_bins / (np.pi * n_walkers)))


def equivariance_test(traj: TrajectorySet, run, bins: int = 24,
                      checkpoints: np.ndarray | None = None) -> list[EnsembleStats]:
    """L1 distance between walker bin masses and the |psi|^2 bin masses.

    Both sides are integrated over the same coarse bins, so the distance is
    pure sampling noise plus any equivariance violation.
    """
    g: Grid = run.grid
    if g.dim != 1:
        raise StructuralError("equivariance_test is 1D")
    edges = np.linspace(g.lo[0], g.hi[0], bins + 1)
    out = []
    times = traj.times if checkpoints is None else checkpoints
    for t in times:
        kt = int(np.argmin(np.abs(traj.times - t)))
        kr = int(np.argmin(np.abs(run.times - t)))
        x = traj.positions[:, kt, 0]
        if g.periodic:
            span = g.hi[0] - g.lo[0]
            x = np.mod(x - g.lo[0], span) + g.lo[0]
        hist, _ = np.histogram(x, bins=edges)
        hist = hist / hist.sum()
        target = _bin_masses(run.flow(kr).rho, g, edges)
        l1 = float(np.abs(hist - target).sum())
        out.append(EnsembleStats(float(t), hist, l1, float(edges[1] - edges[0]), edges))
    return out


# --------------------------------------------------------------------------
# Fokker-Planck residual via an analytic-derivative KDE

def _kde_and_derivs(x_eval: np.ndarray, samples: np.ndarray, bw: float):
    """Gaussian KDE and its first two spatial derivatives, evaluated exactly."""
    d = (x_eval[:, None] - samples[None, :]) / bw
    k = np.exp(-0.5 * d * d) / (np.sqrt(2 * np.pi) * bw * len(samples))
    rho = k.sum(axis=1)
    drho = (-d / bw * k).sum(axis=1)
    d2rho = ((d * d - 1.0) / bw**2 * k).sum(axis=1)
    return rho, drho, d2rho


def fokker_planck_residual(traj: TrajectorySet, run, coarse_n: int = 64,
                           bandwidth_frac: float = 0.25,
                           floor_rel: float = 0.05) -> float:
    """Mean over interior checkpoints of the max-norm Fokker-Planck residual.

    The kernel density uses a fixed-fraction-of-spread bandwidth
    (bandwidth_frac * std of the walkers), deliberately independent of N so
    the residual decreases as O(1/sqrt(N)) at fixed bandwidth.  Regions below
    floor_rel * max(rho_hat) are excluded as undersampled.
    """
    if traj.kind != "nelsonian":
        raise ContractError("fokker_planck_residual expects a nelsonian ensemble")
    g: Grid = run.grid
    if g.dim != 1:
        raise StructuralError("fokker_planck_residual is 1D")
    if len(traj.times) < 3:
        raise InsufficientDataError("need at least 3 checkpoints")
    cfg = run.cfg
    xs = np.linspace(g.lo[0], g.hi[0], coarse_n)
    maxima = []
    for k in range(1, len(traj.times) - 1):
        dt_c = float(traj.times[k + 1] - traj.times[k - 1])
        rho_p, _, _ = _kde_and_derivs(xs, traj.positions[:, k + 1, 0],
                                      bandwidth_frac * np.std(traj.positions[:, k + 1, 0]))
        rho_m, _, _ = _kde_and_derivs(xs, traj.positions[:, k - 1, 0],
                                      bandwidth_frac * np.std(traj.positions[:, k - 1, 0]))
        samples = traj.positions[:, k, 0]
        bw = bandwidth_frac * float(np.std(samples))
        rho, drho, d2rho = _kde_and_derivs(xs, samples, bw)
        kr = int(np.argmin(np.abs(run.times - traj.times[k])))
        flow = run.flow(kr)
        b_grid = np.nan_to_num(flow.drift()[0])
        b = interpolate(b_grid, g, xs[:, None])
        db = interpolate(gradient(b_grid, g)[0], g, xs[:, None])
        res = ((rho_p - rho_m) / dt_c + drho * b + rho * db
               - 0.5 * cfg.hbar * cfg.mass.inv_diag[0] * d2rho)
        ok = rho >= floor_rel * rho.max()
        maxima.append(float(np.max(np.abs(res[ok]))))
    return float(np.mean(maxima))


# --------------------------------------------------------------------------
# mean acceleration / Newton law residual

def mean_acceleration_residual(run, k: int = 0, support_rel: float = 1e-6) -> float:
    """Max-norm of a^i + m^{ij} d_j V, the ensemble-average Newton law.

    The acceleration is assembled from the flow snapshots as
    a = d_t v + (v.grad)v - (hbar^2/2) m grad(lap_m sqrt(rho)/sqrt(rho)),
    with a forward time difference between snapshots k and k+1.
    """
    if k + 1 >= len(run.times):
        raise StructuralError("need two consecutive snapshots")
    from .madelung import _dilate
    f0, f1 = run.flow(k), run.flow(k + 1)
    g: Grid = run.grid
    cfg = run.cfg
    dt = float(run.times[k + 1] - run.times[k])
    mask = f0.node_mask | f1.node_mask
    ok = (~_dilate(mask, g)) & (f0.rho >= support_rel * float(f0.rho.max()))
    v0 = np.nan_to_num(f0.v)
    v1 = np.nan_to_num(f1.v)
    dv_dt = (v1 - v0) / dt
    adv = np.zeros_like(v0)
    for i in range(g.dim):
        dvi = gradient(v0[i], g)
        for j in range(g.dim):
            adv[i] += v0[j] * dvi[j]
    amp = np.sqrt(f0.rho)
    ratio = np.zeros(g.shape)
    off = amp > 0
    ratio[off] = laplacian(amp, g, cfg.mass)[off] / amp[off]
    grad_ratio = gradient(ratio, g)
    grad_v = gradient(run.potential.values(g), g)
    worst = 0.0
    for i in range(g.dim):
        a_i = dv_dt[i] + adv[i] - 0.5 * cfg.hbar**2 * cfg.mass.inv_diag[i] * grad_ratio[i]
        res = a_i + cfg.mass.inv_diag[i] * grad_v[i]
        worst = max(worst, float(np.max(np.abs(res[ok]))))
    return worst
