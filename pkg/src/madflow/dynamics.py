"""Time evolution engines and Hamilton-Jacobi machinery.

Two engines share the steppers:

  schrodinger       i hbar dpsi/dt = H psi
  pre-schrodinger   i hbar dpsi/dt = H psi - Q[|psi|^2] psi

with H = -(hbar^2/2) m^{ii} d_i^2 + V.  The nonlinear -Q term enters the
splitting as a diagonal phase recomputed from the current density at each
potential substep, which keeps both engines exactly norm-preserving and
homogeneous of degree one.

Integrators: split-step spectral (periodic grids) and Crank-Nicolson
(Cayley form, unconditionally stable; 2D via Strang-ordered alternating
direction sweeps, each sweep a unitary Cayley factor).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from . import madelung
from .errors import (ConfigError, ConjugatePointError, HorizonError,
                     PreCausticError, ShootingError, StabilityError,
                     StructuralError)
from .grids import (DIRICHLET, PERIODIC, Grid, MassMatrix, WaveField,
                    gradient, laplacian)
from .madelung import FlowField, polar_decompose
from .potentials import HARMONIC, PotentialSpec
from .trajectories import TrajectorySet, integrate_bohmian

SCHRODINGER = "schrodinger"
PRE_SCHRODINGER = "pre-schrodinger"
SPLIT_STEP = "split-step"
CRANK_NICOLSON = "crank-nicolson"


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    t_final: float
    mass: MassMatrix
    engine: str = SCHRODINGER
    integrator: str = SPLIT_STEP
    hbar: float = 1.0
    snapshot_stride: int = 1
    eps_node_rel: float = 1e-12    # analysis node threshold relative to max rho
    q_amp_floor_rel: float = 1e-14  # engine amplitude floor for Q evaluation
    sig_node_rel: float = 1e-6     # amplitude above which a near-zero neighbour is "real"
    blowup_factor: float = 1e3
    phase_cap: float = np.pi       # max potential phase per split step
    force_q_zero: bool = False     # pre-schrodinger with the nonlinearity switched off

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.t_final < 0:
            raise ConfigError("t_final must be nonnegative")
        if self.hbar <= 0:
            raise ConfigError("hbar must be positive")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        if self.engine not in (SCHRODINGER, PRE_SCHRODINGER):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.integrator not in (SPLIT_STEP, CRANK_NICOLSON):
            raise ConfigError(f"unknown integrator {self.integrator!r}")


# --------------------------------------------------------------------------
# quantum potential evaluation inside the engines

def _spectral_laplacian(amp: np.ndarray, grid: Grid, mass: MassMatrix) -> np.ndarray:
    ks = [2 * np.pi * np.fft.fftfreq(grid.n[d], d=grid.h[d]) for d in range(grid.dim)]
    kmesh = np.meshgrid(*ks, indexing="ij")
    k2m = sum(mass.inv_diag[d] * kmesh[d] ** 2 for d in range(grid.dim))
    return np.fft.ifftn(-k2m * np.fft.fftn(amp)).real


def _binomial_smooth(amp: np.ndarray, grid: Grid) -> np.ndarray:
    """One 3-point binomial pass per axis: transfer (1 + cos kh)/2.

    Blinds the Q evaluation to the unresolved grid-scale band.  Without this
    the nonlinear engine feeds grid-scale density ripples back with inverted
    dispersion and they grow; with it the unresolved band evolves under the
    plain linear equation (neutrally stable) while resolved scales change
    only at O(h^2), the order of the scheme.
    """
    out = amp
    for d in range(grid.dim):
        if grid.periodic:
            out = 0.25 * (np.roll(out, 1, d) + 2 * out + np.roll(out, -1, d))
        else:
            sm = out.copy()
            ctr = [slice(None)] * grid.dim
            ctr[d] = slice(1, -1)
            up = [slice(None)] * grid.dim
            up[d] = slice(2, None)
            dn = [slice(None)] * grid.dim
            dn[d] = slice(0, -2)
            sm[tuple(ctr)] = 0.25 * (out[tuple(dn)] + 2 * out[tuple(ctr)] + out[tuple(up)])
            out = sm
    return out


def _q_field(values: np.ndarray, grid: Grid, cfg: EvolutionConfig,
             time: float, spectral: bool = False) -> np.ndarray:
    """Q[|psi|^2] with node handling.

    The Laplacian must match the integrator's kinetic discretization
    (spectral under split-step, stencil under Crank-Nicolson): otherwise the
    dispersion cancellation fails at high k and grid-scale ripples grow.

    The denominator amplitude is floored at q_amp_floor_rel * max|psi| so Q
    rolls off smoothly in negligible-density regions instead of jumping to
    zero (a hard cutoff builds a phase kink that destabilizes the run).
    A near-zero point adjacent to significant density is a genuine node
    inside the support: the flow description has broken down there and
    PreCausticError is raised.
    """
    amp = np.abs(values)
    amax = float(amp.max())
    if amax == 0.0:
        raise PreCausticError("field vanished", time=time)
    floor = cfg.q_amp_floor_rel * amax
    amp_s = _binomial_smooth(amp, grid)
    if spectral:
        lap = _spectral_laplacian(amp_s, grid, cfg.mass)
    else:
        lap = laplacian(amp_s, grid, cfg.mass)
    q = -(cfg.hbar**2 / 2.0) * lap / np.maximum(amp_s, floor)
    tiny = amp < floor
    if tiny.any():
        sig = amp >= cfg.sig_node_rel * amax
        hit = madelung._dilate(tiny, grid) & sig
        if not grid.periodic:
            # dirichlet walls are pinned zeros, not interior nodes
            for d in range(grid.dim):
                for edge in (slice(0, 2), slice(-2, None)):
                    sl = [slice(None)] * grid.dim
                    sl[d] = edge
                    hit[tuple(sl)] = False
        if hit.any():
            raise PreCausticError("node inside the density support during Q evaluation",
                                  time=time)
    return q


# --------------------------------------------------------------------------
# steppers

class _SplitStepEngine:
    def __init__(self, grid: Grid, potential: PotentialSpec, cfg: EvolutionConfig,
                 v_int=None):
        if not grid.periodic:
            raise ConfigError("split-step integrator requires a periodic grid")
        self.grid, self.cfg = grid, cfg
        self.v_static = potential.values(grid)
        self.v_int = v_int  # optional callable t -> array added to V
        ks = [2 * np.pi * np.fft.fftfreq(grid.n[d], d=grid.h[d]) for d in range(grid.dim)]
        kmesh = np.meshgrid(*ks, indexing="ij")
        k2m = sum(cfg.mass.inv_diag[d] * kmesh[d] ** 2 for d in range(grid.dim))
        self.kin_phase = np.exp(-0.5j * cfg.hbar * k2m * cfg.dt)
        self._check_stability(self.v_static)

    def _check_stability(self, v):
        phase = self.cfg.dt * float(np.max(np.abs(v))) / self.cfg.hbar
        if phase > self.cfg.phase_cap:
            raise StabilityError(
                f"split-step potential phase {phase:.3g} per step exceeds the cap "
                f"{self.cfg.phase_cap:.3g}; reduce dt")

    def _veff(self, values, time):
        v = self.v_static
        if self.v_int is not None:
            v = v + self.v_int(time)
        if self.cfg.engine == PRE_SCHRODINGER and not self.cfg.force_q_zero:
            v = v - _q_field(values, self.grid, self.cfg, time, spectral=True)
        return v

    def step(self, values: np.ndarray, time: float) -> np.ndarray:
        cfg = self.cfg
        half = -0.5j * cfg.dt / cfg.hbar
        psi = values * np.exp(half * self._veff(values, time))
        psi = np.fft.ifftn(self.kin_phase * np.fft.fftn(psi))
        psi = psi * np.exp(half * self._veff(psi, time + cfg.dt))
        return psi


def _thomas_factor(diag, off_lo, off_hi):
    """Banded matrix layout for scipy.solve_banded (tridiagonal)."""
    n = diag.shape[0]
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = off_hi
    ab[1] = diag
    ab[2, :-1] = off_lo
    return ab


def _thomas_lines(a, b, c, d):
    """Vectorized Thomas solve of many independent tridiagonal systems.

    a, b, c: (n, L) sub/main/super diagonals (a[0] and c[-1] ignored);
    d: (n, L) right-hand sides.  Returns x with the same shape.
    """
    n = b.shape[0]
    cp = np.empty_like(c)
    dp = np.empty_like(d)
    cp[0] = c[0] / b[0]
    dp[0] = d[0] / b[0]
    for i in range(1, n):
        denom = b[i] - a[i] * cp[i - 1]
        cp[i] = c[i] / denom
        dp[i] = (d[i] - a[i] * dp[i - 1]) / denom
    x = np.empty_like(d)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


class _CrankNicolsonEngine:
    """Cayley-form Crank-Nicolson; 2D via Strang ADI (x half, y full, x half)."""

    def __init__(self, grid: Grid, potential: PotentialSpec, cfg: EvolutionConfig,
                 v_int=None):
        if grid.dim == 2 and grid.periodic:
            raise ConfigError("crank-nicolson on 2D periodic grids is not supported; "
                              "use the split-step integrator there")
        self.grid, self.cfg = grid, cfg
        self.v_static = potential.values(grid)
        self.v_int = v_int
        self._time_dependent = v_int is not None
        self._nonlinear = cfg.engine == PRE_SCHRODINGER and not cfg.force_q_zero

    # -- 1D ----------------------------------------------------------------
    def _h_apply_1d(self, psi, veff):
        g, cfg = self.grid, self.cfg
        coef = -0.5 * cfg.hbar**2 * cfg.mass.inv_diag[0] / g.h[0] ** 2
        if g.periodic:
            lap = np.roll(psi, -1) - 2 * psi + np.roll(psi, 1)
        else:
            lap = np.zeros_like(psi)
            lap[1:-1] = psi[2:] - 2 * psi[1:-1] + psi[:-2]
            # dirichlet-zero: boundary values are pinned, rows stay identity
        return coef * lap + veff * psi

    def _step_1d(self, psi, veff, tau):
        g, cfg = self.grid, self.cfg
        alpha = 1j * tau / (2 * cfg.hbar)
        coef = -0.5 * cfg.hbar**2 * cfg.mass.inv_diag[0] / g.h[0] ** 2
        rhs = psi - alpha * self._h_apply_1d(psi, veff)
        n = g.n[0]
        if g.periodic:
            diag = 1 + alpha * (-2 * coef + veff)
            off = alpha * coef * np.ones(n - 1, dtype=complex)
            w = alpha * coef  # cyclic corner entries
            # Sherman-Morrison: A = T + u v^T with u = (w,0,..,0,w), v = (1,0,..,0,1)
            dmod = diag.astype(complex).copy()
            dmod[0] -= w
            dmod[-1] -= w
            ab = _thomas_factor(dmod, off, off)
            u = np.zeros(n, dtype=complex)
            u[0] = w
            u[-1] = w
            y = solve_banded((1, 1), ab, np.column_stack([rhs, u]))
            ysol, q = y[:, 0], y[:, 1]
            vy = ysol[0] + ysol[-1]
            vq = q[0] + q[-1]
            return ysol - q * vy / (1 + vq)
        diag = np.ones(n, dtype=complex)
        diag[1:-1] = 1 + alpha * (-2 * coef + veff[1:-1])
        off_lo = np.zeros(n - 1, dtype=complex)
        off_hi = np.zeros(n - 1, dtype=complex)
        off_lo[:-1] = alpha * coef   # rows 1..n-2, coupling to the left
        off_hi[1:] = alpha * coef    # rows 1..n-2, coupling to the right
        rhs = rhs.copy()
        rhs[0] = 0.0
        rhs[-1] = 0.0
        ab = _thomas_factor(diag, off_lo, off_hi)
        return solve_banded((1, 1), ab, rhs)

    # -- 2D ADI sweeps -------------------------------------------------------
    def _sweep(self, psi, veff_half, tau, axis):
        """Unitary Cayley step of H_axis = kinetic_axis + veff_half along one axis."""
        g, cfg = self.grid, self.cfg
        alpha = 1j * tau / (2 * cfg.hbar)
        coef = -0.5 * cfg.hbar**2 * cfg.mass.inv_diag[axis] / g.h[axis] ** 2
        work = psi if axis == 0 else psi.T
        vh = veff_half if axis == 0 else veff_half.T
        n = work.shape[0]
        lap = np.zeros_like(work)
        lap[1:-1] = work[2:] - 2 * work[1:-1] + work[:-2]
        rhs = work - alpha * (coef * lap + vh * work)
        a = np.zeros_like(work)
        b = np.ones_like(work)
        c = np.zeros_like(work)
        b[1:-1] = 1 + alpha * (-2 * coef + vh[1:-1])
        a[1:-1] = alpha * coef
        c[1:-1] = alpha * coef
        rhs = rhs.copy()
        rhs[0] = 0.0
        rhs[-1] = 0.0
        out = _thomas_lines(a, b, c, rhs)
        return out if axis == 0 else out.T

    def step(self, values: np.ndarray, time: float) -> np.ndarray:
        cfg = self.cfg
        veff = self.v_static
        if self.v_int is not None:
            veff = veff + self.v_int(time + 0.5 * cfg.dt)
        if self._nonlinear:
            veff = veff - _q_field(values, self.grid, cfg, time)
        if self.grid.dim == 1:
            return self._step_1d(values, veff, cfg.dt)
        half = 0.5 * veff
        psi = self._sweep(values, half, 0.5 * cfg.dt, axis=0)
        psi = self._sweep(psi, half, cfg.dt, axis=1)
        psi = self._sweep(psi, half, 0.5 * cfg.dt, axis=0)
        return psi


def _build_engine(grid: Grid, potential: PotentialSpec, cfg: EvolutionConfig,
                  v_int=None):
    if cfg.integrator == SPLIT_STEP:
        return _SplitStepEngine(grid, potential, cfg, v_int)
    return _CrankNicolsonEngine(grid, potential, cfg, v_int)


def step_schrodinger(psi: WaveField, potential: PotentialSpec,
                     cfg: EvolutionConfig) -> WaveField:
    """Advance one linear step of size cfg.dt."""
    if cfg.engine != SCHRODINGER:
        raise ConfigError("cfg.engine must be 'schrodinger'")
    eng = _build_engine(psi.grid, potential, cfg)
    return WaveField(psi.grid, eng.step(psi.values, psi.time), psi.time + cfg.dt)


def step_pre_schrodinger(psi: WaveField, potential: PotentialSpec,
                         cfg: EvolutionConfig) -> WaveField:
    """Advance one nonlinear (Q-subtracted) step of size cfg.dt."""
    if cfg.engine != PRE_SCHRODINGER:
        raise ConfigError("cfg.engine must be 'pre-schrodinger'")
    eng = _build_engine(psi.grid, potential, cfg)
    return WaveField(psi.grid, eng.step(psi.values, psi.time), psi.time + cfg.dt)


# --------------------------------------------------------------------------
# run container

@dataclass
class WaveRun:
    grid: Grid
    cfg: EvolutionConfig
    potential: PotentialSpec
    times: np.ndarray
    psis: np.ndarray                  # (T, *spatial) complex
    stopped_early: bool = False
    stop_reason: str | None = None
    stop_time: float | None = None

    def __post_init__(self):
        self._flows: dict[int, FlowField] = {}

    def __len__(self):
        return len(self.times)

    def field(self, k: int) -> WaveField:
        return WaveField(self.grid, self.psis[k], float(self.times[k]))

    def flow(self, k: int) -> FlowField:
        if k < 0:
            k += len(self.times)
        if k not in self._flows:
            self._flows[k] = polar_decompose(
                self.field(k), self.cfg.mass, self.cfg.hbar,
                eps_node=self.cfg.eps_node_rel * float(np.max(np.abs(self.psis[k]) ** 2)))
        return self._flows[k]


def evolve(psi0: WaveField, potential: PotentialSpec, cfg: EvolutionConfig,
           v_int=None) -> WaveRun:
    """Run the configured engine, keeping one snapshot per snapshot_stride steps.

    A nonlinear breakdown (node/blow-up, i.e. a caustic forming) truncates
    the run and sets stop_reason instead of raising.
    """
    engine = _build_engine(psi0.grid, potential, cfg, v_int)
    n_steps = int(round(cfg.t_final / cfg.dt))
    rho0_max = float(np.max(np.abs(psi0.values) ** 2))
    times = [psi0.time]
    snaps = [psi0.values.copy()]
    psi = psi0.values
    stopped, reason, stop_t = False, None, None
    for step in range(1, n_steps + 1):
        t = psi0.time + (step - 1) * cfg.dt
        try:
            psi = engine.step(psi, t)
        except PreCausticError as err:
            stopped, reason, stop_t = True, str(err), t
            break
        rho_max = float(np.max(np.abs(psi) ** 2))
        if rho_max > cfg.blowup_factor * rho0_max:
            stopped = True
            reason = f"density grew by more than x{cfg.blowup_factor:g}"
            stop_t = t + cfg.dt
            times.append(stop_t)
            snaps.append(psi.copy())
            break
        if step % cfg.snapshot_stride == 0 or step == n_steps:
            times.append(psi0.time + step * cfg.dt)
            snaps.append(psi.copy())
    return WaveRun(psi0.grid, cfg, potential, np.array(times), np.array(snaps),
                   stopped, reason, stop_t)


def generator(values: np.ndarray, grid: Grid, potential: PotentialSpec,
              cfg: EvolutionConfig, masked_q: bool = False) -> np.ndarray:
    """Discrete right-hand side Omega(psi) = dpsi/dt of the configured engine.

    Uses the grid stencils throughout, so the 2D operator splits exactly into
    1D parts on product states.  With masked_q=False the quantum potential is
    evaluated by the raw ratio (valid for strictly node-free fields).
    """
    v = potential.values(grid)
    h_psi = -0.5 * cfg.hbar**2 * laplacian(values, grid, cfg.mass) + v * values
    if cfg.engine == PRE_SCHRODINGER and not cfg.force_q_zero:
        if masked_q:
            q = _q_field(values, grid, cfg, 0.0)
        else:
            amp = np.abs(values)
            q = -(cfg.hbar**2 / 2.0) * laplacian(amp, grid, cfg.mass) / amp
        h_psi = h_psi - q * values
    return h_psi / (1j * cfg.hbar)


def energy_expectation(psi: WaveField, potential: PotentialSpec,
                       cfg: EvolutionConfig) -> float:
    """<psi|H|psi> with spectral kinetic energy on periodic grids."""
    g = psi.grid
    v = potential.values(g)
    if g.periodic:
        ks = [2 * np.pi * np.fft.fftfreq(g.n[d], d=g.h[d]) for d in range(g.dim)]
        kmesh = np.meshgrid(*ks, indexing="ij")
        k2m = sum(cfg.mass.inv_diag[d] * kmesh[d] ** 2 for d in range(g.dim))
        psik = np.fft.fftn(psi.values)
        kin = 0.5 * cfg.hbar**2 * np.sum(k2m * np.abs(psik) ** 2) / np.prod(g.n) * g.cell_volume
    else:
        lap = laplacian(psi.values, g, cfg.mass)
        kin = -0.5 * cfg.hbar**2 * g.integrate(np.conj(psi.values) * lap).real
    pot = g.integrate(v * psi.density()).real
    return float(kin + pot)


# --------------------------------------------------------------------------
# classical Hamiltonian flow

def classical_flow(q0, p0, potential: PotentialSpec, mass: MassMatrix,
                   t_final: float, dt: float, grid: Grid | None = None) -> TrajectorySet:
    """Velocity-Verlet integration of dq/dt = m^{ii} p_i, dp/dt = -dV/dq.

    Leaving a dirichlet domain truncates the trajectory and flags the result.
    """
    q = np.atleast_2d(np.asarray(q0, dtype=float)).copy()
    p = np.atleast_2d(np.asarray(p0, dtype=float)).copy()
    dim = q.shape[1]
    inv = np.asarray(mass.inv_diag)
    n_steps = int(round(t_final / dt))
    times = [0.0]
    traj = [q.copy()]
    truncated = False
    grad_v = potential.gradient_at(q, dim, grid)
    for step in range(n_steps):
        q_new = q + dt * inv * p - 0.5 * dt**2 * inv * grad_v
        grad_new = potential.gradient_at(q_new, dim, grid)
        p = p - 0.5 * dt * (grad_v + grad_new)
        q, grad_v = q_new, grad_new
        if grid is not None and not grid.periodic and not np.all(grid.contains(q)):
            truncated = True
            break
        times.append((step + 1) * dt)
        traj.append(q.copy())
    positions = np.stack(traj, axis=1)  # (walkers, T, dim)
    return TrajectorySet(kind="classical", times=np.array(times),
                         positions=positions, truncated=truncated)


def classical_energy(q, p, potential: PotentialSpec, mass: MassMatrix) -> np.ndarray:
    q = np.atleast_2d(np.asarray(q, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    inv = np.asarray(mass.inv_diag)
    return 0.5 * np.sum(inv * p**2, axis=1) + potential.value_at(q, q.shape[1])


# --------------------------------------------------------------------------
# caustic detection

@dataclass
class CausticReport:
    detected: bool
    t_caustic: float | None = None
    indicator: str | None = None        # flow-map-jacobian | density-blowup
    location: tuple | None = None


def _char_starts(flow: FlowField, spacing: int, rho_floor: float = 1e-4):
    """Characteristic seeds where the flow is well resolved.

    Caustics of the probability flow matter where there is probability;
    the far tails (and the one-sided stencil rows at dirichlet walls) carry
    velocity noise that would fake early Jacobian collapse.
    """
    g = flow.grid
    ok = (~flow.node_mask) & (flow.rho >= rho_floor * float(flow.rho.max()))
    if not g.periodic:
        for d in range(g.dim):
            for edge in (slice(0, 2), slice(-2, None)):
                sl = [slice(None)] * g.dim
                sl[d] = edge
                ok[tuple(sl)] = False
    if g.dim == 1:
        idx = np.arange(0, g.n[0], spacing)
        idx = idx[ok[idx]]
        if len(idx) < 3:
            raise StructuralError("too few valid characteristic starts")
        q0 = g.axes[0][idx][:, None]
        v0 = flow.v[0][idx][:, None]
        return q0, v0, (len(idx),)
    ix = np.arange(0, g.n[0], spacing)
    iy = np.arange(0, g.n[1], spacing)
    gx, gy = np.meshgrid(ix, iy, indexing="ij")
    keep = ok[gx, gy]
    # keep the largest rectangular block where everything is valid
    rows = np.where(keep.any(axis=1))[0]
    cols = np.where(keep.any(axis=0))[0]
    if len(rows) < 3 or len(cols) < 3:
        raise StructuralError("too few valid characteristic starts")
    gx, gy = gx[np.ix_(rows, cols)], gy[np.ix_(rows, cols)]
    q0 = np.stack([flow.grid.axes[0][gx], flow.grid.axes[1][gy]], axis=-1)
    v0 = np.nan_to_num(np.stack([flow.v[0][gx, gy], flow.v[1][gx, gy]], axis=-1))
    return q0.reshape(-1, 2), v0.reshape(-1, 2), gx.shape


def _jacobian_min(q, shape, x0_axes):
    """Smallest |det| of the flow map's finite-difference Jacobian."""
    if len(shape) == 1:
        j = np.gradient(q[:, 0], x0_axes[0])
        return float(np.min(np.abs(j))), int(np.argmin(np.abs(j)))
    qs = q.reshape(shape + (2,))
    dx = np.gradient(qs, x0_axes[0], axis=0)
    dy = np.gradient(qs, x0_axes[1], axis=1)
    det = dx[..., 0] * dy[..., 1] - dx[..., 1] * dy[..., 0]
    flat = np.argmin(np.abs(det))
    return float(np.min(np.abs(det))), int(flat)


def detect_caustic(run: WaveRun, j_min: float = 1e-3, blowup_factor: float = 1e3,
                   horizon: float | None = None, spacing: int = 4,
                   dt: float | None = None) -> CausticReport:
    """First breakdown time of the Lagrangian flow started from the run's t=0 state.

    A bundle of classical characteristics is integrated from the initial
    velocity field; the first time the finite-difference flow-map Jacobian
    determinant drops below j_min is the caustic.  Density blow-up across the
    stored snapshots is the fallback indicator; the earliest one wins.
    """
    if len(run) < 3:
        raise StructuralError("need at least 3 snapshots")
    flow0 = run.flow(0)
    horizon = horizon if horizon is not None else float(run.cfg.t_final)
    dt = dt if dt is not None else max(horizon / 2000.0, run.cfg.dt)
    q0, v0, shape = _char_starts(flow0, spacing)
    p0 = np.asarray(run.cfg.mass.mass_diag) * v0
    if len(shape) == 1:
        x0_axes = (q0[:, 0],)
    else:
        x0_axes = (q0.reshape(shape + (2,))[:, 0, 0], q0.reshape(shape + (2,))[0, :, 1])

    inv = np.asarray(run.cfg.mass.inv_diag)
    q, p = q0.copy(), p0.copy()
    grad_v = run.potential.gradient_at(q, q.shape[1], run.grid)
    t_jac = None
    loc = None
    n_steps = int(np.ceil(horizon / dt))
    for step in range(n_steps):
        q_new = q + dt * inv * p - 0.5 * dt**2 * inv * grad_v
        grad_new = run.potential.gradient_at(q_new, q.shape[1], run.grid)
        p = p - 0.5 * dt * (grad_v + grad_new)
        q, grad_v = q_new, grad_new
        jmin, arg = _jacobian_min(q, shape, x0_axes)
        if jmin < j_min:
            t_jac = (step + 1) * dt
            loc = tuple(np.atleast_1d(q[arg]))
            break

    t_blow = None
    rho0 = float(np.max(np.abs(run.psis[0]) ** 2))
    for k in range(len(run)):
        if float(np.max(np.abs(run.psis[k]) ** 2)) > blowup_factor * rho0:
            t_blow = float(run.times[k])
            break
    if t_blow is None and run.stopped_early:
        t_blow = run.stop_time

    candidates = [(t, ind) for t, ind in
                  ((t_jac, "flow-map-jacobian"), (t_blow, "density-blowup"))
                  if t is not None]
    if not candidates:
        return CausticReport(detected=False)
    t_c, ind = min(candidates)
    return CausticReport(detected=True, t_caustic=float(t_c), indicator=ind,
                         location=loc if ind == "flow-map-jacobian" else None)


# --------------------------------------------------------------------------
# Theorem-1 style equivalence check

@dataclass
class EquivalenceReport:
    max_deviation: float
    t_horizon: float
    times: np.ndarray
    q_guided: np.ndarray
    q_classical: np.ndarray
    caustic: CausticReport


def local_phase_gradient(psi: WaveField, q0, hbar: float) -> np.ndarray:
    """Momentum covector dS at q0 from a 3-point phase stencil around the nearest node."""
    g = psi.grid
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    idx = tuple(int(round((q0[d] - g.lo[d]) / g.h[d])) % g.n[d] if g.periodic
                else min(max(int(round((q0[d] - g.lo[d]) / g.h[d])), 1), g.n[d] - 2)
                for d in range(g.dim))
    p = np.zeros(g.dim)
    for d in range(g.dim):
        up = list(idx)
        dn = list(idx)
        up[d] = (idx[d] + 1) % g.n[d] if g.periodic else idx[d] + 1
        dn[d] = (idx[d] - 1) % g.n[d] if g.periodic else idx[d] - 1
        ratio = psi.values[tuple(up)] / psi.values[tuple(dn)]
        p[d] = hbar * np.angle(ratio) / (2 * g.h[d])
    return p


def equivalence_check(psi0: WaveField, q0, potential: PotentialSpec,
                      cfg: EvolutionConfig, caustic_kwargs: dict | None = None
                      ) -> EquivalenceReport:
    """Guided trajectory on the nonlinear run vs. Hamiltonian flow from dS(q0).

    Both start at q0; the comparison stops at min(t_final, detected caustic).
    """
    if cfg.engine != PRE_SCHRODINGER:
        cfg = replace(cfg, engine=PRE_SCHRODINGER)
    run = evolve(psi0, potential, cfg)
    caustic = detect_caustic(run, **(caustic_kwargs or {}))
    t_horizon = float(cfg.t_final)
    if caustic.detected:
        t_horizon = min(t_horizon, caustic.t_caustic)
    if run.stopped_early:
        t_horizon = min(t_horizon, run.stop_time)
    sel = run.times <= t_horizon + 1e-12
    if sel.sum() < 2:
        raise HorizonError(f"caustic at t={t_horizon:g} leaves no comparison window")

    guided = integrate_bohmian(run, np.atleast_2d(q0), t_stop=t_horizon)
    p0 = local_phase_gradient(psi0, q0, cfg.hbar)
    cl = classical_flow(q0, p0, potential, cfg.mass, guided.times[-1], cfg.dt,
                        grid=None)
    # sample the classical path at the guided checkpoint times
    qc = np.empty_like(guided.positions[0])
    for d in range(qc.shape[1]):
        qc[:, d] = np.interp(guided.times, cl.times, cl.positions[0, :, d])
    dev = float(np.max(np.linalg.norm(guided.positions[0] - qc, axis=1)))
    return EquivalenceReport(dev, t_horizon, guided.times, guided.positions[0],
                             qc, caustic)


# --------------------------------------------------------------------------
# two-point action

def _shoot(q0, p0, potential, mass, t0, t1, dt):
    n = max(int(round((t1 - t0) / dt)), 2)
    tr = classical_flow(q0, p0, potential, mass, t1 - t0, (t1 - t0) / n)
    return tr


def two_point_action(q0, t0, q1, t1, potential: PotentialSpec, mass: MassMatrix,
                     dt: float | None = None, tol: float = 1e-10,
                     max_iter: int = 50) -> float:
    """Action of the classical path between (q0,t0) and (q1,t1) by shooting.

    Damped Newton on the endpoint mismatch; trapezoid quadrature of the
    Lagrangian along the converged trajectory.
    """
    if t1 <= t0:
        raise StructuralError("t1 must exceed t0")
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    q1 = np.atleast_1d(np.asarray(q1, dtype=float))
    dim = q0.shape[0]
    big_t = t1 - t0
    if potential.kind == HARMONIC:
        for om in potential.omega:
            if big_t >= np.pi / om:
                raise ConjugatePointError(
                    f"window {big_t:g} >= pi/omega hits a conjugate point")
    dt = dt if dt is not None else big_t / 2000.0
    mdiag = np.asarray(mass.mass_diag)
    p = mdiag * (q1 - q0) / big_t  # free-flight initial guess

    def endpoint(pv):
        tr = _shoot(q0, pv, potential, mass, t0, t1, dt)
        return tr.positions[0, -1] - q1, tr

    miss, tr = endpoint(p)
    for _ in range(max_iter):
        if np.max(np.abs(miss)) < tol:
            break
        # finite-difference Jacobian d(endpoint)/d(p0)
        jac = np.empty((dim, dim))
        dp = 1e-6 * (1 + np.abs(p))
        for d in range(dim):
            pp = p.copy()
            pp[d] += dp[d]
            m2, _ = endpoint(pp)
            jac[:, d] = (m2 - miss) / dp[d]
        try:
            step = np.linalg.solve(jac, -miss)
        except np.linalg.LinAlgError:
            raise ShootingError("singular shooting Jacobian (conjugate point?)")
        lam = 1.0
        for _ in range(30):
            cand = p + lam * step
            miss_new, tr_new = endpoint(cand)
            if np.linalg.norm(miss_new) < np.linalg.norm(miss):
                p, miss, tr = cand, miss_new, tr_new
                break
            lam *= 0.5
        else:
            raise ShootingError("damped Newton stalled")
    else:
        raise ShootingError(f"no classical path found in {max_iter} iterations "
                            f"(endpoint miss {np.max(np.abs(miss)):.3g})")

    q = tr.positions[0]
    ts = tr.times
    qdot = np.gradient(q, ts, axis=0)
    lag = 0.5 * np.sum(mdiag * qdot**2, axis=1) - potential.value_at(q, dim)
    return float(np.trapezoid(lag, ts))


def action_hj_residual(q0, t0, q1, t1, potential: PotentialSpec, mass: MassMatrix,
                       delta_q: float = 1e-4, delta_t: float = 1e-4,
                       dt: float | None = None) -> float:
    """|d_t S + m^{ii}(d_q S)^2/2 + V| at (q1,t1) by central differences of the action."""
    q1 = np.atleast_1d(np.asarray(q1, dtype=float))
    s_at = lambda qq, tt: two_point_action(q0, t0, qq, tt, potential, mass, dt=dt)
    dim = q1.shape[0]
    ds_dq = np.empty(dim)
    for d in range(dim):
        e = np.zeros(dim)
        e[d] = delta_q
        ds_dq[d] = (s_at(q1 + e, t1) - s_at(q1 - e, t1)) / (2 * delta_q)
    ds_dt = (s_at(q1, t1 + delta_t) - s_at(q1, t1 - delta_t)) / (2 * delta_t)
    inv = np.asarray(mass.inv_diag)
    ham = 0.5 * np.sum(inv * ds_dq**2) + float(potential.value_at(q1, dim)[0])
    return float(abs(ds_dt + ham))


# --------------------------------------------------------------------------
# residuals of the flow-variable equations of motion

CLASSICAL_HJ = "classical-hj"
QUANTUM_HJ = "quantum-hj"
CONTINUITY = "continuity"


def _advective(v: np.ndarray, grid: Grid) -> np.ndarray:
    """(v . grad) v, component-first."""
    out = np.zeros_like(v)
    for i in range(grid.dim):
        dvi = gradient(v[i], grid)
        for j in range(grid.dim):
            out[i] += v[j] * dvi[j]
    return out


def hj_residuals(run: WaveRun, mode: str, k: int = 0,
                 support_rel: float = 1e-6) -> float:
    """Max-norm residual of the requested flow equation at snapshot k.

    Time derivatives use the forward difference between snapshots k and k+1,
    so the contract is O(dt_snap + h^2).  The norm is taken off the node mask
    and above a relative density floor (far tails excluded, where the
    velocity field is defined but numerically meaningless).
    """
    if mode not in (CLASSICAL_HJ, QUANTUM_HJ, CONTINUITY):
        raise StructuralError(f"unknown residual mode {mode!r}")
    if k + 1 >= len(run):
        raise StructuralError("need two consecutive snapshots")
    f0, f1 = run.flow(k), run.flow(k + 1)
    dt = float(run.times[k + 1] - run.times[k])
    g = run.grid
    mask = f0.node_mask | f1.node_mask
    support = f0.rho >= support_rel * float(f0.rho.max())
    ok = (~mask) & support
    # keep one clear cell between the evaluation region and the mask
    ok &= ~madelung._dilate(mask, g)

    if mode == CONTINUITY:
        from .grids import divergence
        drho_dt = (f1.rho - f0.rho) / dt
        flux = np.where(ok[None], f0.v, 0.0) * f0.rho
        res = drho_dt + divergence(np.nan_to_num(flux), g)
        return float(np.max(np.abs(res[ok])))

    v0 = np.nan_to_num(f0.v)
    v1 = np.nan_to_num(f1.v)
    dv_dt = (v1 - v0) / dt
    adv = _advective(v0, g)
    vgrid = run.potential.values(g)
    if mode == QUANTUM_HJ:
        q = np.where(np.isfinite(f0.q_pot), f0.q_pot, 0.0)
        tot = vgrid + q
    else:
        tot = vgrid
    grad_tot = gradient(tot, g)
    res = np.zeros_like(v0)
    for d in range(g.dim):
        res[d] = dv_dt[d] + adv[d] + run.cfg.mass.inv_diag[d] * grad_tot[d]
    return float(max(np.max(np.abs(res[d][ok])) for d in range(g.dim)))
