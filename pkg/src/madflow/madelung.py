"""Flow-variable extraction from a wave field.

The polar decomposition psi = sqrt(rho) exp(iS/hbar) is never inverted
globally; the current velocity is read off locally as

    v^i = hbar m^{ii} Im(d_i psi / psi)

which equals m^{ii} d_i S wherever rho > 0 and stays single-valued around
nodes.  The osmotic velocity and quantum potential are

    u^i = (hbar/2) m^{ii} d_i ln(rho)
    Q   = -(hbar^2/2) lap_m sqrt(rho) / sqrt(rho)

with lap_m the mass-weighted Laplacian.  Points with rho below the node
threshold carry NaN in v, u, Q and are flagged in node_mask.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NodeProximityError, StructuralError
from .grids import (Grid, MassMatrix, WaveField, gradient,
                    interpolate, interpolation_corners_masked, laplacian)

DEFAULT_EPS_NODE_REL = 1e-12


@dataclass
class FlowField:
    """Madelung variables of one wave-field snapshot."""

    grid: Grid
    rho: np.ndarray
    v: np.ndarray          # (dim, *spatial), current velocity
    u: np.ndarray          # (dim, *spatial), osmotic velocity
    q_pot: np.ndarray
    node_mask: np.ndarray
    mass: MassMatrix
    hbar: float
    time: float = 0.0

    def drift(self) -> np.ndarray:
        """Forward drift b^i = v^i + u^i of the diffusion process."""
        return self.v + self.u


def node_mask_of(rho: np.ndarray, eps_node: float | None) -> np.ndarray:
    if eps_node is None:
        eps_node = DEFAULT_EPS_NODE_REL * float(rho.max())
    if eps_node <= 0:
        raise ContractError("eps_node must be positive")
    return rho < eps_node


def quantum_potential(rho: np.ndarray, grid: Grid, mass: MassMatrix, hbar: float,
                      node_mask: np.ndarray | None = None) -> np.ndarray:
    """Q = -(hbar^2/2) lap_m sqrt(rho)/sqrt(rho); NaN on masked points.

    Scale invariant: Q[c*rho] = Q[rho] for c > 0.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ContractError("rho must be nonnegative")
    if node_mask is None:
        node_mask = node_mask_of(rho, None)
    amp = np.sqrt(rho)
    lap = laplacian(amp, grid, mass)
    q = np.full(grid.shape, np.nan)
    off = ~node_mask
    q[off] = -(hbar**2 / 2.0) * lap[off] / amp[off]
    return q


def polar_decompose(psi: WaveField, mass: MassMatrix, hbar: float = 1.0,
                    eps_node: float | None = None,
                    norm_tol: float = 1e-6) -> FlowField:
    """Extract (rho, v, u, Q, node_mask) from a normalized wave field."""
    if mass.dim != psi.grid.dim:
        raise StructuralError("mass matrix dimension does not match the grid")
    if abs(psi.norm() - 1.0) > norm_tol:
        raise ContractError(f"wave field norm {psi.norm():.6g} deviates from 1 "
                            f"beyond tolerance {norm_tol:g}")
    grid = psi.grid
    rho = psi.density()
    mask = node_mask_of(rho, eps_node)
    off = ~mask

    dpsi = gradient(psi.values, grid)
    drho = gradient(rho, grid)
    v = np.full((grid.dim,) + grid.shape, np.nan)
    u = np.full((grid.dim,) + grid.shape, np.nan)
    for d in range(grid.dim):
        ratio = np.zeros(grid.shape, dtype=complex)
        ratio[off] = dpsi[d][off] / psi.values[off]
        v[d][off] = hbar * mass.inv_diag[d] * ratio.imag[off]
        u[d][off] = 0.5 * hbar * mass.inv_diag[d] * drho[d][off] / rho[off]

    q = quantum_potential(rho, grid, mass, hbar, node_mask=mask)
    return FlowField(grid, rho, v, u, q, mask, mass, hbar, psi.time)


def mass_norm_sq(vec: np.ndarray, mass: MassMatrix) -> np.ndarray:
    """Kinetic-energy norm |w|^2 = m_ii w^i w^i of a component-first field."""
    out = np.zeros(vec.shape[1:])
    for d, m in enumerate(mass.mass_diag):
        out += m * vec[d] ** 2
    return out


def densitized_q_identity_residual(flow: FlowField) -> float:
    """Max-norm residual of  Q rho = rho|u|^2/2 - (hbar^2/4) lap_m rho.

    Exact analytically; the discrete value is O(h^2) on smooth states.
    """
    off = ~flow.node_mask
    lhs = np.where(off, flow.q_pot * flow.rho, 0.0)
    u2 = mass_norm_sq(np.where(off, flow.u, 0.0), flow.mass)
    lap_rho = laplacian(flow.rho, flow.grid, flow.mass)
    rhs = 0.5 * flow.rho * u2 - 0.25 * flow.hbar**2 * lap_rho
    return float(np.max(np.abs(np.where(off, lhs - rhs, 0.0))))


def discrete_curl(flow: FlowField) -> np.ndarray:
    """2D scalar curl d_x v^y - d_y v^x; NaN wherever the stencil touches the mask."""
    if flow.grid.dim != 2:
        raise StructuralError("curl is defined for 2D flows only")
    v = np.where(flow.node_mask[None], 0.0, flow.v)
    dvy = gradient(v[1], flow.grid)[0]
    dvx = gradient(v[0], flow.grid)[1]
    curl = dvy - dvx
    curl[_dilate(flow.node_mask, flow.grid)] = np.nan
    return curl


def _dilate(mask: np.ndarray, grid: Grid) -> np.ndarray:
    out = mask.copy()
    for d in range(grid.dim):
        if grid.periodic:
            out |= np.roll(mask, 1, d) | np.roll(mask, -1, d)
        else:
            pad = np.zeros_like(mask)
            sl_lo = [slice(None)] * grid.dim
            sl_hi = [slice(None)] * grid.dim
            sl_lo[d] = slice(1, None)
            sl_hi[d] = slice(None, -1)
            pad[tuple(sl_lo)] |= mask[tuple(sl_hi)]
            pad[tuple(sl_hi)] |= mask[tuple(sl_lo)]
            out |= pad
    return out


def phase_line_integral(flow: FlowField, path: np.ndarray) -> float:
    """Trapezoid line integral of the momentum covector m_ij v^i dq^j along a polyline.

    For a closed path (first point repeated last) this is the circulation.
    Raises NodeProximityError if any vertex interpolates through masked cells.
    """
    path = np.atleast_2d(np.asarray(path, dtype=float))
    if path.shape[0] < 2:
        raise StructuralError("path needs at least two points")
    if path.shape[1] != flow.grid.dim:
        raise StructuralError("path dimensionality does not match the grid")
    if np.any(interpolation_corners_masked(_dilate(flow.node_mask, flow.grid),
                                           flow.grid, path)):
        raise NodeProximityError("path passes within one cell of a node")
    # covector components at the vertices
    p = np.empty_like(path)
    for d in range(flow.grid.dim):
        p[:, d] = flow.mass.mass_diag[d] * interpolate(flow.v[d], flow.grid, path)
    seg = np.diff(path, axis=0)
    mid = 0.5 * (p[:-1] + p[1:])
    return float(np.sum(mid * seg))


def circle_path(center: np.ndarray, radius: float, k: int = 256) -> np.ndarray:
    """Closed K-point circle (first vertex repeated at the end)."""
    th = np.linspace(0.0, 2 * np.pi, k + 1)
    return np.stack([center[0] + radius * np.cos(th),
                     center[1] + radius * np.sin(th)], axis=1)
