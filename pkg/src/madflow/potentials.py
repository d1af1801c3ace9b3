"""Potential energy surfaces V(q) with analytic gradients for the classical integrator.

The harmonic kind is parametrized by the oscillation frequency per axis:
V = sum_i omega_i^2 q_i^2 / (2 m^{ii}), so a walker oscillates at exactly
omega_i whatever the mass matrix.  The barrier kind is a Gaussian bump
(differentiable everywhere, as the classical flow requires).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError
from .grids import Grid, MassMatrix, gradient, interpolate

FREE = "free"
HARMONIC = "harmonic"
BARRIER = "barrier"
DOUBLE_WELL = "double-well"
CUSTOM = "custom"


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = FREE
    omega: tuple[float, ...] = (1.0,)        # harmonic
    height: float = 1.0                      # barrier
    width: float = 1.0                       # barrier
    a: float = 1.0                           # double-well  V = a (x^2 - b^2)^2
    b: float = 1.0
    table: np.ndarray | None = None          # custom, matches the grid
    mass: MassMatrix | None = None           # needed by the harmonic convention

    def _inv_mass(self, dim: int) -> tuple[float, ...]:
        if self.mass is not None:
            return self.mass.inv_diag
        return (1.0,) * dim

    def values(self, grid: Grid) -> np.ndarray:
        mesh = grid.meshgrid()
        if self.kind == FREE:
            return np.zeros(grid.shape)
        if self.kind == HARMONIC:
            if len(self.omega) != grid.dim:
                raise StructuralError("harmonic potential needs one omega per axis")
            inv = self._inv_mass(grid.dim)
            out = np.zeros(grid.shape)
            for d in range(grid.dim):
                out += 0.5 * self.omega[d] ** 2 * mesh[d] ** 2 / inv[d]
            return out
        if self.kind == BARRIER:
            r2 = sum(x**2 for x in mesh)
            return self.height * np.exp(-r2 / (2 * self.width**2))
        if self.kind == DOUBLE_WELL:
            if grid.dim != 1:
                raise StructuralError("double-well potential is 1D")
            return self.a * (mesh[0] ** 2 - self.b**2) ** 2
        if self.kind == CUSTOM:
            if self.table is None or self.table.shape != grid.shape:
                raise StructuralError("custom potential table must match the grid")
            return np.asarray(self.table, dtype=float)
        raise StructuralError(f"unknown potential kind {self.kind!r}")

    def value_at(self, points: np.ndarray, dim: int) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == FREE:
            return np.zeros(pts.shape[0])
        if self.kind == HARMONIC:
            inv = self._inv_mass(dim)
            return sum(0.5 * self.omega[d] ** 2 * pts[:, d] ** 2 / inv[d]
                       for d in range(dim))
        if self.kind == BARRIER:
            r2 = np.sum(pts**2, axis=1)
            return self.height * np.exp(-r2 / (2 * self.width**2))
        if self.kind == DOUBLE_WELL:
            return self.a * (pts[:, 0] ** 2 - self.b**2) ** 2
        raise StructuralError(f"analytic value_at not available for {self.kind!r}")

    def gradient_at(self, points: np.ndarray, dim: int,
                    grid: Grid | None = None) -> np.ndarray:
        """dV/dq^j at a batch of points, shape (npts, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros_like(pts)
        if self.kind == FREE:
            return out
        if self.kind == HARMONIC:
            inv = self._inv_mass(dim)
            for d in range(dim):
                out[:, d] = self.omega[d] ** 2 * pts[:, d] / inv[d]
            return out
        if self.kind == BARRIER:
            r2 = np.sum(pts**2, axis=1)
            f = self.height * np.exp(-r2 / (2 * self.width**2))
            for d in range(dim):
                out[:, d] = -pts[:, d] / self.width**2 * f
            return out
        if self.kind == DOUBLE_WELL:
            out[:, 0] = 4 * self.a * pts[:, 0] * (pts[:, 0] ** 2 - self.b**2)
            return out
        if self.kind == CUSTOM:
            if grid is None:
                raise StructuralError("custom potential gradient needs the grid")
            dv = gradient(self.values(grid), grid)
            for d in range(dim):
                out[:, d] = interpolate(dv[d], grid, pts)
            return out
        raise StructuralError(f"unknown potential kind {self.kind!r}")


def harmonic(omega: float | tuple[float, ...], mass: MassMatrix | None = None) -> PotentialSpec:
    om = (omega,) if np.isscalar(omega) else tuple(omega)
    return PotentialSpec(kind=HARMONIC, omega=om, mass=mass)


def free() -> PotentialSpec:
    return PotentialSpec(kind=FREE)
