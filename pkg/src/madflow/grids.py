"""Uniform 1D/2D grids, field snapshots and the discrete operators shared by all solvers.

Conventions:
  - periodic grids exclude the right endpoint, h = (hi - lo) / n
  - dirichlet grids include both endpoints, h = (hi - lo) / (n - 1)
  - vector fields are stored component-first: shape (dim, *spatial)
  - the mass matrix is the inverse-mass quadratic form m^{ii} of the
    kinetic energy (1/2) m^{ij} p_i p_j, restricted to diagonal entries
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import OutOfDomainError, StructuralError

PERIODIC = "periodic"
DIRICHLET = "dirichlet"

_MAX_POINTS = 2**26  # 512MB of complex128, enough for any desk-scale run


@dataclass(frozen=True)
class Grid:
    """Uniform lattice on a box [lo, hi] per axis."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...]
    boundary: str = PERIODIC

    def __post_init__(self):
        if not 1 <= len(self.n) <= 2:
            raise StructuralError(f"grid dimension must be 1 or 2, got {len(self.n)}")
        if not (len(self.lo) == len(self.hi) == len(self.n)):
            raise StructuralError("lo, hi, n must have identical length")
        if self.boundary not in (PERIODIC, DIRICHLET):
            raise StructuralError(f"unknown boundary {self.boundary!r}")
        if any(nk < 16 for nk in self.n):
            raise StructuralError(f"need at least 16 points per axis, got {self.n}")
        if any(b <= a for a, b in zip(self.lo, self.hi)):
            raise StructuralError("each axis needs hi > lo")
        total = int(np.prod(self.n))
        if total > _MAX_POINTS:
            raise StructuralError(f"grid has {total} points, limit is {_MAX_POINTS}")

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @cached_property
    def h(self) -> tuple[float, ...]:
        if self.periodic:
            return tuple((b - a) / k for a, b, k in zip(self.lo, self.hi, self.n))
        return tuple((b - a) / (k - 1) for a, b, k in zip(self.lo, self.hi, self.n))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            self.lo[d] + self.h[d] * np.arange(self.n[d]) for d in range(self.dim)
        )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @cached_property
    def quadrature_weights(self) -> np.ndarray:
        """Pointwise weights so that integral = sum(w * f)."""
        w = np.ones(self.shape)
        if not self.periodic:
            for d in range(self.dim):
                sl = [slice(None)] * self.dim
                for edge in (0, -1):
                    sl[d] = edge
                    w[tuple(sl)] *= 0.5
        return w * self.cell_volume

    def integrate(self, values: np.ndarray) -> complex | float:
        """Trapezoid (dirichlet) / rectangle (periodic) quadrature over the box."""
        return (self.quadrature_weights * values).sum()

    def domain_size(self) -> float:
        return float(max(b - a for a, b in zip(self.lo, self.hi)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        ok = np.ones(pts.shape[0], dtype=bool)
        for d in range(self.dim):
            ok &= (pts[:, d] >= self.lo[d]) & (pts[:, d] <= self.hi[d])
        return ok


def mesh_from_center(half_width: float, n: int, dim: int = 1,
                     boundary: str = PERIODIC) -> Grid:
    """Convenience: symmetric box [-half_width, half_width]^dim."""
    return Grid((-half_width,) * dim, (half_width,) * dim, (n,) * dim, boundary)


@dataclass(frozen=True)
class MassMatrix:
    """Diagonal inverse-mass form m^{ii} (kinetic energy H = m^{ii} p_i^2 / 2 + V)."""

    inv_diag: tuple[float, ...]

    def __post_init__(self):
        if any(m <= 0 for m in self.inv_diag):
            raise StructuralError(f"inverse-mass entries must be positive: {self.inv_diag}")

    @staticmethod
    def isotropic(value: float = 1.0, dim: int = 1) -> "MassMatrix":
        return MassMatrix((value,) * dim)

    @property
    def dim(self) -> int:
        return len(self.inv_diag)

    @cached_property
    def mass_diag(self) -> tuple[float, ...]:
        """m_ii, the covariant metric entries (inverse of inv_diag)."""
        return tuple(1.0 / m for m in self.inv_diag)

    def lower(self, vec: np.ndarray) -> np.ndarray:
        """Map a velocity v^i (component-first) to the covector p_j = m_jj v^j."""
        out = np.array(vec, dtype=float, copy=True)
        for d, m in enumerate(self.mass_diag):
            out[d] *= m
        return out

    def raise_(self, cov: np.ndarray) -> np.ndarray:
        """Map a covector p_j to the velocity v^i = m^{ii} p_i."""
        out = np.array(cov, dtype=float, copy=True)
        for d, m in enumerate(self.inv_diag):
            out[d] *= m
        return out


@dataclass
class WaveField:
    """Complex field snapshot psi(q) on a grid at a fixed time."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise StructuralError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values.view(float))):
            raise StructuralError("wave field contains non-finite values")

    def norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2).real))

    def normalize(self) -> "WaveField":
        n = self.norm()
        if n == 0.0:
            raise StructuralError("cannot normalize the zero field")
        return WaveField(self.grid, self.values / n, self.time)

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2


def _check_field(values: np.ndarray, grid: Grid) -> np.ndarray:
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise StructuralError(
            f"field shape {values.shape} does not match grid {grid.shape}")
    return values


def _axis_derivative(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Second-order first derivative along one axis."""
    h = grid.h[axis]
    if grid.periodic:
        return (np.roll(values, -1, axis) - np.roll(values, 1, axis)) / (2 * h)
    out = np.empty_like(values)
    fwd = [slice(None)] * values.ndim

    def sl(idx):
        s = list(fwd)
        s[axis] = idx
        return tuple(s)

    out[sl(slice(1, -1))] = (values[sl(slice(2, None))] - values[sl(slice(0, -2))]) / (2 * h)
    # one-sided second-order stencils at the edges
    out[sl(0)] = (-3 * values[sl(0)] + 4 * values[sl(1)] - values[sl(2)]) / (2 * h)
    out[sl(-1)] = (3 * values[sl(-1)] - 4 * values[sl(-2)] + values[sl(-3)]) / (2 * h)
    return out


def gradient(values: np.ndarray, grid: Grid) -> np.ndarray:
    """All partial derivatives, stacked component-first: out[d] = d(values)/dq^d."""
    values = _check_field(values, grid)
    return np.stack([_axis_derivative(values, grid, d) for d in range(grid.dim)])


def _axis_second(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    h2 = grid.h[axis] ** 2
    if grid.periodic:
        return (np.roll(values, -1, axis) - 2 * values + np.roll(values, 1, axis)) / h2

    def sl(idx):
        s = [slice(None)] * values.ndim
        s[axis] = idx
        return tuple(s)

    out = np.empty_like(values)
    out[sl(slice(1, -1))] = (
        values[sl(slice(2, None))] - 2 * values[sl(slice(1, -1))] + values[sl(slice(0, -2))]
    ) / h2
    out[sl(0)] = (2 * values[sl(0)] - 5 * values[sl(1)] + 4 * values[sl(2)] - values[sl(3)]) / h2
    out[sl(-1)] = (2 * values[sl(-1)] - 5 * values[sl(-2)] + 4 * values[sl(-3)] - values[sl(-4)]) / h2
    return out


def laplacian(values: np.ndarray, grid: Grid, mass: MassMatrix | None = None) -> np.ndarray:
    """Mass-weighted Laplacian sum_i m^{ii} d^2/d(q^i)^2  (plain Laplacian for mass=None)."""
    values = _check_field(values, grid)
    if mass is not None and mass.dim != grid.dim:
        raise StructuralError(f"mass matrix dim {mass.dim} != grid dim {grid.dim}")
    weights = mass.inv_diag if mass is not None else (1.0,) * grid.dim
    out = np.zeros_like(values)
    for d, w in enumerate(weights):
        out += w * _axis_second(values, grid, d)
    return out


def divergence(vec: np.ndarray, grid: Grid) -> np.ndarray:
    """sum_i d(vec[i])/dq^i of a component-first vector field."""
    if vec.shape[0] != grid.dim:
        raise StructuralError("vector field must be component-first")
    out = np.zeros(grid.shape, dtype=vec.dtype)
    for d in range(grid.dim):
        out += _axis_derivative(vec[d], grid, d)
    return out


def _locate(points: np.ndarray, grid: Grid):
    """Cell indices and fractional offsets for a batch of points, with wrapping."""
    pts = np.array(points, dtype=float)
    idx = np.empty(pts.shape, dtype=np.int64)
    frac = np.empty(pts.shape)
    for d in range(grid.dim):
        x = pts[:, d]
        if grid.periodic:
            span = grid.hi[d] - grid.lo[d]
            x = np.mod(x - grid.lo[d], span) + grid.lo[d]
        t = (x - grid.lo[d]) / grid.h[d]
        i = np.floor(t).astype(np.int64)
        if grid.periodic:
            i = np.mod(i, grid.n[d])
        else:
            i = np.clip(i, 0, grid.n[d] - 2)
        idx[:, d] = i
        frac[:, d] = t - np.floor(t) if grid.periodic else (x - grid.lo[d]) / grid.h[d] - i
    return idx, frac


def interpolate(values: np.ndarray, grid: Grid, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation at one point or a batch of points.

    Periodic grids wrap the query; dirichlet grids require points inside the box.
    """
    values = _check_field(values, grid)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != grid.dim:
        raise StructuralError(f"points must have {grid.dim} coordinates")
    if not grid.periodic:
        inside = grid.contains(pts)
        if not np.all(inside):
            bad = pts[~inside][0]
            raise OutOfDomainError(f"point {tuple(bad)} outside dirichlet domain", point=tuple(bad))
    idx, frac = _locate(pts, grid)
    if grid.dim == 1:
        i = idx[:, 0]
        ip = (i + 1) % grid.n[0] if grid.periodic else np.minimum(i + 1, grid.n[0] - 1)
        t = frac[:, 0]
        out = values[i] * (1 - t) + values[ip] * t
    else:
        i, j = idx[:, 0], idx[:, 1]
        ip = (i + 1) % grid.n[0] if grid.periodic else np.minimum(i + 1, grid.n[0] - 1)
        jp = (j + 1) % grid.n[1] if grid.periodic else np.minimum(j + 1, grid.n[1] - 1)
        tx, ty = frac[:, 0], frac[:, 1]
        out = (values[i, j] * (1 - tx) * (1 - ty)
               + values[ip, j] * tx * (1 - ty)
               + values[i, jp] * (1 - tx) * ty
               + values[ip, jp] * tx * ty)
    if np.ndim(points) == 1:
        return out[0]
    return out


def interpolation_corners_masked(mask: np.ndarray, grid: Grid, points: np.ndarray) -> np.ndarray:
    """True where any corner of a point's interpolation cell is masked."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    idx, _ = _locate(pts, grid)
    if grid.dim == 1:
        i = idx[:, 0]
        ip = (i + 1) % grid.n[0] if grid.periodic else np.minimum(i + 1, grid.n[0] - 1)
        hit = mask[i] | mask[ip]
    else:
        i, j = idx[:, 0], idx[:, 1]
        ip = (i + 1) % grid.n[0] if grid.periodic else np.minimum(i + 1, grid.n[0] - 1)
        jp = (j + 1) % grid.n[1] if grid.periodic else np.minimum(j + 1, grid.n[1] - 1)
        hit = mask[i, j] | mask[ip, j] | mask[i, jp] | mask[ip, jp]
    if np.ndim(points) == 1:
        return hit[0]
    return hit
