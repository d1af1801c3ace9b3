"""Initial wave-field constructors.

Width conventions: gaussian(width=sigma) has density std sigma, i.e.
psi ~ exp(-(x-c)^2 / (4 sigma^2)).  Plane waves are parametrized by the
wavenumber k (momentum hbar k); on periodic grids k must be commensurate
with the box.  vortex(m, w) builds (x+iy)^|m| (conjugated for m<0) under
a Gaussian envelope exp(-r^2/(2 w^2)), so rho ~ r^{2|m|} near the origin.
"""
from __future__ import annotations

import numpy as np
from scipy.special import eval_hermite, factorial

from .errors import ConfigError, StructuralError
from .grids import Grid, MassMatrix, WaveField


def gaussian(grid: Grid, center=0.0, width=1.0, momentum=0.0, hbar: float = 1.0,
             time: float = 0.0) -> WaveField:
    """Gaussian packet; on periodic grids the amplitude is periodized over
    neighbouring images and the momentum must be commensurate with the box
    (a seam discontinuity would seed grid-scale noise in nonlinear runs)."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    width = np.broadcast_to(np.atleast_1d(np.asarray(width, dtype=float)), (grid.dim,))
    momentum = np.broadcast_to(np.atleast_1d(np.asarray(momentum, dtype=float)), (grid.dim,))
    mesh = grid.meshgrid()
    psi = np.ones(grid.shape, dtype=complex)
    for d in range(grid.dim):
        x = mesh[d] - center[d]
        if grid.periodic:
            span = grid.hi[d] - grid.lo[d]
            if momentum[d] != 0.0:
                cycles = momentum[d] * span / (2 * np.pi * hbar)
                if abs(cycles - round(cycles)) > 1e-9:
                    raise ConfigError(
                        f"gaussian momentum {momentum[d]:g} not commensurate with the "
                        f"periodic box (needs p*L/(2 pi hbar) integer, got {cycles:.6g})")
            amp = sum(np.exp(-(x + j * span) ** 2 / (4 * width[d] ** 2))
                      for j in (-1, 0, 1))
        else:
            amp = np.exp(-x**2 / (4 * width[d] ** 2))
        psi = psi * amp * np.exp(1j * momentum[d] * mesh[d] / hbar)
    return WaveField(grid, psi, time).normalize()


def plane_wave(grid: Grid, k=1.0, time: float = 0.0) -> WaveField:
    """exp(i k.x); on a periodic box k is validated against 2*pi/L multiples."""
    kvec = np.broadcast_to(np.atleast_1d(np.asarray(k, dtype=float)), (grid.dim,))
    if grid.periodic:
        for d in range(grid.dim):
            span = grid.hi[d] - grid.lo[d]
            cycles = kvec[d] * span / (2 * np.pi)
            if abs(cycles - round(cycles)) > 1e-9:
                raise ConfigError(
                    f"plane-wave k={kvec[d]:g} not commensurate with periodic box "
                    f"(needs k*L/2pi integer, got {cycles:.6g})")
    mesh = grid.meshgrid()
    phase = sum(kvec[d] * mesh[d] for d in range(grid.dim))
    return WaveField(grid, np.exp(1j * phase), time).normalize()


def harmonic_eigenstate(grid: Grid, index: int, omega: float = 1.0,
                        mass: MassMatrix | None = None, hbar: float = 1.0,
                        time: float = 0.0) -> WaveField:
    """1D oscillator eigenstate psi_n for V = omega^2 x^2 / (2 m^{xx})."""
    if grid.dim != 1:
        raise StructuralError("harmonic_eigenstate is 1D")
    if index < 0:
        raise StructuralError("eigenstate index must be >= 0")
    inv = mass.inv_diag[0] if mass is not None else 1.0
    # effective mass m = 1/m^{xx}; length scale a = sqrt(hbar/(m omega))
    a = np.sqrt(hbar * inv / omega)
    xi = grid.axes[0] / a
    norm = (1.0 / (np.pi**0.25 * np.sqrt(2.0**index * factorial(index) * a)))
    psi = norm * eval_hermite(index, xi) * np.exp(-(xi**2) / 2)
    return WaveField(grid, psi.astype(complex), time).normalize()


def harmonic_eigenenergy(index: int, omega: float, hbar: float = 1.0) -> float:
    return hbar * omega * (index + 0.5)


def coherent_state(grid: Grid, center: float, omega: float = 1.0,
                   mass: MassMatrix | None = None, hbar: float = 1.0,
                   momentum: float = 0.0) -> WaveField:
    """Displaced oscillator ground state (stays Gaussian under harmonic evolution)."""
    inv = mass.inv_diag[0] if mass is not None else 1.0
    sigma = np.sqrt(hbar * inv / (2 * omega))
    return gaussian(grid, center=center, width=sigma, momentum=momentum, hbar=hbar)


def vortex(grid: Grid, m: int, envelope_width: float = 1.0,
           time: float = 0.0) -> WaveField:
    """(x+iy)^m under a Gaussian envelope; winding m by construction."""
    if grid.dim != 2:
        raise StructuralError("vortex states live on 2D grids")
    if m == 0:
        raise StructuralError("m=0 is not a vortex")
    x, y = grid.meshgrid()
    zpow = (x + 1j * np.sign(m) * y) ** abs(m)
    psi = zpow * np.exp(-(x**2 + y**2) / (2 * envelope_width**2))
    return WaveField(grid, psi, time).normalize()


def with_phase(psi: WaveField, phase_fn) -> WaveField:
    """Multiply by exp(i S(q)/hbar-style phase); phase_fn maps meshgrid -> real array."""
    phase = phase_fn(*psi.grid.meshgrid())
    return WaveField(psi.grid, psi.values * np.exp(1j * phase), psi.time)


def superposition(terms: list[tuple[complex, WaveField]]) -> WaveField:
    grid = terms[0][1].grid
    values = np.zeros(grid.shape, dtype=complex)
    for w, f in terms:
        if f.grid != grid:
            raise StructuralError("superposition terms must share one grid")
        values += w * f.values
    return WaveField(grid, values, terms[0][1].time).normalize()


def product_state(grid2d: Grid, psi1: WaveField, psi2: WaveField) -> WaveField:
    """Tensor product of two 1D fields on a matching 2D grid."""
    if grid2d.dim != 2:
        raise StructuralError("product_state targets a 2D grid")
    if psi1.grid.n[0] != grid2d.n[0] or psi2.grid.n[0] != grid2d.n[1]:
        raise StructuralError("factor grids do not match the 2D grid axes")
    values = np.outer(psi1.values, psi2.values)
    return WaveField(grid2d, values, psi1.time).normalize()
