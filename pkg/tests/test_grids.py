"""Grid construction, differential operators, interpolation, quadrature."""
import numpy as np
import pytest

from madflow import (DIRICHLET, PERIODIC, Grid, MassMatrix, WaveField,
                     gradient, interpolate, laplacian, mesh_from_center)
from madflow.errors import OutOfDomainError, StructuralError


def test_grid_spacing_conventions():
    gp = Grid((-1.0,), (1.0,), (100,), PERIODIC)
    assert gp.h[0] == pytest.approx(2.0 / 100)
    gd = Grid((-1.0,), (1.0,), (101,), DIRICHLET)
    assert gd.h[0] == pytest.approx(2.0 / 100)
    assert gd.axes[0][-1] == pytest.approx(1.0)


def test_grid_rejects_bad_input():
    with pytest.raises(StructuralError):
        Grid((-1.0,), (1.0,), (8,))          # below the 16-point minimum
    with pytest.raises(StructuralError):
        Grid((1.0,), (-1.0,), (32,))
    with pytest.raises(StructuralError):
        Grid((-1.0,), (1.0,), (32,), "weird")
    with pytest.raises(StructuralError):
        MassMatrix((1.0, -2.0))


def test_gradient_linear_function_exact():
    g = Grid((-1.0,), (1.0,), (33,), DIRICHLET)
    f = g.axes[0].copy()
    df = gradient(f, g)[0]
    assert np.max(np.abs(df - 1.0)) < 1e-10


def test_gradient_constant_annihilated():
    # periodic stencils cancel exactly; one-sided edges leave only roundoff
    g = mesh_from_center(2.0, 64, 1, PERIODIC)
    assert np.max(np.abs(gradient(np.full(g.shape, 3.7), g))) == 0.0
    gd = mesh_from_center(2.0, 64, 1, DIRICHLET)
    assert np.max(np.abs(gradient(np.full(gd.shape, 3.7), gd))) < 1e-12


def test_gradient_sin_periodic_order2():
    k = 3.0
    errs = []
    for n in (64, 128):
        g = mesh_from_center(np.pi, n, 1, PERIODIC)
        x = g.axes[0]
        err = np.max(np.abs(gradient(np.sin(k * x), g)[0] - k * np.cos(k * x)))
        errs.append(err)
    ratio = errs[0] / errs[1]
    assert 4 * 0.8 < ratio < 4 * 1.2          # second order


def test_laplacian_quadratic_1d():
    g = Grid((-1.0,), (1.0,), (101,), DIRICHLET)
    f = g.axes[0] ** 2
    lap = laplacian(f, g, MassMatrix.isotropic(1.0, 1))
    assert np.max(np.abs(lap - 2.0)) < 1e-8


def test_laplacian_quadratic_2d_and_mass_weights():
    g = Grid((-1.0, -1.0), (1.0, 1.0), (65, 65), DIRICHLET)
    x, y = g.meshgrid()
    lap = laplacian(x**2 + y**2, g, MassMatrix.isotropic(1.0, 2))
    assert np.max(np.abs(lap - 4.0)) < 1e-8
    lap_w = laplacian(x**2 + y**2, g, MassMatrix((2.0, 0.5)))
    assert np.max(np.abs(lap_w - 5.0)) < 1e-8


def test_laplacian_constant_zero():
    g = mesh_from_center(2.0, 32, 2, PERIODIC)
    assert np.max(np.abs(laplacian(np.full(g.shape, 1.23), g))) == 0.0


def test_laplacian_order2_refinement():
    errs = []
    for n in (64, 128):
        g = mesh_from_center(np.pi, n, 1, PERIODIC)
        x = g.axes[0]
        err = np.max(np.abs(laplacian(np.sin(2 * x), g) + 4 * np.sin(2 * x)))
        errs.append(err)
    assert 4 * 0.8 < errs[0] / errs[1] < 4 * 1.2


def test_interpolate_linear_exact():
    g = Grid((-1.0,), (1.0,), (33,), DIRICHLET)
    f = g.axes[0].copy()
    assert interpolate(f, g, np.array([0.3])) == pytest.approx(0.3, abs=1e-12)


def test_interpolate_constant_and_nodes():
    g = mesh_from_center(2.0, 32, 1, PERIODIC)
    f = np.full(g.shape, 2.5)
    assert interpolate(f, g, np.array([0.777])) == pytest.approx(2.5, abs=1e-13)
    # exact reproduction of nodal values
    f2 = np.sin(g.axes[0])
    at_nodes = interpolate(f2, g, g.axes[0][:, None])
    assert np.max(np.abs(at_nodes - f2)) < 1e-13


def test_interpolate_sin_midpoint_order2():
    errs = []
    for n in (64, 128):
        g = mesh_from_center(np.pi, n, 1, PERIODIC)
        mids = g.axes[0] + g.h[0] / 2
        err = np.max(np.abs(interpolate(np.sin(g.axes[0]), g, mids[:, None])
                            - np.sin(mids)))
        errs.append(err)
    assert 4 * 0.7 < errs[0] / errs[1] < 4 * 1.3


def test_interpolate_out_of_domain():
    g = Grid((-1.0,), (1.0,), (33,), DIRICHLET)
    with pytest.raises(OutOfDomainError):
        interpolate(g.axes[0].copy(), g, np.array([1.5]))


def test_interpolate_periodic_wrap():
    g = mesh_from_center(1.0, 32, 1, PERIODIC)
    f = np.cos(np.pi * g.axes[0])
    a = interpolate(f, g, np.array([0.5]))
    b = interpolate(f, g, np.array([2.5]))   # one period over
    assert a == pytest.approx(b, abs=1e-13)


def test_quadrature_normalization():
    g = mesh_from_center(8.0, 256, 1, PERIODIC)
    rho = np.exp(-g.axes[0] ** 2)
    assert g.integrate(rho) == pytest.approx(np.sqrt(np.pi), rel=1e-10)


def test_wavefield_normalize_and_finite_check():
    g = mesh_from_center(4.0, 64, 1, PERIODIC)
    psi = WaveField(g, np.exp(-g.axes[0] ** 2 + 0j))
    assert abs(psi.normalize().norm() - 1.0) <= 1e-12
    bad = np.ones(g.shape, dtype=complex)
    bad[3] = np.nan
    with pytest.raises(StructuralError):
        WaveField(g, bad)


def test_mass_matrix_lower_raise_roundtrip():
    m = MassMatrix((2.0, 0.25))
    v = np.array([[1.0], [3.0]])
    assert np.allclose(m.raise_(m.lower(v)), v)
