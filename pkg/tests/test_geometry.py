import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbmcf import geometry as geo
from fbmcf.barrier import Barrier
from fbmcf.exceptions import GeometryError, PreconditionError, ResolutionError


def orders(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])


# -- fundamental forms ------------------------------------------------------
@pytest.mark.parametrize("rho", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("warp", [0.0, 0.5])
def test_half_sphere_is_umbilic(rho, warp):
    f = geo.fundamental_forms(geo.half_sphere(rho, 96, warp=warp))
    np.testing.assert_allclose(f.lam1, 1 / rho, rtol=1e-9)
    np.testing.assert_allclose(f.lam2, 1 / rho, rtol=1e-9)
    np.testing.assert_allclose(f.H, 2 / rho, rtol=1e-9)


def test_equatorial_disk_is_flat():
    f = geo.fundamental_forms(geo.equatorial_disk(64))
    assert np.max(np.abs(f.principal)) == 0.0 and np.max(np.abs(f.H)) == 0.0


def test_torus_closed_form_curvatures():
    a, rho0, n = 0.5, 2.0, 256
    f = geo.fundamental_forms(geo.torus_profile(a, rho0, n))
    th = 2 * np.pi * np.arange(n) / n
    np.testing.assert_allclose(f.lam1, 1 / a, rtol=1e-9)
    np.testing.assert_allclose(f.lam2, np.cos(th) / (rho0 + a * np.cos(th)), atol=1e-9)
    assert np.ptp(f.lam2) > 0.5


def test_planar_circle_curvature():
    f = geo.fundamental_forms(geo.circle(2.0, 64))
    np.testing.assert_allclose(f.H, 0.5, rtol=1e-9)
    assert f.principal.shape == (64, 1)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 1.3), st.lists(st.floats(-0.03, 0.03), min_size=1, max_size=3))
def test_curvature_field_identities(theta, amps):
    f = geo.fundamental_forms(geo.perturbed_cap(theta, amps, 96))
    np.testing.assert_allclose(f.H, f.lam1 + f.lam2, atol=1e-12)
    np.testing.assert_allclose(f.A_norm**2, f.lam1**2 + f.lam2**2, rtol=1e-12)
    np.testing.assert_allclose(f.A_norm**2, f.S1**2 - 2 * f.S2, rtol=1e-9,
                               atol=1e-12 * np.max(f.A_norm**2))
    np.testing.assert_allclose(np.linalg.norm(f.nu, axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(np.sum(f.nu * f.tangent, axis=1), 0.0, atol=1e-14)


def test_spherical_cap_curvature_and_orthogonality():
    theta = np.pi / 4
    c = geo.spherical_cap(theta, 128)
    f = geo.fundamental_forms(c)
    # interior nodes are exact; the one-sided end stencil is O(h^2)
    np.testing.assert_allclose(f.H, 2 * np.tan(theta), rtol=1e-4)
    np.testing.assert_allclose(f.H[:-3], 2 * np.tan(theta), rtol=1e-9)
    assert geo.boundary_frame(c).defect < 1e-8


# -- invariants of the curve type --------------------------------------------
def test_off_axis_zero_radius_rejected():
    r = np.array([0.0, 0.5, 0.0, 0.5, 1.0])
    with pytest.raises(GeometryError):
        geo.ProfileCurve(r, np.arange(5.0), "axis", "free")


def test_barrier_end_off_barrier_rejected():
    r = np.linspace(0, 0.9, 8)
    with pytest.raises(GeometryError):
        geo.ProfileCurve(r, np.zeros(8), "axis", "barrier", 2, 1.0, Barrier.sphere())


def test_too_few_nodes():
    with pytest.raises(ResolutionError):
        geo.ProfileCurve([0.0, 1.0, 2.0], [0.0, 0.0, 0.0], "free", "free", 1)


def test_dict_roundtrip():
    c = geo.perturbed_cap(0.6, (0.02,), 64)
    d = c.to_dict()
    c2 = geo.ProfileCurve.from_dict(d, barrier=Barrier.from_dict(d["barrier"]))
    np.testing.assert_array_equal(c2.r, c.r)
    np.testing.assert_array_equal(c2.z, c.z)
    assert (c2.end0, c2.end1, c2.n_dim, c2.orientation) == (c.end0, c.end1, c.n_dim, c.orientation)


def test_redistribute_equalises_spacing():
    c = geo.half_sphere(1.0, 64, warp=0.6)
    assert c.spacing_ratio > 2
    c2 = geo.redistribute(c, 80)
    assert c2.n_nodes == 80 and c2.spacing_ratio < 1.01
    np.testing.assert_allclose(np.hypot(c2.r, c2.z), 1.0, atol=1e-5)


def test_self_intersection_detection():
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    eight = geo.ProfileCurve(np.sin(2 * t) + 3.0, np.sin(t), "free", "free", 1, 1.0, None, True)
    assert geo.self_intersects(eight)
    assert not geo.self_intersects(geo.circle(1.0, 64))


# -- differential operators ---------------------------------------------------
def test_laplacian_of_constant_vanishes():
    c = geo.perturbed_cap(0.7, (0.02,), 128)
    assert np.max(np.abs(geo.laplace_beltrami(c, np.full(c.n_nodes, 3.0)))) < 1e-9


def test_coordinate_laplacian_second_order():
    # Delta z = -H nu_z on the half-sphere (Delta F = -H nu)
    errs = []
    for n in (64, 128, 256):
        c = geo.half_sphere(1.0, n, warp=0.5)
        f = geo.fundamental_forms(c)
        errs.append(np.max(np.abs(geo.laplace_beltrami(c, c.z, f) + f.H * f.nu[:, 1])))
    assert np.all(orders(errs) > 1.8)


def test_coordinate_laplacian_on_cap():
    c = geo.perturbed_cap(0.7, (0.02,), 256)
    f = geo.fundamental_forms(c)
    err = geo.laplace_beltrami(c, c.z, f) + f.H * f.nu[:, 1]
    assert np.max(np.abs(err)) < 1e-2 * np.max(np.abs(f.H))


def test_laplacian_needs_five_nodes():
    c = geo.ProfileCurve([0.0, 0.3, 0.6, 1.0], [1.0, 0.9, 0.7, 0.2], "axis", "free")
    with pytest.raises(ResolutionError):
        geo.laplace_beltrami(c, np.ones(4))


def test_conormal_derivative_examples():
    c = geo.half_sphere(2.0, 128)
    assert geo.conormal_derivative(c, np.ones(c.n_nodes)) == pytest.approx(0.0, abs=1e-12)
    s = geo.arclength(c)
    assert geo.conormal_derivative(c, s) == pytest.approx(1.0, abs=1e-10)
    assert geo.conormal_derivative(c, -s) == pytest.approx(-1.0, abs=1e-10)


def test_conormal_requires_barrier_end():
    with pytest.raises(PreconditionError):
        geo.conormal_derivative(geo.torus_profile(), np.ones(128))


# -- quadrature ---------------------------------------------------------------
def test_hemisphere_area_and_equator():
    rho = 1.5
    c = geo.half_sphere(rho, 200)
    assert geo.integrate_bulk(c, 1.0) == pytest.approx(2 * np.pi * rho**2, rel=5e-3)
    assert geo.integrate_boundary(c, 1.0) == pytest.approx(2 * np.pi * rho)
    assert geo.integrate_bulk(c, 0.0) == 0.0 and geo.integrate_boundary(c, 0.0) == 0.0


def test_area_quadrature_second_order():
    errs = [abs(geo.area(geo.half_sphere(1.0, n, warp=0.3)) - 2 * np.pi) for n in (64, 128, 256)]
    assert np.all(orders(errs) > 1.8)


def test_node_weights_match_bulk_integral():
    c = geo.perturbed_cap(0.8, (0.03, -0.01), 77)
    f = np.cos(np.arange(c.n_nodes))
    assert np.sum(geo.node_weights(c) * f) == pytest.approx(geo.integrate_bulk(c, f), rel=1e-12)


# -- constructors -------------------------------------------------------------
@pytest.mark.parametrize("theta", [0.0, np.pi / 2, 2.0])
def test_cap_angle_range(theta):
    with pytest.raises(PreconditionError):
        geo.spherical_cap(theta)


def test_warp_range():
    with pytest.raises(PreconditionError):
        geo.half_sphere(warp=1.0)
